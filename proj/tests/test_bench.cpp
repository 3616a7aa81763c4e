#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "strag/bench.hpp"

using namespace strag;

namespace {

MetricsRow row(std::string strategy, std::uint64_t seed, std::string metric, double value) {
  return {std::move(strategy), "sort", 4, 1ULL << 30, seed, std::move(metric), value};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.node_counts = {2};
  spec.input_sizes = {256ULL << 20};
  spec.reps = 1;
  spec.warmup_jobs = 2;
  spec.learner.train.epochs = 10;
  return spec;
}

double value_of(const std::vector<MetricsRow>& rows, std::string_view strategy, std::string_view metric,
                std::size_t nodes = 0) {
  for (const auto& r : rows) {
    if (r.strategy == strategy && r.metric == metric && (nodes == 0 || r.nodes == nodes)) return r.value;
  }
  FAIL("missing row " << strategy << " " << metric);
  return 0;
}

/// Uses the weights each task will actually realize.
class OracleStrategy final : public Strategy {
 public:
  OracleStrategy(std::map<TaskId, std::vector<double>> realized)
      : Strategy({}, nullptr), realized_(std::move(realized)) {}
  StrategyKind kind() const override { return StrategyKind::Late; }
  std::optional<TaskEstimate> estimate(const TaskSnapshot& s, const EvaluationContext&) const override {
    StageWeights w;
    w.set_phase(s.phase, realized_.at(s.task_id));
    return weighted_estimate(s, w);
  }
  Evaluation evaluate(const EvaluationContext&) const override { return {}; }

 private:
  std::map<TaskId, std::vector<double>> realized_;
};

}  // namespace

TEST_CASE("CSV output") {
  const auto csv = rows_to_csv({row("late", 1, "makespan_s", 120.5)});
  CHECK(count_lines(csv) == 2);
  CHECK(csv == std::string(kCsvHeader) + "\nlate,sort,4,1073741824,1,makespan_s,120.5\n");

  std::vector<MetricsRow> rows{row("nn", 2, "makespan_s", 10), row("late", 2, "makespan_s", 20),
                               row("late", 1, "makespan_s", 30)};
  const auto a = rows_to_csv(rows);
  std::reverse(rows.begin(), rows.end());
  CHECK(rows_to_csv(rows) == a);
  auto back = rows_from_csv(a);
  std::sort(rows.begin(), rows.end(), row_less);
  CHECK(back == rows);

  CHECK_THROWS(rows_to_csv({row("late", 1, "makespan_s", -1)}));
  CHECK_THROWS(rows_to_csv({row("late", 1, "weight_mse", std::nan(""))}));
  CHECK_NOTHROW(rows_to_csv({row("nn", 1, "makespan_improvement_vs_late_pct", -3)}));
  CHECK_THROWS_AS(rows_from_csv("a,b\n"), StorageError);
  CHECK_THROWS_AS(rows_from_csv(std::string(kCsvHeader) + "\nlate,sort,x,1,1,m,1\n"), StorageError);
}

TEST_CASE("summary table") {
  const auto s = summary_table({row("late", 1, "makespan_s", 10), row("late", 2, "makespan_s", 20)});
  CHECK(s.find("mean") != std::string::npos);
  std::istringstream in(s);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  std::istringstream fields(line);
  std::vector<std::string> f;
  for (std::string x; fields >> x;) f.push_back(x);
  REQUIRE(f.size() == 8);
  CHECK(f[5] == "2");
  CHECK(f[6] == "15");
  CHECK(std::stod(f[7]) == doctest::Approx(7.0710678118654755));
}

TEST_CASE("reports are byte-stable") {
  const auto dir = std::filesystem::temp_directory_path() / "strag_bench_test";
  std::filesystem::create_directories(dir);
  const std::vector<MetricsRow> rows{row("late", 1, "makespan_s", 10), row("nn", 1, "makespan_s", 9.25)};
  emit_report(rows, dir / "a.csv");
  emit_report(rows, dir / "b.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv.summary.txt") == slurp(dir / "b.csv.summary.txt"));
  CHECK(read_rows(dir / "a.csv") == rows);
}

TEST_CASE("improvement and task sampling") {
  CHECK(improvement_pct(100, 85) == doctest::Approx(15));
  CHECK(improvement_pct(100, 120) == doctest::Approx(-20));
  CHECK_THROWS_AS(improvement_pct(0, 1), DegenerateInputError);

  std::vector<TaskId> ids(50);
  for (TaskId i = 0; i < 50; ++i) ids[i] = 100 + i;
  const auto s = sample_tasks(ids, 20);
  CHECK(s.size() == 20);
  CHECK(std::set<TaskId>(s.begin(), s.end()).size() == 20);
  CHECK(s.front() == 100);
  CHECK(sample_tasks(std::span<const TaskId>(ids).first(5), 20).size() == 5);
}

TEST_CASE("spec validation") {
  auto spec = small_spec();
  spec.validate();
  spec.node_counts = {5};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = small_spec();
  spec.strategies.clear();
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK(parse_experiment("tte") == ExperimentKind::Tte);
  CHECK_THROWS_AS(parse_experiment("exp9"), ConfigError);

  spec = small_spec();
  spec.warmup_jobs = 0;
  spec.strategies = {StrategyKind::Nn};
  CHECK_THROWS_AS(run_weights_experiment(spec), Error);
  spec.strategies = {StrategyKind::NoSpeculate, StrategyKind::Late};
  CHECK_NOTHROW(run_makespan_experiment(spec));
}

TEST_CASE("LATE weights are constant whatever the history") {
  ClusterConfig c;
  c.nodes = uniform_nodes(2);
  c.input_bytes = 512ULL << 20;
  HistoryStore h;
  const double start = run_warmup(c, 3, h);
  CHECK(h.size() == 3 * (4 + 2));
  auto k = std::make_shared<Knowledge>(build_knowledge(h, LearnerConfig{}, {.nn = false, .clusters = true}));
  const auto late = make_strategy(StrategyKind::Late, {}, k);
  const auto none = make_strategy(StrategyKind::NoSpeculate, {}, nullptr);
  SimOptions opt;
  opt.observers = {late.get()};
  c.start_clock = start;
  const auto r = run_simulation(c, *none, nullptr, opt);
  REQUIRE_FALSE(r.estimates.empty());
  for (const auto& log : r.estimates) CHECK(log.estimate.weights == StageWeights::naive());
}

TEST_CASE("an oracle fed realized weights has zero weight error") {
  ClusterConfig c;
  c.nodes = uniform_nodes(3);
  c.input_bytes = 1ULL << 30;
  const auto none = make_strategy(StrategyKind::NoSpeculate, {}, nullptr);
  const auto first = run_simulation(c, *none);
  std::map<TaskId, std::vector<double>> realized;
  for (const auto& rec : first.records) realized[rec.task_id] = rec.realized_weights;

  OracleStrategy oracle(realized);
  SimOptions opt;
  opt.observers = {&oracle};
  const auto second = run_simulation(c, *none, nullptr, opt);
  std::vector<double> est, act;
  for (const auto& log : second.estimates) {
    const auto w = log.estimate.weights.phase(log.estimate.phase);
    est.insert(est.end(), w.begin(), w.end());
    const auto& r = realized.at(log.estimate.task_id);
    act.insert(act.end(), r.begin(), r.end());
  }
  REQUIRE_FALSE(est.empty());
  CHECK(mse_error(est, act) == 0.0);
}

TEST_CASE("weights experiment rows") {
  auto spec = small_spec();
  spec.strategies = {StrategyKind::Late, StrategyKind::Esamr, StrategyKind::Nn};
  const auto rows = run_weights_experiment(spec);
  for (std::string_view s : {"late", "esamr", "nn"}) {
    CHECK(value_of(rows, s, "weight_mse") >= 0.0);
    CHECK(value_of(rows, s, "weight_mse_map") >= 0.0);
    CHECK(value_of(rows, s, "weight_mse_reduce") >= 0.0);
  }
  CHECK(value_of(rows, "nn", "weight_mse_improvement_vs_late_pct") ==
        doctest::Approx(improvement_pct(value_of(rows, "late", "weight_mse"), value_of(rows, "nn", "weight_mse"))));
  CHECK(rows_to_csv(rows) == rows_to_csv(run_weights_experiment(spec)));
}

TEST_CASE("time-to-end experiment samples twenty tasks per phase") {
  auto spec = small_spec();
  spec.input_sizes = {4ULL << 30};  // 32 maps
  spec.cluster.reduce_tasks = 24;
  spec.strategies = {StrategyKind::Late, StrategyKind::Esamr, StrategyKind::Nn};
  const auto rows = run_tte_experiment(spec);
  std::size_t map_diffs = 0, reduce_diffs = 0;
  for (const auto& r : rows) {
    if (r.strategy != "esamr-nn") continue;
    map_diffs += r.metric.starts_with("tte_diff_map_task");
    reduce_diffs += r.metric.starts_with("tte_diff_reduce_task");
  }
  CHECK(map_diffs == 20);
  CHECK(reduce_diffs == 20);
  for (std::string_view s : {"late", "esamr", "nn"}) {
    CHECK(value_of(rows, s, "tte_mae_map") >= 0.0);
    CHECK(value_of(rows, s, "tte_mae_reduce") >= 0.0);
    CHECK(value_of(rows, s, "tte_mse_reduce") >= value_of(rows, s, "tte_mae_reduce") *
                                                     value_of(rows, s, "tte_mae_reduce") - 1e-9);
  }
}

TEST_CASE("makespan experiment") {
  auto spec = small_spec();
  spec.node_counts = {2, 3, 4};
  spec.cluster.noise = 0.0;
  spec.strategies = {StrategyKind::NoSpeculate, StrategyKind::Late};
  auto rows = run_makespan_experiment(spec);
  // 256 MB on two nodes: one map wave (10 s), then two one-block reduces (10 s).
  CHECK(value_of(rows, "none", "makespan_s", 2) == doctest::Approx(20).epsilon(1e-9));
  for (std::size_t n : {2, 3, 4}) {
    CHECK(value_of(rows, "none", "decisions", n) == 0);
    CHECK(value_of(rows, "late", "makespan_improvement_vs_none_pct", n) >= 0.0);
  }

  // A single-block job: more nodes never beat one map wave.
  spec.input_sizes = {128ULL << 20};
  rows = run_makespan_experiment(spec);
  for (std::size_t n : {2, 3, 4}) CHECK(value_of(rows, "none", "makespan_s", n) >= 10.0);
  CHECK(value_of(rows, "none", "makespan_s", 4) > 10.0);
}
