#include "strag/bench.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <tuple>

#include "strag/progress.hpp"
#include "strag/text.hpp"

namespace strag {

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Weights: return "weights";
    case ExperimentKind::Tte: return "tte";
    case ExperimentKind::Makespan: return "makespan";
    case ExperimentKind::Sweep: return "sweep";
  }
  return "?";
}

ExperimentKind parse_experiment(std::string_view name) {
  for (auto k : {ExperimentKind::Weights, ExperimentKind::Tte, ExperimentKind::Makespan, ExperimentKind::Sweep}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

ExperimentSpec::ExperimentSpec() { cluster.nodes = uniform_nodes(4); }

void ExperimentSpec::validate() const {
  if (reps < 1) throw ConfigError("repetitions must be at least 1");
  if (strategies.empty()) throw ConfigError("no strategies to compare");
  if (node_counts.empty() || input_sizes.empty()) throw ConfigError("sweeps must not be empty");
  for (std::size_t n : node_counts) {
    if (n == 0 || n > cluster.nodes.size()) {
      throw ConfigError("node count " + std::to_string(n) + " exceeds the configured cluster of " +
                        std::to_string(cluster.nodes.size()));
    }
  }
  for (auto bytes : input_sizes) {
    if (bytes == 0) throw ConfigError("input sizes must be positive");
  }
  if (sampled_tasks == 0) throw ConfigError("sampled task count must be positive");
  params.validate();
  cluster.validate();
}

bool row_less(const MetricsRow& a, const MetricsRow& b) {
  return std::tie(a.strategy, a.workload, a.nodes, a.input_bytes, a.seed, a.metric, a.value) <
         std::tie(b.strategy, b.workload, b.nodes, b.input_bytes, b.seed, b.metric, b.value);
}

double improvement_pct(double baseline, double method) {
  if (!(baseline > 0.0)) throw DegenerateInputError("improvement needs a positive baseline");
  return (baseline - method) / baseline * 100.0;
}

std::vector<TaskId> sample_tasks(std::span<const TaskId> ids, std::size_t count) {
  const std::size_t n = std::min(count, ids.size());
  std::vector<TaskId> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(ids[i * ids.size() / n]);
  return out;
}

ClusterConfig point_config(const ExperimentSpec& spec, std::size_t nodes, std::uint64_t input_bytes,
                           std::uint64_t seed) {
  ClusterConfig c = spec.cluster;
  c.nodes.resize(nodes);
  c.input_bytes = input_bytes;
  c.seed = seed;
  return c;
}

double run_warmup(const ClusterConfig& point, std::size_t jobs, HistoryStore& history) {
  const auto none = make_strategy(StrategyKind::NoSpeculate, {}, nullptr);
  double clock = point.start_clock;
  for (std::size_t w = 0; w < jobs; ++w) {
    ClusterConfig c = point;
    c.seed = derive_seed(point.seed, {0x3a7, w});
    c.job_id = w + 1;
    c.start_clock = clock;
    clock += run_simulation(c, *none, &history).makespan;
  }
  return clock;
}

namespace {

struct Point {
  std::size_t nodes;
  std::uint64_t input;
  std::uint64_t seed;
};

struct Parts {
  bool weights = false;
  bool tte = false;
  bool makespan = false;
};

bool contains(const std::vector<StrategyKind>& v, StrategyKind k) {
  return std::find(v.begin(), v.end(), k) != v.end();
}

std::string phase_metric(std::string_view base, Phase p) {
  return std::string(base) + "_" + std::string(to_string(p));
}

SimOptions quiet_options() {
  SimOptions o;
  o.log_estimates = false;
  return o;
}

double latest_finish(const HistoryStore& h) {
  double t = 0.0;
  for (Phase p : {Phase::Map, Phase::Reduce}) {
    for (const auto& r : h.records(p)) t = std::max(t, r.finished_at);
  }
  return t;
}

/// One sweep point: warm-up, learner fitting, then the requested measurements.
class PointRun {
 public:
  PointRun(const ExperimentSpec& spec, const Point& pt) : spec_(spec), pt_(pt) {
    HistoryStore history = spec.history.empty() ? HistoryStore{} : HistoryStore::load(spec.history);
    eval_ = point_config(spec, pt.nodes, pt.input, pt.seed);
    eval_.start_clock = latest_finish(history);
    eval_.start_clock = run_warmup(eval_, spec.warmup_jobs, history);
    eval_.job_id = spec.warmup_jobs + 1;

    const bool learned = contains(spec.strategies, StrategyKind::Samr) ||
                         contains(spec.strategies, StrategyKind::Esamr) || contains(spec.strategies, StrategyKind::Nn);
    if (learned && history.empty()) throw Error("history is empty after warm-up; learned strategies need records");

    LearnerConfig learner = spec.learner;
    learner.k = spec.params.k;
    KnowledgeNeeds needs{contains(spec.strategies, StrategyKind::Nn), contains(spec.strategies, StrategyKind::Esamr)};
    knowledge_ = std::make_shared<const Knowledge>(build_knowledge(history, learner, needs));
    for (StrategyKind k : spec.strategies) strategies_.push_back(make_strategy(k, spec.params, knowledge_));
  }

  std::vector<MetricsRow> run(const Parts& parts) {
    if (parts.weights || parts.tte) observe(parts);
    if (parts.makespan) makespan();
    return std::move(rows_);
  }

 private:
  void add(std::string_view strategy, std::string metric, double value) {
    rows_.push_back({std::string(strategy), std::string(to_string(eval_.workload)), pt_.nodes, pt_.input, pt_.seed,
                     std::move(metric), value});
  }

  /// Relative improvement rows of every strategy over the baselines present.
  void improvements(const std::map<StrategyKind, double>& values, const std::string& metric) {
    for (StrategyKind base : {StrategyKind::NoSpeculate, StrategyKind::Late}) {
      auto b = values.find(base);
      if (b == values.end() || !(b->second > 0.0)) continue;
      for (const auto& [k, v] : values) {
        if (k == base) continue;
        add(to_string(k), metric + "_improvement_vs_" + std::string(to_string(base)) + "_pct",
            improvement_pct(b->second, v));
      }
    }
  }

  /// One non-speculative run with every strategy observing; scores weights
  /// and time-to-end estimates against what the run actually did.
  void observe(const Parts& parts) {
    SimOptions opts;
    opts.log_estimates = false;
    opts.observe_min_elapsed = spec_.observe_min_elapsed;
    for (const auto& s : strategies_) {
      if (s->kind() != StrategyKind::NoSpeculate) opts.observers.push_back(s.get());
    }
    if (opts.observers.empty()) return;
    const auto none = make_strategy(StrategyKind::NoSpeculate, spec_.params, knowledge_);
    const SimResult res = run_simulation(eval_, *none, nullptr, opts);

    std::map<TaskId, const ExecutionRecord*> record_of;
    for (const auto& r : res.records) record_of[r.task_id] = &r;

    if (parts.weights) score_weights(res, record_of);
    if (parts.tte) score_tte(res);
  }

  void score_weights(const SimResult& res, const std::map<TaskId, const ExecutionRecord*>& record_of) {
    std::map<StrategyKind, double> all_mse;
    for (const Strategy* obs : observers()) {
      std::vector<double> est_all, act_all;
      for (Phase p : {Phase::Map, Phase::Reduce}) {
        std::vector<double> est, act;
        for (const auto& log : res.estimates) {
          if (log.strategy != obs->kind() || log.estimate.phase != p) continue;
          const auto predicted = log.estimate.weights.phase(p);
          const auto& realized = record_of.at(log.estimate.task_id)->realized_weights;
          est.insert(est.end(), predicted.begin(), predicted.end());
          act.insert(act.end(), realized.begin(), realized.end());
        }
        if (est.empty()) continue;
        add(to_string(obs->kind()), phase_metric("weight_mse", p), mse_error(est, act));
        est_all.insert(est_all.end(), est.begin(), est.end());
        act_all.insert(act_all.end(), act.begin(), act.end());
      }
      if (est_all.empty()) continue;
      all_mse[obs->kind()] = mse_error(est_all, act_all);
      add(to_string(obs->kind()), "weight_mse", all_mse[obs->kind()]);
    }
    improvements(all_mse, "weight_mse");
  }

  void score_tte(const SimResult& res) {
    for (Phase p : {Phase::Map, Phase::Reduce}) {
      std::vector<TaskId> ids;
      for (const auto& t : res.tasks) {
        if (t.phase == p) ids.push_back(t.task_id);
      }
      const auto picked = sample_tasks(ids, spec_.sampled_tasks);
      const std::set<TaskId> chosen(picked.begin(), picked.end());

      std::map<StrategyKind, double> mae_by;
      std::map<StrategyKind, std::map<TaskId, std::pair<double, std::size_t>>> per_task;
      for (const Strategy* obs : observers()) {
        double abs_sum = 0.0, sq_sum = 0.0;
        std::size_t n = 0;
        for (const auto& log : res.estimates) {
          if (log.strategy != obs->kind() || log.estimate.phase != p || !chosen.contains(log.estimate.task_id)) continue;
          // A zero rate gives no finite estimate; such instants are not scored.
          if (!std::isfinite(log.estimate.tte)) continue;
          const double err = log.estimate.tte - log.realized_remaining;
          abs_sum += std::abs(err);
          sq_sum += err * err;
          ++n;
          auto& [task_sum, task_n] = per_task[obs->kind()][log.estimate.task_id];
          task_sum += std::abs(err);
          ++task_n;
        }
        if (n == 0) continue;
        mae_by[obs->kind()] = abs_sum / static_cast<double>(n);
        add(to_string(obs->kind()), phase_metric("tte_mae", p), abs_sum / static_cast<double>(n));
        add(to_string(obs->kind()), phase_metric("tte_mse", p), sq_sum / static_cast<double>(n));
      }
      improvements(mae_by, phase_metric("tte_mae", p));

      // Per-task difference of mean absolute error, ESAMR minus NN.
      auto es = per_task.find(StrategyKind::Esamr);
      auto nn = per_task.find(StrategyKind::Nn);
      if (es == per_task.end() || nn == per_task.end()) continue;
      for (TaskId id : picked) {
        auto a = es->second.find(id);
        auto b = nn->second.find(id);
        if (a == es->second.end() || b == nn->second.end()) continue;
        const double diff = a->second.first / static_cast<double>(a->second.second) -
                            b->second.first / static_cast<double>(b->second.second);
        add("esamr-nn", phase_metric("tte_diff", p) + "_task" + std::to_string(id), diff);
      }
    }
  }

  void makespan() {
    std::map<StrategyKind, double> spans;
    for (const auto& s : strategies_) {
      const SimResult res = run_simulation(eval_, *s, nullptr, quiet_options());
      spans[s->kind()] = res.makespan;
      add(to_string(s->kind()), "makespan_s", res.makespan);
      add(to_string(s->kind()), "decisions", static_cast<double>(res.decisions.size()));
      add(to_string(s->kind()), "cancelled_work_s", res.cancelled_work);
    }
    improvements(spans, "makespan");
  }

  std::vector<const Strategy*> observers() const {
    std::vector<const Strategy*> out;
    for (const auto& s : strategies_) {
      if (s->kind() != StrategyKind::NoSpeculate) out.push_back(s.get());
    }
    return out;
  }

  const ExperimentSpec& spec_;
  Point pt_;
  ClusterConfig eval_;
  std::shared_ptr<const Knowledge> knowledge_;
  std::vector<std::unique_ptr<Strategy>> strategies_;
  std::vector<MetricsRow> rows_;
};

std::vector<MetricsRow> run_parts(const ExperimentSpec& spec, const Parts& parts) {
  spec.validate();
  std::vector<Point> points;
  for (std::size_t n : spec.node_counts) {
    for (auto input : spec.input_sizes) {
      for (std::size_t r = 0; r < spec.reps; ++r) points.push_back({n, input, spec.base_seed + r});
    }
  }

  std::vector<std::vector<MetricsRow>> out(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  const auto count = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      out[i] = PointRun(spec, points[i]).run(parts);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<MetricsRow> rows;
  for (auto& part : out) rows.insert(rows.end(), part.begin(), part.end());
  std::sort(rows.begin(), rows.end(), row_less);
  return rows;
}

}  // namespace

std::vector<MetricsRow> run_weights_experiment(const ExperimentSpec& spec) { return run_parts(spec, {true, false, false}); }
std::vector<MetricsRow> run_tte_experiment(const ExperimentSpec& spec) { return run_parts(spec, {false, true, false}); }
std::vector<MetricsRow> run_makespan_experiment(const ExperimentSpec& spec) {
  return run_parts(spec, {false, false, true});
}

std::vector<MetricsRow> run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::Weights: return run_weights_experiment(spec);
    case ExperimentKind::Tte: return run_tte_experiment(spec);
    case ExperimentKind::Makespan: return run_makespan_experiment(spec);
    case ExperimentKind::Sweep: return run_parts(spec, {true, true, true});
  }
  throw ConfigError("unknown experiment kind");
}

// ---------------------------------------------------------------------------
// Reports

namespace {

bool non_negative_metric(std::string_view m) {
  for (std::string_view p : {"weight_mse", "tte_mae", "tte_mse"}) {
    if (m.starts_with(p) && m.find("_improvement_") == std::string_view::npos) return true;
  }
  return m == "makespan_s" || m == "decisions" || m == "cancelled_work_s";
}

void check_row(const MetricsRow& r) {
  if (!std::isfinite(r.value)) throw Error("metric " + r.metric + " is not finite");
  if (non_negative_metric(r.metric) && r.value < 0.0) throw Error("metric " + r.metric + " is negative");
  for (const std::string* field : {&r.strategy, &r.workload, &r.metric}) {
    if (field->find_first_of(",\n") != std::string::npos) throw Error("row field contains a separator");
  }
}

}  // namespace

std::string rows_to_csv(std::vector<MetricsRow> rows) {
  std::sort(rows.begin(), rows.end(), row_less);
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    check_row(r);
    out += r.strategy + ',' + r.workload + ',' + std::to_string(r.nodes) + ',' + std::to_string(r.input_bytes) + ',' +
           std::to_string(r.seed) + ',' + r.metric + ',' + text::format_double(r.value) + '\n';
  }
  return out;
}

std::vector<MetricsRow> rows_from_csv(std::string_view csv) {
  std::vector<MetricsRow> rows;
  bool header = true;
  for (std::string_view line : text::split(csv, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      if (line != kCsvHeader) throw StorageError("unexpected CSV header");
      header = false;
      continue;
    }
    const auto f = text::split(line, ',');
    if (f.size() != 7) throw StorageError("CSV row needs 7 fields: " + std::string(line));
    try {
      rows.push_back({std::string(f[0]), std::string(f[1]), static_cast<std::size_t>(text::parse_u64(f[2])),
                      text::parse_u64(f[3]), text::parse_u64(f[4]), std::string(f[5]), text::parse_double(f[6])});
    } catch (const std::exception& e) {
      throw StorageError("bad CSV row '" + std::string(line) + "': " + e.what());
    }
  }
  if (header) throw StorageError("CSV is empty");
  return rows;
}

std::string summary_table(const std::vector<MetricsRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::size_t, std::uint64_t, std::string>;
  std::map<Key, std::vector<double>> cells;
  for (const auto& r : rows) cells[{r.strategy, r.workload, r.nodes, r.input_bytes, r.metric}].push_back(r.value);

  std::vector<std::vector<std::string>> table{{"strategy", "workload", "nodes", "input_bytes", "metric", "n", "mean",
                                               "stddev"}};
  for (const auto& [key, values] : cells) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    const auto& [s, w, nodes, input, metric] = key;
    table.push_back({s, w, std::to_string(nodes), std::to_string(input), metric, std::to_string(values.size()),
                     text::format_double(mean), text::format_double(sd)});
  }

  std::vector<std::size_t> width(table.front().size(), 0);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : table) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) line += "  ";
      line += row[c];
      if (c + 1 < row.size()) line.append(width[c] - row[c].size(), ' ');
    }
    out += line + '\n';
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot write " + path.string());
  out << content;
  if (!out) throw StorageError("failed writing " + path.string());
}

}  // namespace

void emit_report(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  if (rows.empty()) throw Error("no metric rows to report");
  write_file(path, rows_to_csv(rows));
  write_file(path.string() + ".summary.txt", summary_table(rows));
}

std::vector<MetricsRow> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return rows_from_csv(ss.str());
}

}  // namespace strag
