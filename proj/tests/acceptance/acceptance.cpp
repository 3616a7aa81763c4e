// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when a
// criterion's outcome differs from the expectation listed in kExpectedFail.
//
// usage: acceptance <path to stragsim> <scratch directory>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "scenarios.hpp"
#include "strag/bench.hpp"
#include "strag/cluster_sim.hpp"
#include "strag/history.hpp"
#include "strag/kmeans.hpp"
#include "strag/mlp.hpp"
#include "strag/progress.hpp"
#include "strag/rng.hpp"
#include "strag/strategies.hpp"

using namespace strag;
namespace fs = std::filesystem;

namespace {

// Criterion 6 cannot hold together with criterion 7; see the README.
const std::set<int> kExpectedFail{6};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Formula oracles

Outcome formula_oracles() {
  Rng rng(101);
  const int cases = 200;
  double worst = 0.0;
  std::size_t checked = 0;
  auto track = [&](double got, long double want) {
    worst = std::max(worst, static_cast<double>(std::fabs(static_cast<long double>(got) - want)));
    ++checked;
  };

  for (int i = 0; i < cases; ++i) {
    // map_progress: pairs processed over pairs total.
    const std::uint64_t na = 1 + rng.below(1000000);
    const std::uint64_t nf = rng.below(na + 1);
    TaskSnapshot s;
    s.phase = Phase::Map;
    s.current_stage = Stage::MapCopy;
    s.processed_pairs = nf;
    s.total_pairs = na;
    track(map_progress(s), static_cast<long double>(nf) / na);

    // reduce_progress_naive: one third per completed stage plus a third of the current one.
    const std::size_t k = rng.below(3);
    track(reduce_progress_naive(k, nf, na), (static_cast<long double>(k) + static_cast<long double>(nf) / na) / 3);

    // weighted_reduce_progress: full weights of earlier stages plus the current stage's share.
    long double w[3] = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
    const long double wsum = w[0] + w[1] + w[2];
    StageWeights sw;
    sw.r1 = static_cast<double>(w[0] / wsum);
    sw.r2 = static_cast<double>(w[1] / wsum);
    sw.r3 = 1.0 - sw.r1 - sw.r2;
    const long double ws[3] = {sw.r1, sw.r2, sw.r3};
    const double subps = rng.uniform01();
    long double want = 0;
    for (std::size_t j = 0; j < k; ++j) want += ws[j];
    want += ws[k] * subps;
    track(weighted_reduce_progress(sw, stage_at(Phase::Reduce, k), subps), want);

    // progress_rate and time_to_end.
    const double p = rng.uniform01();
    const double t = rng.uniform(0.1, 500);
    track(progress_rate(p, t), static_cast<long double>(p) / t);
    const double pr = rng.uniform(0.001, 1.0);
    track(time_to_end(p, pr), (1.0L - p) / pr);
    track(time_to_end(1.0, pr), 0.0L);
    if (!std::isinf(time_to_end(std::min(p, 0.999), 0.0))) return {false, "stalled task did not give +inf"};

    // Averages and mean squared error over random lists.
    const std::size_t n = 1 + rng.below(50);
    std::vector<double> a(n), b(n);
    long double sa = 0, sq = 0;
    for (std::size_t j = 0; j < n; ++j) {
      a[j] = rng.uniform01();
      b[j] = rng.uniform01();
      sa += a[j];
      sq += (static_cast<long double>(a[j]) - b[j]) * (static_cast<long double>(a[j]) - b[j]);
    }
    track(average_progress(a), sa / n);
    track(average_rate(a), sa / n);
    track(average_tte(a), sa / n);
    track(mse_error(a, b), sq / n);
  }
  const bool pass = worst <= 1e-9;
  return {pass, std::to_string(checked) + " cases, max abs error " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 2. Gradient check

double half_sse(const MlpModel& m, const std::vector<Sample>& data) {
  double total = 0.0;
  for (const auto& s : data) {
    const auto y = mlp_forward(m, s.features);
    for (std::size_t i = 0; i < y.size(); ++i) total += (y[i] - s.targets[i]) * (y[i] - s.targets[i]);
  }
  return 0.5 * total / static_cast<double>(data.size());
}

Outcome gradient_check() {
  Rng rng(202);
  std::vector<Sample> data(16);
  for (auto& s : data) {
    s.features = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
    s.targets = {rng.uniform01(), rng.uniform01()};
  }
  const double h = 1e-5;
  double worst = 0.0;
  for (int point = 0; point < 10; ++point) {
    MlpModel m = mlp_init(std::vector<std::size_t>{3, 8, 2}, derive_seed(202, {static_cast<std::uint64_t>(point)}));
    const MlpGradient g = mlp_gradient(m, data);
    double num2 = 0.0, diff2 = 0.0;
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
      for (int kind = 0; kind < 2; ++kind) {
        auto& params = kind == 0 ? m.weights[l] : m.biases[l];
        const auto& grads = kind == 0 ? g.weights[l] : g.biases[l];
        for (std::size_t i = 0; i < params.size(); ++i) {
          const double saved = params[i];
          params[i] = saved + h;
          const double up = half_sse(m, data);
          params[i] = saved - h;
          const double down = half_sse(m, data);
          params[i] = saved;
          const double numeric = (up - down) / (2 * h);
          num2 += numeric * numeric;
          diff2 += (numeric - grads[i]) * (numeric - grads[i]);
        }
      }
    }
    worst = std::max(worst, std::sqrt(diff2 / num2));
  }
  return {worst < 1e-4, "10 points on [3,8,2], max relative error " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 3. k-means

double brute_inertia(const PointSet& points, const PointSet& centroids) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < points.dim; ++j) {
        const double diff = points.row(i)[j] - centroids.row(c)[j];
        d += diff * diff;
      }
      best = std::min(best, d);
    }
    total += best;
  }
  return total;
}

Outcome kmeans_checks() {
  Rng rng(303);
  std::size_t iterations = 0;
  for (int ds = 0; ds < 100; ++ds) {
    const std::size_t n = 10 + rng.below(290), dim = 1 + rng.below(4), k = 1 + rng.below(10);
    PointSet pts(dim);
    std::vector<double> row(dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : row) v = rng.uniform(-10, 10);
      pts.push_back(row);
    }
    const std::uint64_t seed = rng.below(UINT64_MAX);
    const auto m = kmeans_fit(pts, k, seed);
    iterations += m.iterations;
    for (std::size_t i = 1; i < m.inertia_trace.size(); ++i) {
      if (m.inertia_trace[i] > m.inertia_trace[i - 1]) {
        return {false, "dataset " + std::to_string(ds) + ": inertia rose at iteration " + std::to_string(i)};
      }
    }
    // Recompute the trace: a fit stopped after i updates holds the centroids
    // whose inertia the full run records at step i.
    for (std::size_t i = 1; i < m.inertia_trace.size(); ++i) {
      const auto partial = kmeans_fit(pts, k, seed, i);
      const double want = brute_inertia(pts, partial.centroids);
      if (std::abs(want - m.inertia_trace[i]) > 1e-9 * std::max(1.0, want)) {
        return {false, "dataset " + std::to_string(ds) + ": trace disagrees with recomputed inertia"};
      }
    }
    if (kmeans_fit(pts, k, seed).centroids != m.centroids) return {false, "refit with the same seed differs"};
  }

  // Separated two-cluster fixtures are recovered exactly.
  for (int fx = 0; fx < 20; ++fx) {
    const std::size_t dim = 1 + rng.below(3);
    std::vector<std::vector<double>> rows;
    std::vector<double> mean[2] = {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
    std::size_t counts[2] = {5 + rng.below(40), 5 + rng.below(40)};
    for (int c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < counts[c]; ++i) {
        std::vector<double> p(dim);
        for (std::size_t j = 0; j < dim; ++j) {
          p[j] = c * 1000.0 + rng.uniform(-1, 1);
          mean[c][j] += p[j] / static_cast<double>(counts[c]);
        }
        rows.push_back(p);
      }
    }
    const auto m = kmeans_fit(PointSet::from_rows(rows), 2, rng.below(UINT64_MAX));
    if (m.centroids.size() != 2) return {false, "two-cluster fixture lost a centroid"};
    auto c0 = m.centroid(0), c1 = m.centroid(1);
    if (c0[0] > c1[0]) std::swap(c0, c1);
    for (std::size_t j = 0; j < dim; ++j) {
      if (std::abs(c0[j] - mean[0][j]) > 1e-9 || std::abs(c1[j] - mean[1][j]) > 1e-9) {
        return {false, "two-cluster fixture " + std::to_string(fx) + " not recovered"};
      }
    }
  }

  // Equidistant points go to the lower index.
  KmeansModel tie;
  tie.k = 3;
  tie.centroids = PointSet::from_rows({{0, 0}, {2, 0}, {1, 1}});
  const std::vector<double> mid{1, 0};
  if (kmeans_nearest(tie, mid) != 0) return {false, "tie not broken toward the lower index"};
  tie.centroids = PointSet::from_rows({{2, 0}, {0, 0}});
  if (kmeans_nearest(tie, mid) != 0) return {false, "tie not broken toward the lower index"};

  return {true, "100 random datasets (" + std::to_string(iterations) +
                    " iterations) monotone and recomputed; 20 two-cluster fixtures exact; ties to lower index"};
}

// ---------------------------------------------------------------------------
// 4. Simulator determinism

ClusterConfig random_cluster(Rng& rng) {
  ClusterConfig c;
  const std::size_t n = 2 + rng.below(5);
  c.nodes = uniform_nodes(n, 1 + rng.below(3));
  for (auto& node : c.nodes) {
    for (double& s : node.speed) s = rng.uniform(0.4, 1.6);
  }
  c.workload = rng.below(2) ? Workload::SortLike : Workload::WordCountLike;
  c.input_bytes = (128ULL << 20) * (1 + rng.below(16)) + rng.below(1ULL << 26);
  c.noise = rng.uniform(0.0, 0.3);
  c.straggler = {rng.uniform(0.2, 0.5), rng.uniform(0.2, 0.5), rng.below(UINT64_MAX)};
  c.seed = rng.below(UINT64_MAX);
  c.reduce_tasks = rng.below(2) ? 0 : 1 + rng.below(8);
  return c;
}

std::shared_ptr<const Knowledge> warm_knowledge(const ClusterConfig& c, std::size_t jobs) {
  HistoryStore h;
  run_warmup(c, jobs, h);
  return std::make_shared<const Knowledge>(build_knowledge(h, LearnerConfig{}));
}

Outcome simulator_determinism() {
  Rng rng(404);
  std::size_t events = 0;
  for (int i = 0; i < 20; ++i) {
    ClusterConfig c = random_cluster(rng);
    const StrategyKind kind = kAllStrategies[static_cast<std::size_t>(i) % std::size(kAllStrategies)];
    StrategyParams params;
    params.min_elapsed = 10.0;
    const auto knowledge = warm_knowledge(c, 2);
    const auto st = make_strategy(kind, params, knowledge);
    SimOptions opt;
    opt.trace_events = true;
    const SimResult a = run_simulation(c, *st, nullptr, opt);
    const SimResult b = run_simulation(c, *st, nullptr, opt);
    if (!(a == b)) return {false, "configuration " + std::to_string(i) + " (" + std::string(to_string(kind)) + ") differs"};
    events += a.events.size();
  }
  return {true, "20 configurations, " + std::to_string(events) + " events identical on rerun"};
}

// ---------------------------------------------------------------------------
// 5. Analytic makespan

Outcome analytic_makespan() {
  struct Case {
    Workload w;
    std::uint64_t bytes;
  };
  const std::uint64_t block = kDefaultBlockSize;
  const std::vector<Case> cases{{Workload::WordCountLike, block},      {Workload::SortLike, block},
                                {Workload::WordCountLike, 8 * block},  {Workload::SortLike, 3 * block},
                                {Workload::SortLike, 2 * block + 12345}, {Workload::WordCountLike, block / 2}};
  const auto none = make_strategy(StrategyKind::NoSpeculate, {}, nullptr);
  double worst = 0.0;
  for (const auto& cs : cases) {
    ClusterConfig c;
    c.nodes = uniform_nodes(1);
    c.workload = cs.w;
    c.input_bytes = cs.bytes;
    c.noise = 0.0;
    const auto p = base_profile(cs.w);
    // Maps run back to back on the single container, then the one reduce.
    double expected = 0.0;
    for (std::uint64_t left = cs.bytes; left > 0;) {
      const std::uint64_t part = std::min(left, block);
      expected += (p[0] + p[1]) * static_cast<double>(part) / static_cast<double>(block);
      left -= part;
    }
    expected += (p[2] + p[3] + p[4]) * static_cast<double>(cs.bytes) / static_cast<double>(block);
    const double got = run_simulation(c, *none).makespan;
    worst = std::max(worst, std::abs(got - expected));
  }
  return {worst < 1e-6, std::to_string(cases.size()) + " serial cases, max deviation " + fmt(worst) + " s"};
}

// ---------------------------------------------------------------------------
// 6. Cap invariants

Outcome cap_invariants() {
  Rng rng(606);
  const StrategyKind capped[] = {StrategyKind::Late, StrategyKind::Esamr, StrategyKind::Nn};
  std::size_t instants = 0, literal_violations = 0, total_base_violations = 0, decisions = 0;
  std::size_t samr_instants = 0, samr_violations = 0, samr_decisions = 0;
  for (int run = 0; run < 50; ++run) {
    ClusterConfig c = random_cluster(rng);
    StrategyParams params;
    params.min_elapsed = std::vector<double>{0.0, 10.0, 30.0}[rng.below(3)];
    const auto knowledge = warm_knowledge(c, 3);
    for (StrategyKind kind : capped) {
      const auto r = run_simulation(c, *make_strategy(kind, params, knowledge));
      decisions += r.decisions.size();
      for (const auto& s : r.cap_trace) {
        if (s.running_backups > speculative_cap(params.speculative_cap, s.total_tasks)) ++total_base_violations;
        if (s.launched == 0) continue;
        ++instants;
        const std::size_t running = s.running_originals + s.running_backups;
        if (s.running_backups > speculative_cap(params.speculative_cap, running)) ++literal_violations;
      }
    }
    const auto r = run_simulation(c, *make_strategy(StrategyKind::Samr, params, knowledge));
    samr_decisions += r.decisions.size();
    for (const auto& s : r.cap_trace) {
      if (s.launched == 0) continue;
      ++samr_instants;
      if (!(static_cast<double>(s.running_backups) < params.bp * static_cast<double>(s.running_originals))) {
        ++samr_violations;
      }
    }
  }
  const bool pass = literal_violations == 0 && samr_violations == 0 && instants > 0 && samr_instants > 0;
  return {pass, "late/esamr/nn: " + std::to_string(decisions) + " backups at " + std::to_string(instants) +
                    " decision instants, " + std::to_string(literal_violations) +
                    " exceed floor(0.10*running); implemented cap floor(0.10*total tasks) exceeded " +
                    std::to_string(total_base_violations) + " times at any tick | samr: " +
                    std::to_string(samr_decisions) + " backups, " + std::to_string(samr_violations) + "/" +
                    std::to_string(samr_instants) + " instants with BackupNum >= 0.2*TaskNum"};
}

// ---------------------------------------------------------------------------
// 7. Straggler efficacy

Outcome straggler_efficacy() {
  const auto rows = run_experiment(scenarios::straggler_makespan());
  const double none = scenarios::mean_metric(rows, "none", "makespan_s");
  const double late = scenarios::mean_metric(rows, "late", "makespan_s");
  const double nn = scenarios::mean_metric(rows, "nn", "makespan_s");
  const bool pass = nn <= late && late <= none && late < 0.95 * none;
  return {pass, "mean makespan over seeds 1-5: nn " + fmt(nn) + " s, late " + fmt(late) + " s, none " + fmt(none) +
                    " s (late/none " + fmt(late / none) + ")"};
}

// ---------------------------------------------------------------------------
// 8. Estimation ordering

Outcome estimation_ordering() {
  const auto tte = run_experiment(scenarios::two_regime_estimation(ExperimentKind::Tte));
  const auto weights = run_experiment(scenarios::two_regime_estimation(ExperimentKind::Weights));
  std::vector<double> nn_t, es_t, late_t, nn_w, late_w;
  const double nn = scenarios::mean_metric(tte, "nn", "tte_mae_reduce", &nn_t);
  const double es = scenarios::mean_metric(tte, "esamr", "tte_mae_reduce", &es_t);
  const double la = scenarios::mean_metric(tte, "late", "tte_mae_reduce", &late_t);
  const double nw = scenarios::mean_metric(weights, "nn", "weight_mse", &nn_w);
  const double lw = scenarios::mean_metric(weights, "late", "weight_mse", &late_w);
  bool per_seed = nn_t.size() == scenarios::kSeeds && nn_w.size() == scenarios::kSeeds;
  for (std::size_t i = 0; per_seed && i < nn_t.size(); ++i) {
    per_seed = nn_t[i] < es_t[i] && es_t[i] < late_t[i] && nn_w[i] < late_w[i];
  }
  const bool pass = per_seed && nn < es && es < la && nw < lw;
  return {pass, "reduce tte_mae nn " + fmt(nn) + " < esamr " + fmt(es) + " < late " + fmt(la) + " s; weight_mse nn " +
                    fmt(nw) + " < late " + fmt(lw) + (per_seed ? "; holds at each of seeds 1-5" : "; NOT at every seed")};
}

// ---------------------------------------------------------------------------
// 9. History round-trip

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome history_roundtrip(const fs::path& work) {
  Rng rng(909);
  std::size_t records = 0;
  for (int i = 0; i < 100; ++i) {
    HistoryStore h;
    const std::size_t n = rng.below(120);
    double clock = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const Phase phase = rng.below(2) ? Phase::Reduce : Phase::Map;
      std::vector<double> d(stage_count(phase));
      for (double& v : d) v = rng.uniform(0.001, 500.0);
      clock += rng.uniform(0.0, 10.0);
      h.append(make_record(rng.below(5), r, static_cast<NodeId>(rng.below(8)), phase, 1 + rng.below(1ULL << 34), d,
                           clock));
    }
    records += n;
    const fs::path a = work / "history_a.jsonl", b = work / "history_b.jsonl";
    h.save(a);
    const HistoryStore back = HistoryStore::load(a);
    if (!(back == h) || back.size() != h.size()) return {false, "store " + std::to_string(i) + " changed on load"};
    back.save(b);
    if (slurp(a) != slurp(b)) return {false, "store " + std::to_string(i) + " not byte-stable"};
  }
  return {true, "100 stores, " + std::to_string(records) + " records: identical after load, files byte-stable"};
}

// ---------------------------------------------------------------------------
// 10. CLI reproducibility

Outcome cli_reproducibility(const std::string& stragsim, const fs::path& work) {
  std::vector<std::string> csv;
  for (int i = 0; i < 2; ++i) {
    const fs::path out = work / ("cli_run" + std::to_string(i) + ".csv");
    fs::remove(out);
    const std::string cmd = "\"" + stragsim + "\" experiment sweep --nodes 2,3 --input-size 256M,512M --reps 2 " +
                            "--warmup 3 --workload sort --straggler-fraction 0.34 --straggler-multiplier 0.4 --out \"" +
                            out.string() + "\" > \"" + (work / "cli.log").string() + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "stragsim experiment failed; see " + (work / "cli.log").string()};
    csv.push_back(slurp(out) + slurp(out.string() + ".summary.txt"));
  }
  const auto lines = std::count(csv[0].begin(), csv[0].end(), '\n');
  return {csv[0] == csv[1] && !csv[0].empty(),
          (csv[0] == csv[1] ? "byte-identical reruns (" : "reruns differ (") + std::to_string(lines) + " lines)"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <stragsim> <work dir>\n";
    return 2;
  }
  const std::string stragsim = argv[1];
  const fs::path work = argv[2];
  fs::create_directories(work);

  struct Criterion {
    int id;
    std::string name;
    double budget_s;  // 0: no runtime bound of its own
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "formula oracle suite", 1.0, formula_oracles},
      {2, "gradient check", 5.0, gradient_check},
      {3, "k-means", 5.0, kmeans_checks},
      {4, "simulator determinism", 10.0, simulator_determinism},
      {5, "analytic makespan", 0.0, analytic_makespan},
      {6, "cap invariants", 0.0, cap_invariants},
      {7, "straggler efficacy ordering", 0.0, straggler_efficacy},
      {8, "estimation ordering", 0.0, estimation_ordering},
      {9, "history round-trip", 0.0, [&] { return history_roundtrip(work); }},
      {10, "end-to-end CSV reproducibility", 0.0, [&] { return cli_reproducibility(stragsim, work); }},
  };

  const auto suite_start = std::chrono::steady_clock::now();
  int unexpected = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt(c.budget_s) + " s budget";
    }
    const bool expected_fail = kExpectedFail.contains(c.id);
    if (o.pass == expected_fail) ++unexpected;
    std::printf("%s %2d %-32s %7.2fs  %s%s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), secs, o.detail.c_str(),
                expected_fail ? (o.pass ? "  [expected to fail but passed]" : "  [expected failure, see README]") : "");
    std::fflush(stdout);
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - suite_start).count();
  std::printf("total %.2fs; %d unexpected outcome(s)\n", total, unexpected);
  return unexpected == 0 ? 0 : 1;
}
