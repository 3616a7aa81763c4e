#pragma once

// Experiment runner: warm-up jobs fill a history store, learners are fitted
// on it, and the strategies are compared on weight error, time-to-end error
// and makespan. Results are flat metric rows written as CSV.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "strag/cluster_sim.hpp"
#include "strag/estimators.hpp"
#include "strag/strategies.hpp"

namespace strag {

enum class ExperimentKind : std::uint8_t { Weights, Tte, Makespan, Sweep };

std::string_view to_string(ExperimentKind k);
ExperimentKind parse_experiment(std::string_view name);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Sweep;
  std::vector<StrategyKind> strategies{std::begin(kAllStrategies), std::end(kAllStrategies)};
  std::vector<std::size_t> node_counts{2, 3, 4};
  std::vector<std::uint64_t> input_sizes{256ULL << 20, 1ULL << 30, 4ULL << 30};
  std::size_t reps = 5;
  std::uint64_t base_seed = 1;  // repetition r runs with seed base_seed + r
  std::size_t warmup_jobs = 10;
  std::size_t sampled_tasks = 20;        // per phase, for the time-to-end experiment
  double observe_min_elapsed = 0.0;      // estimates younger than this are not scored
  ClusterConfig cluster;                 // node list is the capacity for the node sweep
  StrategyParams params;
  LearnerConfig learner;
  std::filesystem::path history;  // optional history to start from

  ExperimentSpec();
  void validate() const;
};

struct MetricsRow {
  std::string strategy;
  std::string workload;
  std::size_t nodes = 0;
  std::uint64_t input_bytes = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

/// Orders rows by every key field, value last.
bool row_less(const MetricsRow& a, const MetricsRow& b);

/// Cluster for one sweep point: the first `nodes` template nodes.
ClusterConfig point_config(const ExperimentSpec& spec, std::size_t nodes, std::uint64_t input_bytes,
                           std::uint64_t seed);

/// Runs `spec.warmup_jobs` non-speculative jobs, appending to `history`.
/// Returns the clock at which the next job may start.
double run_warmup(const ClusterConfig& point, std::size_t jobs, HistoryStore& history);

std::vector<MetricsRow> run_weights_experiment(const ExperimentSpec& spec);
std::vector<MetricsRow> run_tte_experiment(const ExperimentSpec& spec);
std::vector<MetricsRow> run_makespan_experiment(const ExperimentSpec& spec);
/// Dispatches on spec.kind; sweep runs all three.
std::vector<MetricsRow> run_experiment(const ExperimentSpec& spec);

/// (baseline - method) / baseline * 100.
double improvement_pct(double baseline, double method);

/// Evenly spaced picks of min(count, ids.size()) ids.
std::vector<TaskId> sample_tasks(std::span<const TaskId> ids, std::size_t count);

inline constexpr std::string_view kCsvHeader = "strategy,workload,nodes,input_bytes,seed,metric,value";

std::string rows_to_csv(std::vector<MetricsRow> rows);
std::vector<MetricsRow> rows_from_csv(std::string_view text);
/// Mean and sample standard deviation per (strategy, workload, nodes, input, metric).
std::string summary_table(const std::vector<MetricsRow>& rows);

/// Writes `path` (CSV) and `path` + ".summary.txt".
void emit_report(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);
std::vector<MetricsRow> read_rows(const std::filesystem::path& path);

}  // namespace strag
