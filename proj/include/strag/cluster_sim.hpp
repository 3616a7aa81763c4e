#pragma once

// Discrete-event simulator of one MapReduce job on a heterogeneous cluster.
// Tasks run copy/combine (map) or shuffle/sort/reduce (reduce) stages whose
// durations are drawn when an attempt starts; a strategy is consulted every
// tick and may launch backup attempts.

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string_view>
#include <vector>

#include "strag/history.hpp"
#include "strag/rng.hpp"
#include "strag/strategies.hpp"
#include "strag/task_model.hpp"

namespace strag {

enum class Workload : std::uint8_t { WordCountLike, SortLike };

std::string_view to_string(Workload w);
Workload parse_workload(std::string_view name);

/// Seconds per block for each stage on a node of speed 1.
std::array<double, kStageCount> base_profile(Workload w);

inline constexpr std::uint64_t kDefaultBlockSize = 128ULL << 20;
inline constexpr std::uint64_t kPairsPerBlock = 10000;

struct StragglerSpec {
  double fraction = 0.0;    // share of nodes slowed down
  double multiplier = 1.0;  // applied to every stage speed of a slowed node
  std::uint64_t seed = 0;   // picks the slowed nodes, independent of run noise

  bool operator==(const StragglerSpec&) const = default;
};

struct ClusterConfig {
  std::vector<NodeSpec> nodes;
  std::uint64_t block_size = kDefaultBlockSize;
  Workload workload = Workload::WordCountLike;
  std::uint64_t input_bytes = 1ULL << 30;
  double noise = 0.1;
  StragglerSpec straggler;
  std::uint64_t seed = 1;
  std::size_t reduce_tasks = 0;  // 0: one per node
  double tick = 1.0;             // seconds between strategy evaluations
  JobId job_id = 0;
  double start_clock = 0.0;

  void validate() const;
  std::size_t reduce_task_count() const { return reduce_tasks == 0 ? nodes.size() : reduce_tasks; }

  bool operator==(const ClusterConfig&) const = default;
};

/// `count` identical nodes with unit speeds.
std::vector<NodeSpec> uniform_nodes(std::size_t count, std::size_t containers = 1);

/// Applies key=value lines ('#' starts a comment) on top of `base`.
/// Keys: nodes, containers, node.<i>.speed (five comma-separated values),
/// node.<i>.containers, block_size, workload, input_size, noise,
/// straggler_fraction, straggler_multiplier, straggler_seed, seed,
/// reduce_tasks, tick.
ClusterConfig parse_cluster_config(std::string_view text, ClusterConfig base = {});
ClusterConfig load_cluster_config(const std::filesystem::path& path, ClusterConfig base = {});

/// ceil(input_bytes / block_size).
std::size_t split_job(std::uint64_t input_bytes, std::uint64_t block_size);

/// base · (bytes / block) / speed · (1 + u), u uniform in [-noise, noise].
/// One draw is consumed even when noise is zero.
double stage_duration(Workload workload, Stage stage, std::uint64_t task_input_bytes, const NodeSpec& node,
                      Rng& rng, double noise = 0.1, std::uint64_t block_size = kDefaultBlockSize);

/// Nodes slowed by the straggler spec: llround(fraction · n) of them.
std::set<NodeId> straggler_nodes(const ClusterConfig& config);

/// Node specs after straggler injection.
std::vector<NodeSpec> effective_nodes(const ClusterConfig& config);

enum class SimEventKind : std::uint8_t {
  TaskStageComplete = 0,
  StrategyTick = 1,
  TaskLaunch = 2,
  BackupLaunch = 3,
  TaskCancel = 4,
  JobComplete = 5,
};

struct SimEvent {
  double time = 0.0;
  SimEventKind kind = SimEventKind::StrategyTick;
  TaskId task_id = 0;
  std::uint32_t attempt = 0;
  std::uint64_t seq = 0;

  bool operator==(const SimEvent&) const = default;
};

/// An estimate made at `clock` together with what actually happened.
struct EstimateLog {
  StrategyKind strategy = StrategyKind::NoSpeculate;
  bool observer = false;  // from an observing strategy rather than the acting one
  double clock = 0.0;
  TaskEstimate estimate;
  double realized_remaining = 0.0;  // task finish clock - clock

  bool operator==(const EstimateLog&) const = default;
};

/// Backup accounting at one decision instant, after its launches.
struct CapSample {
  double clock = 0.0;
  std::size_t running_originals = 0;
  std::size_t running_backups = 0;
  std::size_t total_tasks = 0;
  std::size_t launched = 0;  // backups started at this instant

  bool operator==(const CapSample&) const = default;
};

struct TaskTiming {
  TaskId task_id = 0;
  Phase phase = Phase::Map;
  NodeId node_id = 0;  // node of the winning attempt
  double started = 0.0;
  double finished = 0.0;
  bool backup_won = false;

  bool operator==(const TaskTiming&) const = default;
};

struct SimResult {
  double makespan = 0.0;
  std::vector<ExecutionRecord> records;  // this job's tasks in finish order
  std::vector<TaskTiming> tasks;         // indexed by task id
  std::vector<EstimateLog> estimates;
  std::vector<SpeculationDecision> decisions;
  std::vector<CapSample> cap_trace;
  std::vector<SimEvent> events;  // processed events, when tracing
  double cancelled_work = 0.0;   // seconds spent by attempts that lost
  std::size_t launched_attempts = 0;

  bool operator==(const SimResult&) const = default;
};

struct SimOptions {
  std::vector<const Strategy*> observers;  // estimate at every tick, never act
  double observe_min_elapsed = 0.0;
  bool log_estimates = true;  // estimates of the acting strategy
  bool trace_events = false;
};

/// Running attempts at `clock`: stage, pairs processed so far, elapsed time.
/// Exposed for tests; the simulator builds these at every tick.
struct AttemptView {
  TaskId task_id = 0;
  Phase phase = Phase::Map;
  std::uint64_t input_bytes = 0;
  std::uint64_t total_pairs = 1;
  NodeId node_id = 0;
  bool is_backup = false;
  std::uint32_t attempt = 0;
  double start = 0.0;
  std::vector<double> durations;
};

TaskSnapshot snapshot_attempt(const AttemptView& attempt, JobId job, double clock);
std::vector<TaskSnapshot> snapshot_tasks(std::span<const AttemptView> running, JobId job, double clock);

/// Pairs per task: kPairsPerBlock per block, proportional to bytes, at least 1.
std::uint64_t pairs_for(std::uint64_t input_bytes, std::uint64_t block_size);

/// Runs the job to completion. Completed tasks are appended to `history`
/// when one is given.
SimResult run_simulation(const ClusterConfig& config, const Strategy& strategy, HistoryStore* history = nullptr,
                         const SimOptions& options = {});

}  // namespace strag
