#pragma once

// Speculative-execution strategies. Each one turns a snapshot of the running
// attempts into per-task estimates and a list of backup launches.

#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "strag/estimators.hpp"
#include "strag/progress.hpp"
#include "strag/task_model.hpp"

namespace strag {

enum class StrategyKind : std::uint8_t { NoSpeculate, Naive, Late, Samr, Esamr, Nn };

inline constexpr StrategyKind kAllStrategies[] = {StrategyKind::NoSpeculate, StrategyKind::Naive,
                                                  StrategyKind::Late,        StrategyKind::Samr,
                                                  StrategyKind::Esamr,       StrategyKind::Nn};

/// CLI names: none, naive, late, samr, esamr, nn.
std::string_view to_string(StrategyKind k);
StrategyKind parse_strategy(std::string_view name);

struct StrategyParams {
  double speculative_cap = 0.10;  // of the job's total task count
  double bp = 0.2;                // SAMR: BackupNum < bp * TaskNum
  double stt = 0.4;               // SAMR slow-task time threshold
  double stac = 0.2;              // SAMR slow-task rate threshold
  std::size_t k = 10;             // ESAMR clusters
  double min_elapsed = 60.0;      // seconds before a task may be judged
  double esamr_completion_fraction = 0.20;
  double naive_margin = 0.20;        // straggler when P_s < (1 - margin) * average
  double slow_node_fraction = 0.25;  // bottom share of nodes never used as targets

  void validate() const;
};

struct SpeculationDecision {
  TaskId task_id = 0;
  NodeId original_node = 0;
  NodeId target_node = 0;
  double estimated_tte = 0.0;
  double clock = 0.0;

  bool operator==(const SpeculationDecision&) const = default;
};

struct NodeState {
  NodeSpec spec;
  std::size_t free_containers = 0;
};

/// What a strategy may know about the job being executed.
struct JobView {
  JobId job_id = 0;
  std::size_t map_tasks = 0;
  std::size_t reduce_tasks = 0;
  std::span<const ExecutionRecord> completed;  // this job's finished tasks, in finish order

  std::size_t total_tasks() const { return map_tasks + reduce_tasks; }
  std::size_t phase_tasks(Phase p) const { return p == Phase::Map ? map_tasks : reduce_tasks; }
};

struct EvaluationContext {
  double clock = 0.0;
  std::span<const TaskSnapshot> snapshots;  // every running attempt, backups included
  std::span<const NodeState> nodes;
  JobView job;
  std::size_t running_backups = 0;
};

struct TaskEstimate {
  TaskId task_id = 0;
  NodeId node_id = 0;
  Phase phase = Phase::Map;
  StageWeights weights;
  double progress = 0.0;
  double rate = 0.0;
  double tte = 0.0;
  double elapsed = 0.0;

  bool operator==(const TaskEstimate&) const = default;
};

struct Evaluation {
  std::vector<SpeculationDecision> decisions;
  std::vector<TaskId> dropped;  // chosen as stragglers but no node could take a backup
  std::vector<TaskEstimate> estimates;
};

class Strategy {
 public:
  Strategy(StrategyParams params, std::shared_ptr<const Knowledge> knowledge);
  virtual ~Strategy() = default;

  virtual StrategyKind kind() const = 0;

  /// Estimate for one running attempt; nullopt when the strategy makes none
  /// or the attempt has not run long enough to have a rate.
  virtual std::optional<TaskEstimate> estimate(const TaskSnapshot& snapshot,
                                               const EvaluationContext& ctx) const = 0;

  virtual Evaluation evaluate(const EvaluationContext& ctx) const = 0;

  const StrategyParams& params() const { return params_; }
  const Knowledge& knowledge() const { return *knowledge_; }

  /// Estimates for every running original attempt with elapsed > 0.
  std::vector<TaskEstimate> estimate_all(const EvaluationContext& ctx) const;

 protected:
  StrategyParams params_;
  std::shared_ptr<const Knowledge> knowledge_;
};

std::unique_ptr<Strategy> make_strategy(StrategyKind kind, const StrategyParams& params,
                                        std::shared_ptr<const Knowledge> knowledge);

/// Estimate from fixed weights: P_s by stage weights, Pr = P_s / t, TTE by (1 - P_s) / Pr.
std::optional<TaskEstimate> weighted_estimate(const TaskSnapshot& snapshot, const StageWeights& weights);

/// Weights each strategy uses for a task; exposed for the weight experiments.
StageWeights samr_weights(const Knowledge& knowledge, const JobView& job, NodeId node);
StageWeights esamr_weights(const Knowledge& knowledge, const JobView& job, NodeId node, Phase phase,
                           const StrategyParams& params);
/// NN reduce weights predicted from the snapshot's features; map weights are
/// derived from the map time-to-end model. nullopt without a usable model.
std::optional<StageWeights> nn_weights(const NnModels& models, const TaskSnapshot& snapshot);
/// Remaining time predicted by the map time-to-end model.
std::optional<double> nn_map_tte(const NnModels& models, const TaskSnapshot& snapshot);

/// Naive straggler test: P_s below (1 - margin) times the phase average.
std::vector<TaskId> naive_detect(std::span<const TaskSnapshot> snapshots, const StrategyParams& params);

Evaluation late_detect(const EvaluationContext& ctx, const StrategyParams& params);
Evaluation samr_detect(const EvaluationContext& ctx, const Knowledge& knowledge, const StrategyParams& params);
Evaluation esamr_detect(const EvaluationContext& ctx, const Knowledge& knowledge, const StrategyParams& params);
Evaluation nn_detect(const EvaluationContext& ctx, const Knowledge& knowledge, const StrategyParams& params);

/// Bottom `fraction` of nodes ranked by the mean progress rate of their
/// tasks (ties by node id); nodes without estimates rank as fastest.
std::set<NodeId> slow_nodes(std::span<const TaskEstimate> estimates, std::span<const NodeState> nodes,
                            double fraction);

/// Fastest non-slow node other than `original` with a free container;
/// throws NoTargetError when there is none.
NodeId select_backup_node(std::span<const NodeState> nodes, const std::set<NodeId>& slow, NodeId original);

/// floor(cap * total_tasks), guarding against representation error.
std::size_t speculative_cap(double cap, std::size_t total_tasks);

}  // namespace strag
