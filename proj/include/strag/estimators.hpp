#pragma once

// Models learned from the history store: per-node neural networks for
// reduce stage weights and map time-to-end, and k-means clusters of
// realized weights.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "strag/history.hpp"
#include "strag/kmeans.hpp"
#include "strag/mlp.hpp"
#include "strag/task_model.hpp"

namespace strag {

/// Where a task is inside its phase: stage index and fraction of that stage.
struct StagePosition {
  std::size_t index = 0;
  double fraction = 0.0;
};

/// Position after `elapsed` seconds of a task with the given stage durations.
StagePosition position_at(std::span<const double> durations, double elapsed);

/// Per-node normalisation constants, taken as historical maxima.
struct NodeScale {
  double max_map_bytes = 0.0;
  double max_reduce_bytes = 0.0;
  double max_map_time = 0.0;

  bool operator==(const NodeScale&) const = default;
};

NodeScale scale_from_records(std::span<const ExecutionRecord> map_records,
                             std::span<const ExecutionRecord> reduce_records);

/// (Subps, normalised N_f, normalised input bytes), each clamped to [0,1].
std::vector<double> reduce_weight_features(double subps, std::uint64_t input_bytes, const NodeScale& scale);

/// (map-phase Subps, normalised map-phase N_f). The map phase is treated as
/// one stage: copy covers the first half of its pairs, combine the second.
std::vector<double> map_tte_features(std::size_t stage_index, double subps, std::uint64_t input_bytes,
                                     const NodeScale& scale);

struct LearnerConfig {
  TrainConfig train;
  std::vector<std::size_t> hidden{8};
  std::size_t samples_per_record = 10;
  std::size_t k = 10;
  std::uint64_t kmeans_seed = 1;
  std::size_t kmeans_max_iter = 100;
};

std::vector<Sample> reduce_weight_samples(std::span<const ExecutionRecord> records, const NodeScale& scale,
                                          std::size_t per_record);
std::vector<Sample> map_tte_samples(std::span<const ExecutionRecord> records, const NodeScale& scale,
                                    std::size_t per_record);

struct NnModels {
  std::map<NodeId, MlpModel> reduce_weights;
  std::map<NodeId, MlpModel> map_tte;
  std::optional<MlpModel> pooled_reduce_weights;
  std::optional<MlpModel> pooled_map_tte;
  std::map<NodeId, NodeScale> scale;
  NodeScale pooled_scale;

  bool empty() const { return !pooled_reduce_weights && !pooled_map_tte; }

  /// Model for `node`, falling back to the pooled one; nullptr when neither exists.
  const MlpModel* reduce_model(NodeId node) const;
  const MlpModel* map_model(NodeId node) const;
  const NodeScale& scale_for(NodeId node) const;

  /// Throws ConfigError when a model's shape does not fit its feature vector.
  void validate() const;
};

/// One model per node with records plus a pooled model over every node.
NnModels train_nn_models(const HistoryStore& history, const LearnerConfig& config);

/// Writes one "mlp v1" file per model into `dir`.
void save_nn_models(const NnModels& models, const std::filesystem::path& dir);
/// Reads models from `dir`; scales are recomputed from `history`.
NnModels load_nn_models(const std::filesystem::path& dir, const HistoryStore& history);

struct WeightClusters {
  std::optional<KmeansModel> map;
  std::optional<KmeansModel> reduce;

  const std::optional<KmeansModel>& for_phase(Phase p) const { return p == Phase::Map ? map : reduce; }
};

WeightClusters fit_weight_clusters(const HistoryStore& history, std::size_t k, std::uint64_t seed,
                                   std::size_t max_iter);

void save_kmeans(std::ostream& out, const KmeansModel& model);

/// Everything a strategy may consult besides the live cluster state.
struct Knowledge {
  HistoryStore history;
  NnModels nn;
  WeightClusters clusters;
};

struct KnowledgeNeeds {
  bool nn = true;
  bool clusters = true;
};

Knowledge build_knowledge(const HistoryStore& history, const LearnerConfig& config, KnowledgeNeeds needs = {});

}  // namespace strag
