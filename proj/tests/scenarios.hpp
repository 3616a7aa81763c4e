#pragma once

// Fixed experiment setups shared by the acceptance suite and the regression
// fixtures. The CLI equivalents are listed in the README.

#include "strag/bench.hpp"

namespace strag::scenarios {

inline constexpr std::uint64_t kFirstSeed = 1;
inline constexpr std::size_t kSeeds = 5;

/// Four unit-speed workers, one slowed to 0.3x, SortLike 1 GiB.
inline ExperimentSpec straggler_makespan() {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::Makespan;
  spec.strategies = {StrategyKind::NoSpeculate, StrategyKind::Late, StrategyKind::Nn};
  spec.node_counts = {4};
  spec.input_sizes = {1ULL << 30};
  spec.reps = kSeeds;
  spec.base_seed = kFirstSeed;
  spec.cluster.nodes = uniform_nodes(4);
  spec.cluster.workload = Workload::SortLike;
  spec.cluster.straggler = {0.25, 0.3, 0};
  return spec;
}

/// Network-bound and cpu-bound node pairs (configs/two_regime.conf).
inline ClusterConfig two_regime_cluster() {
  ClusterConfig c;
  c.nodes = uniform_nodes(4);
  for (NodeId n : {0, 1}) c.nodes[n].speed = {0.5, 1.5, 0.4, 1.5, 1.5};
  for (NodeId n : {2, 3}) c.nodes[n].speed = {1.5, 0.5, 1.5, 0.4, 0.4};
  c.workload = Workload::SortLike;
  c.reduce_tasks = 8;
  return c;
}

inline ExperimentSpec two_regime_estimation(ExperimentKind kind) {
  ExperimentSpec spec;
  spec.kind = kind;
  spec.strategies = {StrategyKind::Late, StrategyKind::Esamr, StrategyKind::Nn};
  spec.node_counts = {4};
  spec.input_sizes = {1ULL << 30};
  spec.reps = kSeeds;
  spec.base_seed = kFirstSeed;
  spec.cluster = two_regime_cluster();
  return spec;
}

/// Mean of `metric` for `strategy` over all rows; per-seed values in `per_seed`.
inline double mean_metric(const std::vector<MetricsRow>& rows, std::string_view strategy, std::string_view metric,
                          std::vector<double>* per_seed = nullptr) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.strategy != strategy || r.metric != metric) continue;
    sum += r.value;
    ++n;
    if (per_seed) per_seed->push_back(r.value);
  }
  if (n == 0) throw Error("no rows for " + std::string(strategy) + " " + std::string(metric));
  return sum / static_cast<double>(n);
}

}  // namespace strag::scenarios
