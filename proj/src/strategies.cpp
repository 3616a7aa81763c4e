#include "strag/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace strag {

std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::NoSpeculate: return "none";
    case StrategyKind::Naive: return "naive";
    case StrategyKind::Late: return "late";
    case StrategyKind::Samr: return "samr";
    case StrategyKind::Esamr: return "esamr";
    case StrategyKind::Nn: return "nn";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  for (StrategyKind k : kAllStrategies) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

void StrategyParams::validate() const {
  auto fraction = [](double v, const char* what) {
    if (!(v > 0.0 && v <= 1.0)) throw ConfigError(std::string(what) + " must lie in (0,1]");
  };
  fraction(speculative_cap, "speculative cap");
  fraction(bp, "Bp");
  fraction(stt, "STT");
  fraction(stac, "STaC");
  fraction(esamr_completion_fraction, "ESAMR completion fraction");
  fraction(naive_margin, "naive margin");
  fraction(slow_node_fraction, "slow node fraction");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(min_elapsed >= 0.0)) throw ConfigError("min elapsed must be non-negative");
}

std::size_t speculative_cap(double cap, std::size_t total_tasks) {
  return static_cast<std::size_t>(std::floor(cap * static_cast<double>(total_tasks) + 1e-9));
}

std::optional<TaskEstimate> weighted_estimate(const TaskSnapshot& snapshot, const StageWeights& weights) {
  if (!(snapshot.elapsed > 0.0)) return std::nullopt;
  const ProgressReport r = progress_report(weights, snapshot);
  TaskEstimate e;
  e.task_id = snapshot.task_id;
  e.node_id = snapshot.node_id;
  e.phase = snapshot.phase;
  e.weights = weights;
  e.progress = r.score;
  e.rate = r.rate;
  e.tte = r.tte;
  e.elapsed = snapshot.elapsed;
  return e;
}

// ---------------------------------------------------------------------------
// Node selection

std::set<NodeId> slow_nodes(std::span<const TaskEstimate> estimates, std::span<const NodeState> nodes,
                            double fraction) {
  std::map<NodeId, std::pair<double, std::size_t>> sums;
  for (const auto& e : estimates) {
    auto& [sum, n] = sums[e.node_id];
    sum += e.rate;
    ++n;
  }
  std::vector<std::pair<double, NodeId>> ranked;
  for (const auto& node : nodes) {
    auto it = sums.find(node.spec.node_id);
    if (it == sums.end()) continue;
    ranked.emplace_back(it->second.first / static_cast<double>(it->second.second), node.spec.node_id);
  }
  std::sort(ranked.begin(), ranked.end());
  const std::size_t count = std::min(
      ranked.size(), static_cast<std::size_t>(std::floor(fraction * static_cast<double>(nodes.size()) + 1e-9)));
  std::set<NodeId> slow;
  for (std::size_t i = 0; i < count; ++i) slow.insert(ranked[i].second);
  return slow;
}

NodeId select_backup_node(std::span<const NodeState> nodes, const std::set<NodeId>& slow, NodeId original) {
  const NodeState* best = nullptr;
  for (const auto& n : nodes) {
    const NodeId id = n.spec.node_id;
    if (id == original || slow.contains(id) || n.free_containers == 0) continue;
    if (best == nullptr || n.spec.mean_speed() > best->spec.mean_speed() ||
        (n.spec.mean_speed() == best->spec.mean_speed() && id < best->spec.node_id)) {
      best = &n;
    }
  }
  if (best == nullptr) throw NoTargetError("no eligible node for a backup attempt");
  return best->spec.node_id;
}

namespace {

std::set<TaskId> backed_up_tasks(std::span<const TaskSnapshot> snapshots) {
  std::set<TaskId> out;
  for (const auto& s : snapshots) {
    if (s.is_backup) out.insert(s.task_id);
  }
  return out;
}

bool later_first(const TaskEstimate& a, const TaskEstimate& b) {
  if (a.tte != b.tte) return a.tte > b.tte;
  return a.task_id < b.task_id;
}

/// Launches backups for `ordered` candidates until `budget` runs out.
void launch(const EvaluationContext& ctx, const std::set<NodeId>& slow, std::span<const TaskEstimate> ordered,
            std::size_t budget, Evaluation& ev) {
  std::vector<NodeState> nodes(ctx.nodes.begin(), ctx.nodes.end());
  for (const auto& c : ordered) {
    if (budget == 0) break;
    try {
      const NodeId target = select_backup_node(nodes, slow, c.node_id);
      for (auto& n : nodes) {
        if (n.spec.node_id == target) --n.free_containers;
      }
      ev.decisions.push_back({c.task_id, c.node_id, target, c.tte, ctx.clock});
      --budget;
    } catch (const NoTargetError&) {
      ev.dropped.push_back(c.task_id);
    }
  }
}

/// LATE-style selection shared by late, esamr and nn: rank judged tasks by
/// time to end and back up the longest ones within the speculative cap.
Evaluation rank_by_tte(const EvaluationContext& ctx, const StrategyParams& params,
                       std::vector<TaskEstimate> estimates) {
  Evaluation ev;
  ev.estimates = std::move(estimates);
  const auto slow = slow_nodes(ev.estimates, ctx.nodes, params.slow_node_fraction);
  const auto backed = backed_up_tasks(ctx.snapshots);

  std::vector<TaskEstimate> candidates;
  for (const auto& e : ev.estimates) {
    if (e.elapsed >= params.min_elapsed && e.tte > 0.0 && !backed.contains(e.task_id)) candidates.push_back(e);
  }
  std::sort(candidates.begin(), candidates.end(), later_first);

  const std::size_t cap = speculative_cap(params.speculative_cap, ctx.job.total_tasks());
  const std::size_t budget = cap > ctx.running_backups ? cap - ctx.running_backups : 0;
  launch(ctx, slow, candidates, budget, ev);
  return ev;
}

// ---------------------------------------------------------------------------
// Strategies

class NoSpeculateStrategy final : public Strategy {
 public:
  using Strategy::Strategy;
  StrategyKind kind() const override { return StrategyKind::NoSpeculate; }
  std::optional<TaskEstimate> estimate(const TaskSnapshot&, const EvaluationContext&) const override {
    return std::nullopt;
  }
  Evaluation evaluate(const EvaluationContext&) const override { return {}; }
};

class NaiveStrategy final : public Strategy {
 public:
  using Strategy::Strategy;
  StrategyKind kind() const override { return StrategyKind::Naive; }
  std::optional<TaskEstimate> estimate(const TaskSnapshot& s, const EvaluationContext&) const override {
    return weighted_estimate(s, StageWeights::naive());
  }
  Evaluation evaluate(const EvaluationContext& ctx) const override {
    Evaluation ev;
    ev.estimates = estimate_all(ctx);
    const auto slow = slow_nodes(ev.estimates, ctx.nodes, params_.slow_node_fraction);
    const auto backed = backed_up_tasks(ctx.snapshots);
    std::vector<TaskEstimate> ordered;
    for (TaskId id : naive_detect(ctx.snapshots, params_)) {
      if (backed.contains(id)) continue;
      for (const auto& s : ctx.snapshots) {
        if (s.task_id == id && !s.is_backup) {
          TaskEstimate e;
          e.task_id = id;
          e.node_id = s.node_id;
          e.phase = s.phase;
          if (auto w = weighted_estimate(s, StageWeights::naive())) e = *w;
          ordered.push_back(e);
        }
      }
    }
    // Every straggler is re-executed; no cap.
    launch(ctx, slow, ordered, std::numeric_limits<std::size_t>::max(), ev);
    return ev;
  }
};

class LateStrategy final : public Strategy {
 public:
  using Strategy::Strategy;
  StrategyKind kind() const override { return StrategyKind::Late; }
  std::optional<TaskEstimate> estimate(const TaskSnapshot& s, const EvaluationContext&) const override {
    return weighted_estimate(s, StageWeights::naive());
  }
  Evaluation evaluate(const EvaluationContext& ctx) const override {
    return rank_by_tte(ctx, params_, estimate_all(ctx));
  }
};

class SamrStrategy final : public Strategy {
 public:
  using Strategy::Strategy;
  StrategyKind kind() const override { return StrategyKind::Samr; }
  std::optional<TaskEstimate> estimate(const TaskSnapshot& s, const EvaluationContext& ctx) const override {
    return weighted_estimate(s, samr_weights(*knowledge_, ctx.job, s.node_id));
  }
  Evaluation evaluate(const EvaluationContext& ctx) const override {
    return samr_detect(ctx, *knowledge_, params_);
  }
};

class EsamrStrategy final : public Strategy {
 public:
  using Strategy::Strategy;
  StrategyKind kind() const override { return StrategyKind::Esamr; }
  std::optional<TaskEstimate> estimate(const TaskSnapshot& s, const EvaluationContext& ctx) const override {
    return weighted_estimate(s, esamr_weights(*knowledge_, ctx.job, s.node_id, s.phase, params_));
  }
  Evaluation evaluate(const EvaluationContext& ctx) const override {
    return rank_by_tte(ctx, params_, estimate_all(ctx));
  }
};

class NnStrategy final : public Strategy {
 public:
  using Strategy::Strategy;
  StrategyKind kind() const override { return StrategyKind::Nn; }
  std::optional<TaskEstimate> estimate(const TaskSnapshot& s, const EvaluationContext&) const override {
    if (!(s.elapsed > 0.0)) return std::nullopt;
    const NnModels& models = knowledge_->nn;
    if (s.phase == Phase::Map) {
      auto tte = nn_map_tte(models, s);
      if (!tte) return weighted_estimate(s, StageWeights::naive());
      TaskEstimate e;
      e.task_id = s.task_id;
      e.node_id = s.node_id;
      e.phase = s.phase;
      e.weights = nn_weights(models, s).value_or(StageWeights::naive());
      e.tte = *tte;
      e.progress = s.elapsed / (s.elapsed + *tte);
      e.rate = progress_rate(e.progress, s.elapsed);
      e.elapsed = s.elapsed;
      return e;
    }
    return weighted_estimate(s, nn_weights(models, s).value_or(StageWeights::naive()));
  }
  Evaluation evaluate(const EvaluationContext& ctx) const override {
    return rank_by_tte(ctx, params_, estimate_all(ctx));
  }
};

}  // namespace

Strategy::Strategy(StrategyParams params, std::shared_ptr<const Knowledge> knowledge)
    : params_(params), knowledge_(std::move(knowledge)) {
  params_.validate();
  if (!knowledge_) knowledge_ = std::make_shared<const Knowledge>();
}

std::vector<TaskEstimate> Strategy::estimate_all(const EvaluationContext& ctx) const {
  std::vector<TaskEstimate> out;
  for (const auto& s : ctx.snapshots) {
    if (s.is_backup) continue;
    if (auto e = estimate(s, ctx)) out.push_back(*e);
  }
  return out;
}

std::unique_ptr<Strategy> make_strategy(StrategyKind kind, const StrategyParams& params,
                                        std::shared_ptr<const Knowledge> knowledge) {
  switch (kind) {
    case StrategyKind::NoSpeculate: return std::make_unique<NoSpeculateStrategy>(params, std::move(knowledge));
    case StrategyKind::Naive: return std::make_unique<NaiveStrategy>(params, std::move(knowledge));
    case StrategyKind::Late: return std::make_unique<LateStrategy>(params, std::move(knowledge));
    case StrategyKind::Samr: return std::make_unique<SamrStrategy>(params, std::move(knowledge));
    case StrategyKind::Esamr: return std::make_unique<EsamrStrategy>(params, std::move(knowledge));
    case StrategyKind::Nn: {
      if (knowledge) knowledge->nn.validate();
      return std::make_unique<NnStrategy>(params, std::move(knowledge));
    }
  }
  throw ConfigError("unknown strategy kind");
}

// ---------------------------------------------------------------------------
// Weight sources

StageWeights samr_weights(const Knowledge& knowledge, const JobView& job, NodeId node) {
  StageWeights w;  // initial (1, 0, 1/3, 1/3, 1/3)
  for (Phase p : {Phase::Map, Phase::Reduce}) {
    const ExecutionRecord* latest = nullptr;
    for (const auto& r : job.completed) {
      if (r.node_id == node && r.phase == p) latest = &r;
    }
    if (latest != nullptr) {
      w.set_phase(p, latest->realized_weights);
    } else if (auto h = knowledge.history.latest(node, p)) {
      w.set_phase(p, h->realized_weights);
    }
  }
  return w;
}

StageWeights esamr_weights(const Knowledge& knowledge, const JobView& job, NodeId node, Phase phase,
                           const StrategyParams& params) {
  StageWeights w;
  const auto& clusters = knowledge.clusters.for_phase(phase);
  if (!clusters || !clusters->fitted()) return w;

  std::size_t done = 0;
  std::vector<double> temp(stage_count(phase), 0.0);
  std::size_t on_node = 0;
  for (const auto& r : job.completed) {
    if (r.phase != phase) continue;
    ++done;
    if (r.node_id != node) continue;
    ++on_node;
    for (std::size_t k = 0; k < temp.size(); ++k) temp[k] += r.realized_weights[k];
  }
  const double needed = params.esamr_completion_fraction * static_cast<double>(job.phase_tasks(phase));
  if (on_node > 0 && static_cast<double>(done) + 1e-9 >= needed) {
    for (double& v : temp) v /= static_cast<double>(on_node);
    w.set_phase(phase, clusters->centroid(kmeans_nearest(*clusters, temp)));
  } else {
    w.set_phase(phase, clusters->centroid_mean());
  }
  return w;
}

std::optional<double> nn_map_tte(const NnModels& models, const TaskSnapshot& snapshot) {
  const MlpModel* m = models.map_model(snapshot.node_id);
  const NodeScale& scale = models.scale_for(snapshot.node_id);
  if (m == nullptr || !(scale.max_map_time > 0.0)) return std::nullopt;
  const auto features =
      map_tte_features(index_in_phase(snapshot.current_stage), snapshot.subps(), snapshot.input_bytes, scale);
  return mlp_forward(*m, features)[0] * scale.max_map_time;
}

std::optional<StageWeights> nn_weights(const NnModels& models, const TaskSnapshot& snapshot) {
  StageWeights w;
  if (snapshot.phase == Phase::Map) {
    const MlpModel* m = models.map_model(snapshot.node_id);
    const NodeScale& scale = models.scale_for(snapshot.node_id);
    if (m == nullptr || !(scale.max_map_time > 0.0)) return std::nullopt;
    // Share of the predicted remaining time still left when combine starts.
    const double at_start = mlp_forward(*m, map_tte_features(0, 0.0, snapshot.input_bytes, scale))[0];
    const double at_combine = mlp_forward(*m, map_tte_features(1, 0.0, snapshot.input_bytes, scale))[0];
    if (!(at_start > 0.0)) return std::nullopt;
    w.m2 = std::clamp(at_combine / at_start, 0.0, 1.0);
    w.m1 = 1.0 - w.m2;
    return w;
  }
  const MlpModel* m = models.reduce_model(snapshot.node_id);
  if (m == nullptr) return std::nullopt;
  const auto out =
      mlp_forward(*m, reduce_weight_features(snapshot.subps(), snapshot.input_bytes, models.scale_for(snapshot.node_id)));
  const double r1 = out[0];
  const double r2 = out[1];
  const double r3 = std::clamp(1.0 - r1 - r2, 0.0, 1.0);
  const double sum = r1 + r2 + r3;
  w.r1 = r1 / sum;
  w.r2 = r2 / sum;
  w.r3 = r3 / sum;
  return w;
}

// ---------------------------------------------------------------------------
// Detection entry points

std::vector<TaskId> naive_detect(std::span<const TaskSnapshot> snapshots, const StrategyParams& params) {
  std::map<Phase, std::pair<double, std::size_t>> totals;
  std::vector<std::pair<double, const TaskSnapshot*>> scored;
  for (const auto& s : snapshots) {
    if (s.is_backup) continue;
    const double p = weighted_progress(StageWeights::naive(), s.current_stage, s.subps());
    auto& [sum, n] = totals[s.phase];
    sum += p;
    ++n;
    scored.emplace_back(p, &s);
  }
  std::vector<std::pair<double, TaskId>> hits;
  for (const auto& [p, s] : scored) {
    const auto& [sum, n] = totals[s->phase];
    const double avg = sum / static_cast<double>(n);
    if (s->elapsed >= params.min_elapsed && p < (1.0 - params.naive_margin) * avg) hits.emplace_back(p, s->task_id);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<TaskId> out;
  for (const auto& [_, id] : hits) out.push_back(id);
  return out;
}

Evaluation late_detect(const EvaluationContext& ctx, const StrategyParams& params) {
  return make_strategy(StrategyKind::Late, params, nullptr)->evaluate(ctx);
}

Evaluation esamr_detect(const EvaluationContext& ctx, const Knowledge& knowledge, const StrategyParams& params) {
  std::vector<TaskEstimate> estimates;
  for (const auto& s : ctx.snapshots) {
    if (s.is_backup) continue;
    if (auto e = weighted_estimate(s, esamr_weights(knowledge, ctx.job, s.node_id, s.phase, params))) {
      estimates.push_back(*e);
    }
  }
  return rank_by_tte(ctx, params, std::move(estimates));
}

Evaluation nn_detect(const EvaluationContext& ctx, const Knowledge& knowledge, const StrategyParams& params) {
  auto shared = std::shared_ptr<const Knowledge>(&knowledge, [](const Knowledge*) {});
  return make_strategy(StrategyKind::Nn, params, shared)->evaluate(ctx);
}

Evaluation samr_detect(const EvaluationContext& ctx, const Knowledge& knowledge, const StrategyParams& params) {
  Evaluation ev;
  for (const auto& s : ctx.snapshots) {
    if (s.is_backup) continue;
    if (auto e = weighted_estimate(s, samr_weights(knowledge, ctx.job, s.node_id))) ev.estimates.push_back(*e);
  }
  const auto slow = slow_nodes(ev.estimates, ctx.nodes, params.slow_node_fraction);
  const auto backed = backed_up_tasks(ctx.snapshots);

  // APR and ATTE per phase; stalled tasks stay out of ATTE.
  std::map<Phase, std::vector<double>> rates, ttes;
  for (const auto& e : ev.estimates) {
    rates[e.phase].push_back(e.rate);
    if (std::isfinite(e.tte)) ttes[e.phase].push_back(e.tte);
  }

  std::vector<TaskEstimate> candidates;
  for (const auto& e : ev.estimates) {
    if (e.elapsed < params.min_elapsed || backed.contains(e.task_id) || e.tte <= 0.0) continue;
    const double apr = average_rate(rates[e.phase]);
    const bool slow_rate = e.rate < (1.0 - params.stac) * apr;
    bool slow_time = !std::isfinite(e.tte);
    if (!slow_time && !ttes[e.phase].empty()) {
      const double atte = average_tte(ttes[e.phase]);
      slow_time = e.tte - atte > atte * params.stt;
    }
    if (slow_rate && slow_time) candidates.push_back(e);
  }
  // Tasks on slow nodes first, then by time to end.
  std::sort(candidates.begin(), candidates.end(), [&](const TaskEstimate& a, const TaskEstimate& b) {
    const bool sa = slow.contains(a.node_id);
    const bool sb = slow.contains(b.node_id);
    if (sa != sb) return sa;
    return later_first(a, b);
  });

  std::size_t task_num = 0;
  for (const auto& s : ctx.snapshots) {
    if (!s.is_backup) ++task_num;
  }
  std::size_t budget = 0;
  const double bound = params.bp * static_cast<double>(task_num);
  while (static_cast<double>(ctx.running_backups + budget + 1) < bound) ++budget;
  launch(ctx, slow, candidates, budget, ev);
  return ev;
}

}  // namespace strag
