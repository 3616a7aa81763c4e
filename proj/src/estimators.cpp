#include "strag/estimators.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <string>

#include "strag/rng.hpp"
#include "strag/text.hpp"

namespace strag {

StagePosition position_at(std::span<const double> durations, double elapsed) {
  if (durations.empty()) throw DegenerateInputError("no stage durations");
  double start = 0.0;
  for (std::size_t i = 0; i < durations.size(); ++i) {
    const double end = start + durations[i];
    if (elapsed < end && durations[i] > 0.0) {
      return {i, std::clamp((elapsed - start) / durations[i], 0.0, 1.0)};
    }
    start = end;
  }
  return {durations.size() - 1, 1.0};
}

NodeScale scale_from_records(std::span<const ExecutionRecord> map_records,
                             std::span<const ExecutionRecord> reduce_records) {
  NodeScale s;
  for (const auto& r : map_records) {
    s.max_map_bytes = std::max(s.max_map_bytes, static_cast<double>(r.input_bytes));
    s.max_map_time = std::max(s.max_map_time, r.total_time);
  }
  for (const auto& r : reduce_records) {
    s.max_reduce_bytes = std::max(s.max_reduce_bytes, static_cast<double>(r.input_bytes));
  }
  return s;
}

namespace {

double unit(double v) { return std::clamp(v, 0.0, 1.0); }

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

std::vector<double> reduce_weight_features(double subps, std::uint64_t input_bytes, const NodeScale& scale) {
  const double bytes = unit(ratio(static_cast<double>(input_bytes), scale.max_reduce_bytes));
  return {unit(subps), unit(subps * bytes), bytes};
}

std::vector<double> map_tte_features(std::size_t stage_index, double subps, std::uint64_t input_bytes,
                                     const NodeScale& scale) {
  const double phase_subps = unit((static_cast<double>(stage_index) + subps) / 2.0);
  const double bytes = unit(ratio(static_cast<double>(input_bytes), scale.max_map_bytes));
  return {phase_subps, unit(phase_subps * bytes)};
}

std::vector<Sample> reduce_weight_samples(std::span<const ExecutionRecord> records, const NodeScale& scale,
                                          std::size_t per_record) {
  std::vector<Sample> out;
  for (const auto& r : records) {
    if (r.phase != Phase::Reduce) continue;
    for (std::size_t j = 0; j < per_record; ++j) {
      const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(per_record);
      const StagePosition pos = position_at(r.stage_durations, u * r.total_time);
      out.push_back({reduce_weight_features(pos.fraction, r.input_bytes, scale),
                     {r.realized_weights[0], r.realized_weights[1]}});
    }
  }
  return out;
}

std::vector<Sample> map_tte_samples(std::span<const ExecutionRecord> records, const NodeScale& scale,
                                    std::size_t per_record) {
  std::vector<Sample> out;
  for (const auto& r : records) {
    if (r.phase != Phase::Map) continue;
    for (std::size_t j = 0; j < per_record; ++j) {
      const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(per_record);
      const StagePosition pos = position_at(r.stage_durations, u * r.total_time);
      const double remaining = (1.0 - u) * r.total_time;
      out.push_back({map_tte_features(pos.index, pos.fraction, r.input_bytes, scale),
                     {unit(ratio(remaining, scale.max_map_time))}});
    }
  }
  return out;
}

const MlpModel* NnModels::reduce_model(NodeId node) const {
  if (auto it = reduce_weights.find(node); it != reduce_weights.end()) return &it->second;
  return pooled_reduce_weights ? &*pooled_reduce_weights : nullptr;
}

const MlpModel* NnModels::map_model(NodeId node) const {
  if (auto it = map_tte.find(node); it != map_tte.end()) return &it->second;
  return pooled_map_tte ? &*pooled_map_tte : nullptr;
}

const NodeScale& NnModels::scale_for(NodeId node) const {
  if (auto it = scale.find(node); it != scale.end()) return it->second;
  return pooled_scale;
}

void NnModels::validate() const {
  auto check = [](const MlpModel& m, std::size_t in, std::size_t out, const char* what) {
    m.validate();
    if (m.input_size() != in || m.output_size() != out) {
      throw ConfigError(std::string(what) + " model has shape incompatible with its features");
    }
  };
  for (const auto& [_, m] : reduce_weights) check(m, 3, 2, "reduce-weight");
  for (const auto& [_, m] : map_tte) check(m, 2, 1, "map-tte");
  if (pooled_reduce_weights) check(*pooled_reduce_weights, 3, 2, "reduce-weight");
  if (pooled_map_tte) check(*pooled_map_tte, 2, 1, "map-tte");
}

namespace {

std::vector<std::size_t> layout(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> l{in};
  l.insert(l.end(), hidden.begin(), hidden.end());
  l.push_back(out);
  return l;
}

MlpModel fit(const std::vector<Sample>& samples, std::vector<std::size_t> layers, const TrainConfig& cfg,
             std::uint64_t salt) {
  TrainConfig c = cfg;
  c.seed = derive_seed(cfg.seed, {salt});
  return mlp_train(mlp_init(layers, c.seed), samples, c).model;
}

}  // namespace

NnModels train_nn_models(const HistoryStore& history, const LearnerConfig& config) {
  NnModels models;
  const auto reduce_layers = layout(3, config.hidden, 2);
  const auto map_layers = layout(2, config.hidden, 1);
  const std::size_t per = std::max<std::size_t>(config.samples_per_record, 1);

  for (NodeId node : history.nodes()) {
    const auto maps = history.records_for_node(node, Phase::Map);
    const auto reduces = history.records_for_node(node, Phase::Reduce);
    const NodeScale scale = scale_from_records(maps, reduces);
    models.scale[node] = scale;
    if (!reduces.empty()) {
      models.reduce_weights.emplace(
          node, fit(reduce_weight_samples(reduces, scale, per), reduce_layers, config.train, 2 * node + 1));
    }
    if (!maps.empty()) {
      models.map_tte.emplace(node,
                             fit(map_tte_samples(maps, scale, per), map_layers, config.train, 2 * node + 2));
    }
  }

  const auto all_maps = history.records(Phase::Map);
  const auto all_reduces = history.records(Phase::Reduce);
  models.pooled_scale = scale_from_records(all_maps, all_reduces);
  if (!all_reduces.empty()) {
    models.pooled_reduce_weights =
        fit(reduce_weight_samples(all_reduces, models.pooled_scale, per), reduce_layers, config.train, 0x7001);
  }
  if (!all_maps.empty()) {
    models.pooled_map_tte =
        fit(map_tte_samples(all_maps, models.pooled_scale, per), map_layers, config.train, 0x7002);
  }
  return models;
}

namespace {

void write_model(const std::filesystem::path& path, const MlpModel& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot write " + path.string());
  save_mlp(out, m);
}

MlpModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot read " + path.string());
  return load_mlp(in);
}

}  // namespace

void save_nn_models(const NnModels& models, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [node, m] : models.reduce_weights) {
    write_model(dir / ("reduce_weights.node" + std::to_string(node) + ".mlp"), m);
  }
  for (const auto& [node, m] : models.map_tte) {
    write_model(dir / ("map_tte.node" + std::to_string(node) + ".mlp"), m);
  }
  if (models.pooled_reduce_weights) write_model(dir / "reduce_weights.pooled.mlp", *models.pooled_reduce_weights);
  if (models.pooled_map_tte) write_model(dir / "map_tte.pooled.mlp", *models.pooled_map_tte);
}

NnModels load_nn_models(const std::filesystem::path& dir, const HistoryStore& history) {
  if (!std::filesystem::is_directory(dir)) throw StorageError("model directory not found: " + dir.string());
  NnModels models;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".mlp") continue;
    const bool reduce = name.rfind("reduce_weights.", 0) == 0;
    const bool map = name.rfind("map_tte.", 0) == 0;
    if (!reduce && !map) continue;
    const std::string middle = name.substr(name.find('.') + 1, name.size() - name.find('.') - 5);
    MlpModel m = read_model(entry.path());
    if (middle == "pooled") {
      (reduce ? models.pooled_reduce_weights : models.pooled_map_tte) = std::move(m);
    } else if (middle.rfind("node", 0) == 0) {
      const auto node = static_cast<NodeId>(text::parse_u64(middle.substr(4)));
      (reduce ? models.reduce_weights : models.map_tte).emplace(node, std::move(m));
    }
  }
  for (NodeId node : history.nodes()) {
    models.scale[node] =
        scale_from_records(history.records_for_node(node, Phase::Map), history.records_for_node(node, Phase::Reduce));
  }
  models.pooled_scale = scale_from_records(history.records(Phase::Map), history.records(Phase::Reduce));
  models.validate();
  return models;
}

WeightClusters fit_weight_clusters(const HistoryStore& history, std::size_t k, std::uint64_t seed,
                                   std::size_t max_iter) {
  WeightClusters out;
  for (Phase p : {Phase::Map, Phase::Reduce}) {
    const auto records = history.records(p);
    if (records.empty()) continue;
    PointSet points(stage_count(p));
    for (const auto& r : records) points.push_back(r.realized_weights);
    (p == Phase::Map ? out.map : out.reduce) = kmeans_fit(points, k, derive_seed(seed, {static_cast<std::uint64_t>(p)}), max_iter);
  }
  return out;
}

void save_kmeans(std::ostream& out, const KmeansModel& model) {
  out << "kmeans v1 " << model.k << ' ' << model.centroids.dim << ' ' << model.centroids.size() << '\n';
  for (std::size_t c = 0; c < model.centroids.size(); ++c) {
    bool first = true;
    for (double v : model.centroids.row(c)) {
      out << (first ? "" : " ") << text::format_double(v);
      first = false;
    }
    out << '\n';
  }
}

Knowledge build_knowledge(const HistoryStore& history, const LearnerConfig& config, KnowledgeNeeds needs) {
  Knowledge k;
  k.history = history;
  if (needs.nn) k.nn = train_nn_models(history, config);
  if (needs.clusters) k.clusters = fit_weight_clusters(history, config.k, config.kmeans_seed, config.kmeans_max_iter);
  return k;
}

}  // namespace strag
