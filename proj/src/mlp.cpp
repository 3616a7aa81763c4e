#include "strag/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "strag/kernels.hpp"
#include "strag/rng.hpp"
#include "strag/task_model.hpp"
#include "strag/text.hpp"

namespace strag {

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

void MlpModel::validate() const {
  if (layers.size() < 2) throw DimensionError("an MLP needs at least input and output layers");
  if (weights.size() != layers.size() - 1 || biases.size() != layers.size() - 1) {
    throw DimensionError("layer count does not match parameter blocks");
  }
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    if (layers[l] == 0 || layers[l + 1] == 0) throw DimensionError("empty layer");
    if (weights[l].size() != layers[l] * layers[l + 1] || biases[l].size() != layers[l + 1]) {
      throw DimensionError("weight matrix shape does not match layer sizes");
    }
  }
}

MlpGradient MlpGradient::zeros_like(const MlpModel& m) {
  MlpGradient g;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    g.weights.emplace_back(m.weights[l].size(), 0.0);
    g.biases.emplace_back(m.biases[l].size(), 0.0);
  }
  return g;
}

void MlpGradient::add(const MlpGradient& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += other.weights[l][i];
    for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += other.biases[l][i];
  }
}

void MlpGradient::scale(double factor) {
  for (auto& w : weights) for (double& v : w) v *= factor;
  for (auto& b : biases) for (double& v : b) v *= factor;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be non-negative");
}

MlpModel mlp_init(std::span<const std::size_t> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw DimensionError("an MLP needs at least input and output layers");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw DimensionError("layer sizes must be at least 1");
  }
  MlpModel m;
  m.layers.assign(layer_sizes.begin(), layer_sizes.end());
  m.seed = seed;
  Rng rng(derive_seed(seed, {0x6d6c70}));
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    std::vector<double> w(m.layers[l] * m.layers[l + 1]);
    std::vector<double> b(m.layers[l + 1]);
    for (double& v : w) v = rng.uniform(-0.5, 0.5);
    for (double& v : b) v = rng.uniform(-0.5, 0.5);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  return m;
}

namespace detail {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void forward_all(const MlpModel& model, std::span<const double> features,
                 std::vector<std::vector<double>>& acts) {
  const std::size_t L = model.layer_count();
  acts.resize(L + 1);
  acts[0].assign(features.begin(), features.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = model.layers[l];
    const std::size_t out = model.layers[l + 1];
    const auto& W = model.weights[l];
    const auto& b = model.biases[l];
    acts[l + 1].resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      const double* row = W.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) z += row[i] * acts[l][i];
      acts[l + 1][o] = sigmoid(z);
    }
  }
}

void accumulate_sample_gradient(const MlpModel& model, const Sample& sample, MlpGradient& grad,
                                std::vector<std::vector<double>>& acts,
                                std::vector<double>& delta, std::vector<double>& next_delta) {
  forward_all(model, sample.features, acts);
  const std::size_t L = model.layer_count();
  const auto& y = acts[L];
  delta.resize(y.size());
  for (std::size_t o = 0; o < y.size(); ++o) {
    delta[o] = (y[o] - sample.targets[o]) * y[o] * (1.0 - y[o]);
  }
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = model.layers[l];
    const std::size_t out = model.layers[l + 1];
    const auto& a = acts[l];
    auto& gW = grad.weights[l];
    auto& gb = grad.biases[l];
    for (std::size_t o = 0; o < out; ++o) {
      double* row = gW.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) row[i] += delta[o] * a[i];
      gb[o] += delta[o];
    }
    if (l == 0) break;
    next_delta.assign(in, 0.0);
    const auto& W = model.weights[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = W.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) next_delta[i] += row[i] * delta[o];
    }
    for (std::size_t i = 0; i < in; ++i) next_delta[i] *= a[i] * (1.0 - a[i]);
    delta.swap(next_delta);
  }
}

}  // namespace detail

std::vector<double> mlp_forward(const MlpModel& model, std::span<const double> features) {
  if (features.size() != model.input_size()) throw DimensionError("feature length does not match input layer");
  std::vector<std::vector<double>> acts;
  detail::forward_all(model, features, acts);
  return std::move(acts.back());
}

namespace {

void check_dataset(const MlpModel& model, std::span<const Sample> data, bool targets_in_unit) {
  if (data.empty()) throw DegenerateInputError("empty training set");
  for (const Sample& s : data) {
    if (s.features.size() != model.input_size() || s.targets.size() != model.output_size()) {
      throw DimensionError("sample does not match model dimensions");
    }
    for (double v : s.features) {
      if (!std::isfinite(v)) throw DegenerateInputError("non-finite feature value");
    }
    for (double v : s.targets) {
      if (!std::isfinite(v)) throw DegenerateInputError("non-finite target value");
      if (targets_in_unit && (v < 0.0 || v > 1.0)) throw DegenerateInputError("target outside [0,1]");
    }
  }
}

void apply(MlpModel& model, const MlpGradient& g, double lr) {
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    for (std::size_t i = 0; i < model.weights[l].size(); ++i) model.weights[l][i] -= lr * g.weights[l][i];
    for (std::size_t i = 0; i < model.biases[l].size(); ++i) model.biases[l][i] -= lr * g.biases[l][i];
  }
}

}  // namespace

double mlp_mse(const MlpModel& model, std::span<const Sample> data) {
  check_dataset(model, data, false);
  return kernels::parallel::mlp_sse(model, data) /
         static_cast<double>(data.size() * model.output_size());
}

MlpGradient mlp_gradient(const MlpModel& model, std::span<const Sample> data) {
  check_dataset(model, data, false);
  MlpGradient g = kernels::parallel::mlp_gradient_sum(model, data);
  g.scale(1.0 / static_cast<double>(data.size()));
  return g;
}

TrainResult mlp_train(MlpModel model, std::span<const Sample> data, const TrainConfig& config) {
  config.validate();
  model.validate();
  check_dataset(model, data, true);

  const double denom = static_cast<double>(data.size() * model.output_size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  MlpGradient step = MlpGradient::zeros_like(model);
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, next_delta;

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (kernels::parallel::mlp_sse(model, data) / denom < config.tolerance) break;
    if (config.mode == TrainMode::FullBatch) {
      MlpGradient g = kernels::parallel::mlp_gradient_sum(model, data);
      g.scale(1.0 / static_cast<double>(data.size()));
      apply(model, g, config.learning_rate);
    } else {
      Rng rng(derive_seed(config.seed, {epoch}));
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
      }
      for (std::size_t idx : order) {
        for (auto& w : step.weights) std::fill(w.begin(), w.end(), 0.0);
        for (auto& b : step.biases) std::fill(b.begin(), b.end(), 0.0);
        detail::accumulate_sample_gradient(model, data[idx], step, acts, delta, next_delta);
        apply(model, step, config.learning_rate);
      }
    }
    result.epochs_run = epoch + 1;
  }
  result.final_error = kernels::parallel::mlp_sse(model, data) / denom;
  result.model = std::move(model);
  return result;
}

void save_mlp(std::ostream& out, const MlpModel& model) {
  model.validate();
  out << "mlp v1";
  for (std::size_t s : model.layers) out << ' ' << s;
  out << '\n';
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    bool first = true;
    for (double v : model.weights[l]) {
      out << (first ? "" : " ") << text::format_double(v);
      first = false;
    }
    for (double v : model.biases[l]) out << ' ' << text::format_double(v);
    out << '\n';
  }
  if (!out) throw StorageError("failed to write model");
}

MlpModel load_mlp(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw StorageError("missing model header");
  std::istringstream header(line);
  std::string tag, version;
  header >> tag >> version;
  if (tag != "mlp" || version != "v1") throw StorageError("unsupported model header: " + line);
  MlpModel m;
  std::size_t s = 0;
  while (header >> s) m.layers.push_back(s);
  if (m.layers.size() < 2) throw StorageError("model header lists fewer than two layers");
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    if (!std::getline(in, line)) throw StorageError("truncated model file");
    std::vector<double> values;
    for (auto tok : text::split(text::trim(line), ' ')) {
      if (!tok.empty()) values.push_back(text::parse_double(tok));
    }
    const std::size_t nw = m.layers[l] * m.layers[l + 1];
    if (values.size() != nw + m.layers[l + 1]) throw StorageError("layer line has wrong value count");
    m.weights.emplace_back(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(nw));
    m.biases.emplace_back(values.begin() + static_cast<std::ptrdiff_t>(nw), values.end());
  }
  m.validate();
  return m;
}

}  // namespace strag
