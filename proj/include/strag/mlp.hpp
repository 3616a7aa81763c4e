#pragma once

// Multilayer perceptron with logistic units, trained by backpropagation on
// squared error. Used for per-node stage-weight and map time-to-end models.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace strag {

struct MlpModel {
  std::vector<std::size_t> layers;           // input, hidden..., output
  std::vector<std::vector<double>> weights;  // per layer, row-major [out][in]
  std::vector<std::vector<double>> biases;   // per layer, [out]
  std::uint64_t seed = 0;

  std::size_t input_size() const { return layers.front(); }
  std::size_t output_size() const { return layers.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;

  void validate() const;

  bool operator==(const MlpModel&) const = default;
};

struct Sample {
  std::vector<double> features;
  std::vector<double> targets;
};

/// Same shape as the model's parameters.
struct MlpGradient {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static MlpGradient zeros_like(const MlpModel& m);
  void add(const MlpGradient& other);
  void scale(double factor);
};

enum class TrainMode : std::uint8_t {
  Online,     // one update per sample, sample order reshuffled each epoch
  FullBatch,  // one update per epoch along the mean-loss gradient
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 100;
  double tolerance = 1e-4;  // stop once training MSE drops below this
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::Online;

  void validate() const;
};

struct TrainResult {
  MlpModel model;
  double final_error = 0.0;  // training MSE after the last update
  std::size_t epochs_run = 0;
};

/// Weights and biases uniform in [-0.5, 0.5] from the seeded generator.
MlpModel mlp_init(std::span<const std::size_t> layer_sizes, std::uint64_t seed);

std::vector<double> mlp_forward(const MlpModel& model, std::span<const double> features);

/// Mean over samples and outputs of the squared residual.
double mlp_mse(const MlpModel& model, std::span<const Sample> data);

/// Gradient of (1 / 2N) * sum_i ||y_i - t_i||^2 over the dataset.
MlpGradient mlp_gradient(const MlpModel& model, std::span<const Sample> data);

TrainResult mlp_train(MlpModel model, std::span<const Sample> data, const TrainConfig& config);

void save_mlp(std::ostream& out, const MlpModel& model);
MlpModel load_mlp(std::istream& in);

namespace detail {

double sigmoid(double z);

/// Adds the gradient of 0.5 * ||y - t||^2 for one sample into `grad`.
/// `acts` is scratch space reused across calls.
void accumulate_sample_gradient(const MlpModel& model, const Sample& sample,
                                MlpGradient& grad,
                                std::vector<std::vector<double>>& acts,
                                std::vector<double>& delta,
                                std::vector<double>& next_delta);

/// Forward pass keeping every layer's activations (acts[0] = input).
void forward_all(const MlpModel& model, std::span<const double> features,
                 std::vector<std::vector<double>>& acts);

}  // namespace detail

}  // namespace strag
