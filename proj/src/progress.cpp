#include "strag/progress.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace strag {

namespace {

double mean_of(std::span<const double> values, const char* what) {
  if (values.empty()) throw DegenerateInputError(std::string("empty list for ") + what);
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

double map_progress(const TaskSnapshot& snapshot) {
  if (snapshot.phase != Phase::Map) throw PhaseError("map_progress needs a map snapshot");
  return sub_progress(snapshot.processed_pairs, snapshot.total_pairs);
}

double reduce_progress_naive(std::size_t stage_index, std::uint64_t processed,
                             std::uint64_t total) {
  if (stage_index > 2) throw DegenerateInputError("reduce stage index must be 0..2");
  return (static_cast<double>(stage_index) + sub_progress(processed, total)) / 3.0;
}

double sub_progress(std::uint64_t processed, std::uint64_t total) {
  if (total == 0) throw DegenerateInputError("N_a must be at least 1");
  if (processed > total) throw DegenerateInputError("N_f exceeds N_a");
  return static_cast<double>(processed) / static_cast<double>(total);
}

double weighted_reduce_progress(const StageWeights& weights, Stage current, double subps) {
  if (phase_of(current) != Phase::Reduce) {
    throw PhaseError("weighted_reduce_progress called with a map stage");
  }
  return weighted_progress(weights, current, subps);
}

double weighted_progress(const StageWeights& weights, Stage current, double subps) {
  if (!(subps >= 0.0 && subps <= 1.0)) throw DegenerateInputError("subps outside [0,1]");
  const Phase phase = phase_of(current);
  double score = 0.0;
  for (std::size_t k = 0; k < index_in_phase(current); ++k) {
    score += weights.at(stage_at(phase, k));
  }
  score += weights.at(current) * subps;
  return std::clamp(score, 0.0, 1.0);
}

double progress_rate(double score, double elapsed) {
  if (!(elapsed > 0.0)) throw DegenerateInputError("progress rate needs elapsed time > 0");
  return score / elapsed;
}

double time_to_end(double score, double rate) {
  if (score >= 1.0) return 0.0;
  if (rate <= 0.0) return kStalled;
  return (1.0 - score) / rate;
}

ProgressReport progress_report(const StageWeights& weights, const TaskSnapshot& snapshot) {
  ProgressReport r;
  r.score = weighted_progress(weights, snapshot.current_stage, snapshot.subps());
  r.rate = progress_rate(r.score, snapshot.elapsed);
  r.tte = time_to_end(r.score, r.rate);
  return r;
}

double average_progress(std::span<const double> scores) { return mean_of(scores, "average_progress"); }
double average_rate(std::span<const double> rates) { return mean_of(rates, "average_rate"); }
double average_tte(std::span<const double> ttes) { return mean_of(ttes, "average_tte"); }

double mse_error(std::span<const double> estimates, std::span<const double> actuals) {
  if (estimates.size() != actuals.size()) throw DimensionError("mse_error length mismatch");
  if (estimates.empty()) throw DegenerateInputError("mse_error of empty lists");
  double sum = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double e = estimates[i] - actuals[i];
    sum += e * e;
  }
  return sum / static_cast<double>(estimates.size());
}

}  // namespace strag
