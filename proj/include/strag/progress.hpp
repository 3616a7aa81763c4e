#pragma once

// Progress score, progress rate and time-to-end arithmetic.

#include <cstdint>
#include <limits>
#include <span>

#include "strag/task_model.hpp"

namespace strag {

/// Returned by time_to_end for a task that has stopped progressing.
inline constexpr double kStalled = std::numeric_limits<double>::infinity();

struct ProgressReport {
  double score = 0.0;  // P_s
  double rate = 0.0;   // Pr, score per second
  double tte = 0.0;    // seconds remaining
};

/// N_f / N_a of a map-phase snapshot.
double map_progress(const TaskSnapshot& snapshot);

/// Hadoop's reduce score (K + N_f/N_a) / 3 with K the reduce stage index.
double reduce_progress_naive(std::size_t stage_index, std::uint64_t processed,
                             std::uint64_t total);

double sub_progress(std::uint64_t processed, std::uint64_t total);

/// Reduce-phase score from per-stage weights: completed stages contribute
/// their full weight, the current stage contributes weight * subps.
double weighted_reduce_progress(const StageWeights& weights, Stage current,
                                double subps);

/// Same rule for either phase (map uses m1/m2).
double weighted_progress(const StageWeights& weights, Stage current,
                         double subps);

double progress_rate(double score, double elapsed);

/// (1 - P_s) / Pr; 0 once complete, kStalled when the rate is zero.
double time_to_end(double score, double rate);

ProgressReport progress_report(const StageWeights& weights,
                               const TaskSnapshot& snapshot);

double average_progress(std::span<const double> scores);
double average_rate(std::span<const double> rates);
double average_tte(std::span<const double> ttes);

/// Mean of squared residuals estimate - actual.
double mse_error(std::span<const double> estimates,
                 std::span<const double> actuals);

}  // namespace strag
