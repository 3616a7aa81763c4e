#pragma once

// Data-parallel inner loops of the learners. Each kernel has a serial
// reference and an OpenMP version. The OpenMP versions reduce over fixed
// chunks in index order, so results do not depend on the thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "strag/kmeans.hpp"
#include "strag/mlp.hpp"

namespace strag::kernels {

inline constexpr std::size_t kChunk = 64;

struct Assignment {
  std::vector<std::size_t> labels;
  std::vector<double> sq_dist;
};

namespace serial {

double mlp_sse(const MlpModel& model, std::span<const Sample> data);
MlpGradient mlp_gradient_sum(const MlpModel& model, std::span<const Sample> data);
void assign(const PointSet& points, const PointSet& centroids, Assignment& out);

}  // namespace serial

namespace parallel {

double mlp_sse(const MlpModel& model, std::span<const Sample> data);
MlpGradient mlp_gradient_sum(const MlpModel& model, std::span<const Sample> data);
void assign(const PointSet& points, const PointSet& centroids, Assignment& out);

}  // namespace parallel

/// Squared Euclidean distance.
double sq_distance(std::span<const double> a, std::span<const double> b);

/// Nearest row of `centroids`, lowest index on ties.
std::size_t nearest(const PointSet& centroids, std::span<const double> p, double* sq = nullptr);

}  // namespace strag::kernels
