// Reference implementations. Kept deliberately plain: one loop, one
// accumulator, index order.

#include <limits>

#include "strag/kernels.hpp"

namespace strag::kernels {

double sq_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::size_t nearest(const PointSet& centroids, std::span<const double> p, double* sq) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = sq_distance(centroids.row(c), p);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (sq != nullptr) *sq = best_d;
  return best;
}

namespace serial {

double mlp_sse(const MlpModel& model, std::span<const Sample> data) {
  std::vector<std::vector<double>> acts;
  double sse = 0.0;
  for (const Sample& s : data) {
    detail::forward_all(model, s.features, acts);
    const auto& y = acts.back();
    for (std::size_t o = 0; o < y.size(); ++o) {
      const double e = y[o] - s.targets[o];
      sse += e * e;
    }
  }
  return sse;
}

MlpGradient mlp_gradient_sum(const MlpModel& model, std::span<const Sample> data) {
  MlpGradient g = MlpGradient::zeros_like(model);
  std::vector<std::vector<double>> acts;
  std::vector<double> delta, next_delta;
  for (const Sample& s : data) detail::accumulate_sample_gradient(model, s, g, acts, delta, next_delta);
  return g;
}

void assign(const PointSet& points, const PointSet& centroids, Assignment& out) {
  out.labels.resize(points.size());
  out.sq_dist.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.labels[i] = nearest(centroids, points.row(i), &out.sq_dist[i]);
  }
}

}  // namespace serial
}  // namespace strag::kernels
