#include <algorithm>
#include <cstdint>

#include "strag/kernels.hpp"

namespace strag::kernels::parallel {

namespace {

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

}  // namespace

double mlp_sse(const MlpModel& model, std::span<const Sample> data) {
  const std::size_t chunks = chunk_count(data.size());
  std::vector<double> partial(chunks, 0.0);

#pragma omp parallel for schedule(static) if (chunks > 1)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t end = std::min(begin + kChunk, data.size());
    std::vector<std::vector<double>> acts;
    double sse = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      detail::forward_all(model, data[i].features, acts);
      const auto& y = acts.back();
      for (std::size_t o = 0; o < y.size(); ++o) {
        const double e = y[o] - data[i].targets[o];
        sse += e * e;
      }
    }
    partial[static_cast<std::size_t>(c)] = sse;
  }

  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

MlpGradient mlp_gradient_sum(const MlpModel& model, std::span<const Sample> data) {
  const std::size_t chunks = chunk_count(data.size());
  std::vector<MlpGradient> partial(chunks, MlpGradient::zeros_like(model));

#pragma omp parallel for schedule(static) if (chunks > 1)
  for (std::int64_t c = 0; c < static_cast<std::int64_t>(chunks); ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
    const std::size_t end = std::min(begin + kChunk, data.size());
    std::vector<std::vector<double>> acts;
    std::vector<double> delta, next_delta;
    auto& g = partial[static_cast<std::size_t>(c)];
    for (std::size_t i = begin; i < end; ++i) {
      detail::accumulate_sample_gradient(model, data[i], g, acts, delta, next_delta);
    }
  }

  MlpGradient total = MlpGradient::zeros_like(model);
  for (const auto& g : partial) total.add(g);
  return total;
}

void assign(const PointSet& points, const PointSet& centroids, Assignment& out) {
  const std::size_t n = points.size();
  out.labels.resize(n);
  out.sq_dist.resize(n);

#pragma omp parallel for schedule(static) if (n > kChunk)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out.labels[idx] = nearest(centroids, points.row(idx), &out.sq_dist[idx]);
  }
}

}  // namespace strag::kernels::parallel
