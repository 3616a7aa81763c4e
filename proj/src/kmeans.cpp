#include "strag/kmeans.hpp"

#include <algorithm>

#include "strag/kernels.hpp"
#include "strag/rng.hpp"
#include "strag/task_model.hpp"

namespace strag {

PointSet PointSet::from_rows(const std::vector<std::vector<double>>& rows) {
  PointSet ps(rows.empty() ? 0 : rows.front().size());
  for (const auto& r : rows) ps.push_back(r);
  return ps;
}

void PointSet::push_back(std::span<const double> p) {
  if (p.size() != dim) throw DimensionError("point dimension mismatch");
  data.insert(data.end(), p.begin(), p.end());
}

std::vector<double> KmeansModel::centroid(std::size_t i) const {
  auto r = centroids.row(i);
  return {r.begin(), r.end()};
}

std::vector<double> KmeansModel::centroid_mean() const {
  if (!fitted()) throw Error("k-means model is not fitted");
  std::vector<double> mean(centroids.dim, 0.0);
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    for (std::size_t d = 0; d < centroids.dim; ++d) mean[d] += centroids.row(c)[d];
  }
  for (double& v : mean) v /= static_cast<double>(centroids.size());
  return mean;
}

namespace {

double total(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

KmeansModel kmeans_fit(const PointSet& points, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  if (points.empty()) throw DegenerateInputError("k-means needs at least one point");
  if (k < 1) throw ConfigError("k must be at least 1");
  if (points.dim == 0 || points.data.size() % points.dim != 0) throw DimensionError("ragged point set");

  // Distinct points in first-seen order; initial centroids come from these.
  std::vector<std::size_t> distinct;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool seen = false;
    for (std::size_t j : distinct) {
      if (std::equal(points.row(i).begin(), points.row(i).end(), points.row(j).begin())) {
        seen = true;
        break;
      }
    }
    if (!seen) distinct.push_back(i);
  }

  KmeansModel model;
  model.k = k;
  model.seed = seed;
  model.max_iter = max_iter;
  const std::size_t kk = std::min(k, distinct.size());

  Rng rng(derive_seed(seed, {0x6b6d}));
  for (std::size_t i = 0; i < kk; ++i) {
    std::swap(distinct[i], distinct[i + rng.below(distinct.size() - i)]);
  }
  model.centroids = PointSet(points.dim);
  for (std::size_t i = 0; i < kk; ++i) model.centroids.push_back(points.row(distinct[i]));

  kernels::Assignment assignment;
  std::vector<std::size_t> previous;
  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iter, 1); ++iter) {
    kernels::parallel::assign(points, model.centroids, assignment);
    model.inertia_trace.push_back(total(assignment.sq_dist));
    model.iterations = iter + 1;
    if (assignment.labels == previous) break;
    previous = assignment.labels;

    std::vector<double> sums(kk * points.dim, 0.0);
    std::vector<std::size_t> counts(kk, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const std::size_t c = assignment.labels[i];
      ++counts[c];
      for (std::size_t d = 0; d < points.dim; ++d) sums[c * points.dim + d] += points.row(i)[d];
    }
    for (std::size_t c = 0; c < kk; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t d = 0; d < points.dim; ++d) {
        model.centroids.row(c)[d] = sums[c * points.dim + d] / static_cast<double>(counts[c]);
      }
    }
  }
  return model;
}

std::size_t kmeans_nearest(const KmeansModel& model, std::span<const double> point) {
  if (!model.fitted()) throw Error("k-means model is not fitted");
  if (point.size() != model.centroids.dim) throw DimensionError("point dimension does not match centroids");
  return kernels::nearest(model.centroids, point);
}

double kmeans_inertia(const KmeansModel& model, const PointSet& points) {
  kernels::Assignment a;
  kernels::serial::assign(points, model.centroids, a);
  return total(a.sq_dist);
}

}  // namespace strag
