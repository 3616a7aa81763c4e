#pragma once

// Lloyd's k-means over small weight vectors.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace strag {

/// Row-major point matrix.
struct PointSet {
  std::size_t dim = 0;
  std::vector<double> data;

  PointSet() = default;
  explicit PointSet(std::size_t d) : dim(d) {}
  static PointSet from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  bool empty() const { return size() == 0; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }
  void push_back(std::span<const double> p);

  bool operator==(const PointSet&) const = default;
};

struct KmeansModel {
  std::size_t k = 0;  // requested cluster count
  PointSet centroids;  // min(k, distinct points) rows after fit
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  std::size_t iterations = 0;
  std::vector<double> inertia_trace;  // inertia after every assignment step

  bool fitted() const { return !centroids.empty(); }
  std::vector<double> centroid(std::size_t i) const;
  /// Component-wise mean of all centroids.
  std::vector<double> centroid_mean() const;
};

/// Initial centroids are drawn without replacement from the distinct input
/// points; iteration stops at an assignment fixpoint or after max_iter.
KmeansModel kmeans_fit(const PointSet& points, std::size_t k = 10, std::uint64_t seed = 1,
                       std::size_t max_iter = 100);

/// Index of the closest centroid; ties go to the lowest index.
std::size_t kmeans_nearest(const KmeansModel& model, std::span<const double> point);

/// Sum of squared distances from each point to its nearest centroid.
double kmeans_inertia(const KmeansModel& model, const PointSet& points);

}  // namespace strag
