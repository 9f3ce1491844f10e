#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "repgeom/matrix.hpp"

namespace repgeom {

/// Ascending Euclidean distances from every point to its k_max nearest
/// neighbours, self excluded. Row i, column j-1 holds r_{i,j}.
class NeighborTable {
 public:
  NeighborTable(std::size_t n_points, std::size_t k_max, std::vector<double> distances,
                std::size_t ambient_dim = 0);

  std::size_t n_points() const noexcept { return n_points_; }
  std::size_t k_max() const noexcept { return k_max_; }
  /// Dimension of the space the points came from, 0 if unknown.
  std::size_t ambient_dim() const noexcept { return ambient_dim_; }

  std::span<const double> distances(std::size_t i) const noexcept {
    return {distances_.data() + i * k_max_, k_max_};
  }
  /// r_{i,j} with j counted from 1.
  double r(std::size_t i, std::size_t j) const noexcept {
    return distances_[i * k_max_ + j - 1];
  }

 private:
  std::size_t n_points_;
  std::size_t k_max_;
  std::size_t ambient_dim_;
  std::vector<double> distances_;
};

/// Exact brute-force kNN distances. Accumulates in double whatever the input
/// dtype; each point is processed independently so results do not depend on
/// the thread count.
NeighborTable knn_exact(const Matrix& points, std::size_t k_max);

struct FilteredNeighbors {
  NeighborTable table;
  std::size_t discarded = 0;
};

/// Drops points whose first-neighbour distance is zero (exact duplicates).
/// Throws NumericalError if nothing remains.
FilteredNeighbors filter_degenerate(const NeighborTable& table);

}  // namespace repgeom
