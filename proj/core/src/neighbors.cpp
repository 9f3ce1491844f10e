#include "repgeom/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "repgeom/error.hpp"

namespace repgeom {

NeighborTable::NeighborTable(std::size_t n_points, std::size_t k_max,
                             std::vector<double> distances, std::size_t ambient_dim)
    : n_points_(n_points), k_max_(k_max), ambient_dim_(ambient_dim),
      distances_(std::move(distances)) {
  if (k_max_ == 0) throw ValidationError("neighbour table needs k_max >= 1");
  if (distances_.size() != n_points_ * k_max_) {
    throw ValidationError("neighbour table size does not match n_points x k_max");
  }
}

namespace {

// Rows of the query block are compared against the reference rows one
// reference tile at a time so the tile stays in cache.
constexpr std::size_t kQueryBlock = 32;
constexpr std::size_t kRefTile = 512;

}  // namespace

NeighborTable knn_exact(const Matrix& points, std::size_t k_max) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  if (k_max == 0 || k_max > n - 1) {
    throw ValidationError("k_max must lie in [1, N-1]; got k_max=" + std::to_string(k_max) +
                          " for N=" + std::to_string(n));
  }
  const double* x = points.values().data();
  std::vector<double> out(n * k_max);

  const auto n_blocks = static_cast<std::int64_t>((n + kQueryBlock - 1) / kQueryBlock);
#pragma omp parallel
  {
    std::vector<double> dist(kQueryBlock * n);
#pragma omp for schedule(dynamic, 1)
    for (std::int64_t b = 0; b < n_blocks; ++b) {
      const std::size_t q0 = static_cast<std::size_t>(b) * kQueryBlock;
      const std::size_t q1 = std::min(n, q0 + kQueryBlock);
      for (std::size_t r0 = 0; r0 < n; r0 += kRefTile) {
        const std::size_t r1 = std::min(n, r0 + kRefTile);
        for (std::size_t q = q0; q < q1; ++q) {
          const double* xq = x + q * dim;
          double* dq = dist.data() + (q - q0) * n;
          for (std::size_t r = r0; r < r1; ++r) {
            const double* xr = x + r * dim;
            double acc = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
              const double diff = xq[c] - xr[c];
              acc += diff * diff;
            }
            dq[r] = acc;
          }
        }
      }
      for (std::size_t q = q0; q < q1; ++q) {
        double* dq = dist.data() + (q - q0) * n;
        // Self goes to the end; a duplicate of q still contributes a zero.
        std::swap(dq[q], dq[n - 1]);
        const std::size_t m = n - 1;
        std::nth_element(dq, dq + (k_max - 1), dq + m);
        std::sort(dq, dq + k_max);
        double* o = out.data() + q * k_max;
        for (std::size_t j = 0; j < k_max; ++j) o[j] = std::sqrt(dq[j]);
      }
    }
  }
  return NeighborTable(n, k_max, std::move(out), dim);
}

FilteredNeighbors filter_degenerate(const NeighborTable& table) {
  const std::size_t k = table.k_max();
  std::vector<double> kept;
  kept.reserve(table.n_points() * k);
  std::size_t discarded = 0;
  for (std::size_t i = 0; i < table.n_points(); ++i) {
    if (table.r(i, 1) == 0.0) {
      ++discarded;
      continue;
    }
    auto d = table.distances(i);
    kept.insert(kept.end(), d.begin(), d.end());
  }
  if (discarded == table.n_points()) {
    throw NumericalError("all " + std::to_string(discarded) +
                         " points have a zero-distance neighbour; no ratios can be estimated");
  }
  const std::size_t remaining = table.n_points() - discarded;
  return {NeighborTable(remaining, k, std::move(kept), table.ambient_dim()), discarded};
}

}  // namespace repgeom
