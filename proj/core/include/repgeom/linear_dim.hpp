#pragma once

#include <cstddef>
#include <vector>

#include "repgeom/matrix.hpp"

namespace repgeom {

/// Eigenvalues of the column-centred feature covariance, descending.
struct SpectrumSummary {
  std::vector<double> eigenvalues;
  double total_variance = 0.0;
};

/// Builds a summary from arbitrary eigenvalues: sorts descending, clamps
/// tiny negatives (>= -1e-10 * largest) to zero and rejects larger ones.
SpectrumSummary make_spectrum(std::vector<double> eigenvalues);

/// Spectrum of X via the singular values of the centred matrix, scaled by
/// 1/(N-1). Always returns D eigenvalues (zero-padded when N-1 < D).
SpectrumSummary covariance_spectrum(const Matrix& x);

/// Smallest m whose leading eigenvalues explain at least `threshold` of the
/// total variance.
std::size_t pca_effective_dim(const SpectrumSummary& s, double threshold = 0.99);

/// (sum lambda)^2 / sum lambda^2.
double participation_ratio(const SpectrumSummary& s);

}  // namespace repgeom
