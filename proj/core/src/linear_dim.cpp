#include "repgeom/linear_dim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "repgeom/error.hpp"

namespace repgeom {

SpectrumSummary make_spectrum(std::vector<double> eigenvalues) {
  if (eigenvalues.empty()) throw ValidationError("empty spectrum");
  std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
  const double top = eigenvalues.front();
  for (double& v : eigenvalues) {
    if (!std::isfinite(v)) throw ValidationError("non-finite eigenvalue");
    if (v < 0.0) {
      if (v < -1e-10 * std::max(top, 0.0)) {
        throw NumericalError("covariance spectrum has a significantly negative eigenvalue");
      }
      v = 0.0;
    }
  }
  SpectrumSummary s;
  s.eigenvalues = std::move(eigenvalues);
  for (double v : s.eigenvalues) s.total_variance += v;
  return s;
}

SpectrumSummary covariance_spectrum(const Matrix& x) {
  if (x.rows() < 2) throw ValidationError("covariance spectrum needs at least 2 rows");
  Eigen::MatrixXd centered = x.view();
  centered.rowwise() -= centered.colwise().mean();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double scale = 1.0 / static_cast<double>(x.rows() - 1);
  std::vector<double> eig(x.cols(), 0.0);
  for (Eigen::Index i = 0; i < sv.size(); ++i) eig[static_cast<std::size_t>(i)] = sv[i] * sv[i] * scale;
  return make_spectrum(std::move(eig));
}

std::size_t pca_effective_dim(const SpectrumSummary& s, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ValidationError("variance threshold must lie in (0, 1]");
  }
  if (!(s.total_variance > 0.0)) throw NumericalError("zero total variance");
  // Relative slack so that e.g. 99 of 100 equal eigenvalues meets 0.99.
  const double target = threshold * s.total_variance * (1.0 - 1e-12);
  double cumulative = 0.0;
  for (std::size_t m = 0; m < s.eigenvalues.size(); ++m) {
    cumulative += s.eigenvalues[m];
    if (cumulative >= target) return m + 1;
  }
  return s.eigenvalues.size();
}

double participation_ratio(const SpectrumSummary& s) {
  if (!(s.total_variance > 0.0)) throw NumericalError("zero total variance");
  // Scaling by the top eigenvalue keeps the squares in range and makes a
  // flat spectrum give exactly D.
  const double top = s.eigenvalues.front();
  double sum = 0.0, sum_sq = 0.0;
  for (double v : s.eigenvalues) {
    const double u = v / top;
    sum += u;
    sum_sq += u * u;
  }
  return sum * sum / sum_sq;
}

}  // namespace repgeom
