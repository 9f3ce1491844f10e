#pragma once

// Reference implementations used only by tests. Each one takes the slow,
// obvious route so that it shares no code path with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repgeom/matrix.hpp"

namespace oracle {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline Eigen::MatrixXd uniform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

inline Eigen::MatrixXd orthogonal(Eigen::Index n, std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(n, n, seed));
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

// All pairwise distances by double loop, then a full sort per point.
inline std::vector<std::vector<double>> knn(const Eigen::MatrixXd& x, std::size_t k) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::vector<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double s = 0.0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double diff = x(static_cast<Eigen::Index>(i), c) - x(static_cast<Eigen::Index>(j), c);
        s += diff * diff;
      }
      d.push_back(std::sqrt(s));
    }
    std::sort(d.begin(), d.end());
    d.resize(k);
    out[i] = std::move(d);
  }
  return out;
}

// Eigenvalues of the explicitly formed covariance matrix, descending.
inline std::vector<double> covariance_eigenvalues(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

// Centred-Gram (HSIC) form of linear CKA.
inline double cka_gram(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd h =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd k = h * (x * x.transpose()) * h;
  const Eigen::MatrixXd l = h * (y * y.transpose()) * h;
  const double kl = (k.array() * l.array()).sum();
  const double kk = (k.array() * k.array()).sum();
  const double ll = (l.array() * l.array()).sum();
  return kl / std::sqrt(kk * ll);
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n, mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

// Affine least squares through the pseudo-inverse of [H, 1].
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> affine_pinv(const Eigen::MatrixXd& h,
                                                               const Eigen::MatrixXd& target) {
  Eigen::MatrixXd aug(h.rows(), h.cols() + 1);
  aug << h, Eigen::VectorXd::Ones(h.rows());
  const Eigen::MatrixXd w = aug.completeOrthogonalDecomposition().pseudoInverse() * target;
  Eigen::MatrixXd a = w.topRows(h.cols()).transpose();
  Eigen::VectorXd b = w.row(h.cols()).transpose();
  return {a, b};
}

inline repgeom::Matrix to_matrix(const Eigen::MatrixXd& m) { return repgeom::Matrix::from_eigen(m); }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("repgeom_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
