#include "repgeom/similarity.hpp"

#include <cmath>

#include "repgeom/error.hpp"

namespace repgeom {
namespace {

Eigen::MatrixXd centered(const Matrix& m) {
  Eigen::MatrixXd c = m.view();
  c.rowwise() -= c.colwise().mean();
  return c;
}

struct CenteredLayer {
  Eigen::MatrixXd data;
  double self_norm = 0.0;  // ||Xc' Xc||_F
};

CenteredLayer prepare(const Matrix& m) {
  CenteredLayer layer{centered(m), 0.0};
  const Eigen::MatrixXd gram = layer.data.transpose() * layer.data;
  layer.self_norm = gram.norm();
  return layer;
}

double cka_prepared(const CenteredLayer& x, const CenteredLayer& y) {
  if (!(x.self_norm > 0.0) || !(y.self_norm > 0.0)) {
    throw NumericalError("linear CKA undefined for a zero-variance representation");
  }
  const Eigen::MatrixXd cross = y.data.transpose() * x.data;
  return cross.squaredNorm() / (x.self_norm * y.self_norm);
}

}  // namespace

double linear_cka(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw ValidationError("CKA inputs must share the sample count");
  if (x.rows() < 2) throw ValidationError("CKA needs at least 2 samples");
  return cka_prepared(prepare(x), prepare(y));
}

CkaMatrix cka_matrix(std::span<const Matrix> layers) {
  const std::size_t n = layers.size();
  if (n == 0) throw ValidationError("CKA matrix needs at least one layer");
  for (const auto& layer : layers) {
    if (layer.rows() != layers[0].rows()) {
      throw ValidationError("all layers must share the sample count");
    }
  }
  std::vector<CenteredLayer> prepared(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < n; ++i) prepared[i] = prepare(layers[i]);

  CkaMatrix out;
  out.n_layers = n;
  out.values.assign(n * n, std::nullopt);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(prepared[i].self_norm > 0.0)) {
      out.flags.push_back("layer position " + std::to_string(i) +
                          " has zero variance; its CKA entries are masked");
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) pairs.emplace_back(a, b);
  }
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a, b] = pairs[p];
    if (!(prepared[a].self_norm > 0.0) || !(prepared[b].self_norm > 0.0)) continue;
    const double v = cka_prepared(prepared[a], prepared[b]);
    out.values[a * n + b] = v;
    out.values[b * n + a] = v;
  }
  return out;
}

}  // namespace repgeom
