#include "repgeom/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "repgeom/error.hpp"

namespace repgeom {

AffineProbe AffineProbe::identity(Eigen::Index dim, int layer_index) {
  AffineProbe p;
  p.a = Eigen::MatrixXd::Identity(dim, dim);
  p.b = Eigen::VectorXd::Zero(dim);
  p.layer_index = layer_index;
  return p;
}

NormParams NormParams::standardization(Eigen::Index dim, double eps) {
  return {Eigen::VectorXd::Ones(dim), Eigen::VectorXd::Zero(dim), eps};
}

NormParams load_norm_params(const std::filesystem::path& path) {
  const Matrix m = load_matrix_file(path);
  if (m.rows() != 3) {
    throw ValidationError(path.string() + ": norm params must be 3 x D (gamma, beta, eps)");
  }
  const auto view = m.view();
  NormParams p;
  p.gamma = view.row(0).transpose();
  p.beta = view.row(1).transpose();
  p.eps = view(2, 0);
  if (!(p.eps > 0.0)) throw ValidationError(path.string() + ": eps must be positive");
  for (Eigen::Index c = 1; c < view.cols(); ++c) {
    if (view(2, c) != p.eps) {
      throw ValidationError(path.string() + ": eps row must hold one repeated value");
    }
  }
  return p;
}

std::vector<std::int64_t> load_target_ids(const std::filesystem::path& path) {
  const Matrix m = load_matrix_file(path);
  if (m.cols() != 1) throw ValidationError(path.string() + ": target ids must be N x 1");
  std::vector<std::int64_t> ids;
  ids.reserve(m.rows());
  for (double v : m.values()) {
    if (v < 0.0 || v != std::floor(v) || v > 9.0e15) {
      throw ValidationError(path.string() + ": target ids must be non-negative integers");
    }
    ids.push_back(static_cast<std::int64_t>(v));
  }
  return ids;
}

AffineProbe fit_affine_probe(const Eigen::MatrixXd& h_layer, const Eigen::MatrixXd& h_final,
                             int layer_index) {
  if (h_layer.rows() != h_final.rows()) {
    throw ValidationError("probe inputs must have the same number of samples");
  }
  const Eigen::Index n = h_layer.rows();
  const Eigen::Index d = h_layer.cols();
  if (n == 0) throw ValidationError("probe needs at least one sample");

  Eigen::MatrixXd z(n, d + 1);
  z.leftCols(d) = h_layer;
  z.col(d).setOnes();
  Eigen::MatrixXd gram = z.transpose() * z;
  const double jitter = 1e-8 * gram.trace();
  gram.diagonal().array() += jitter;
  const Eigen::MatrixXd rhs = z.transpose() * h_final;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::MatrixXd w = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !w.allFinite()) {
    throw NumericalError("affine probe solve produced non-finite weights");
  }

  AffineProbe probe;
  probe.a = w.topRows(d).transpose();
  probe.b = w.row(d).transpose();
  probe.layer_index = layer_index;
  probe.underdetermined = n < d + 1;
  const Eigen::MatrixXd err = z * w - h_final;
  probe.residual = err.squaredNorm() / static_cast<double>(n);
  return probe;
}

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& h, const NormParams& norm) {
  if (norm.gamma.size() != h.cols() || norm.beta.size() != h.cols()) {
    throw ValidationError("norm parameters do not match the hidden size");
  }
  const Eigen::VectorXd mean = h.rowwise().mean();
  Eigen::MatrixXd centered = h.colwise() - mean;
  const Eigen::VectorXd inv_sd =
      ((centered.array().square().rowwise().mean()) + norm.eps).rsqrt();
  centered = centered.array().colwise() * inv_sd.array();
  return (centered.array().rowwise() * norm.gamma.transpose().array()).rowwise() +
         norm.beta.transpose().array();
}

double token_surprisal(const Eigen::Ref<const Eigen::RowVectorXd>& logits, std::int64_t target) {
  if (target < 0 || target >= logits.size()) {
    throw ValidationError("target id " + std::to_string(target) + " outside vocabulary of " +
                          std::to_string(logits.size()));
  }
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return lse - logits[static_cast<Eigen::Index>(target)];
}

double layer_surprisal(const Eigen::MatrixXd& h_layer, const AffineProbe& probe,
                       const NormParams& norm, const Eigen::MatrixXd& unembedding,
                       std::span<const std::int64_t> targets) {
  if (static_cast<std::size_t>(h_layer.rows()) != targets.size()) {
    throw ValidationError("one target id per sample required");
  }
  if (probe.a.cols() != h_layer.cols()) throw ValidationError("probe input size mismatch");
  if (unembedding.rows() != probe.a.rows()) {
    throw ValidationError("unembedding rows must equal the probe output size");
  }
  if (unembedding.cols() < 2) throw ValidationError("vocabulary must have at least 2 tokens");
  for (auto t : targets) {
    if (t < 0 || t >= unembedding.cols()) {
      throw ValidationError("target id " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(unembedding.cols()));
    }
  }
  if (targets.empty()) throw ValidationError("no samples to evaluate");

  const Eigen::MatrixXd mapped = (h_layer * probe.a.transpose()).rowwise() + probe.b.transpose();
  const Eigen::MatrixXd logits = layer_norm(mapped, norm) * unembedding;
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    total += token_surprisal(logits.row(i), targets[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(targets.size());
}

SplitIndices split_samples(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train fraction must lie in (0, 1)");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) throw ValidationError("split leaves an empty partition");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

SurprisalProfile surprisal_profile(const RunManifest& manifest, double train_fraction,
                                   std::uint64_t seed) {
  if (!manifest.unembedding_path || !manifest.target_ids_path) {
    throw ValidationError("surprisal profile needs unembedding_path and target_ids_path in " +
                          manifest.source.string());
  }
  const Eigen::MatrixXd unembedding = load_matrix_file(*manifest.unembedding_path).to_eigen();
  const auto targets = load_target_ids(*manifest.target_ids_path);
  const auto split = split_samples(manifest.n_rows, train_fraction, seed);

  SurprisalProfile out;
  out.n_train = split.train.size();
  out.n_validation = split.validation.size();

  const Matrix final_layer = load_matrix_file(manifest.layers.back().matrix_path);
  const Eigen::MatrixXd final_train = final_layer.select_rows(split.train).to_eigen();
  const auto dim = static_cast<Eigen::Index>(final_layer.cols());

  NormParams norm;
  if (manifest.norm_params_path) {
    norm = load_norm_params(*manifest.norm_params_path);
  } else {
    norm = NormParams::standardization(dim);
    out.standardized_norm = true;
    out.warnings.push_back(
        "no norm_params_path in manifest; using parameter-free standardisation before the "
        "unembedding");
  }

  std::vector<std::int64_t> val_targets;
  for (std::size_t i : split.validation) val_targets.push_back(targets[i]);

  const std::size_t n_layers = manifest.layers.size();
  out.layer_indices.resize(n_layers);
  out.surprisal.resize(n_layers);
  out.probe_residual.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& entry = manifest.layers[l];
    const Matrix layer = l + 1 == n_layers ? final_layer : load_matrix_file(entry.matrix_path);
    const Eigen::MatrixXd val = layer.select_rows(split.validation).to_eigen();
    AffineProbe probe;
    if (l + 1 == n_layers) {
      probe = AffineProbe::identity(dim, entry.layer_index);
    } else {
      probe = fit_affine_probe(layer.select_rows(split.train).to_eigen(), final_train,
                               entry.layer_index);
      if (probe.underdetermined) {
        out.warnings.push_back("layer " + std::to_string(entry.layer_index) +
                               ": fewer training samples than hidden size + 1");
      }
    }
    out.layer_indices[l] = entry.layer_index;
    out.surprisal[l] = layer_surprisal(val, probe, norm, unembedding, val_targets);
    out.probe_residual[l] = probe.residual;
  }
  return out;
}

}  // namespace repgeom
