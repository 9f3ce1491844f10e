#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repgeom/manifest.hpp"

namespace repgeom {

/// Affine map h -> A h + b from one layer's states to the final layer's.
struct AffineProbe {
  Eigen::MatrixXd a;  // D_out x D_in
  Eigen::VectorXd b;
  int layer_index = 0;
  double residual = 0.0;  // mean squared training error per sample
  bool underdetermined = false;  // N < D_in + 1 at fit time

  static AffineProbe identity(Eigen::Index dim, int layer_index = 0);
};

/// Output normalisation applied before the unembedding.
struct NormParams {
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta;
  double eps = 1e-5;

  /// gamma = 1, beta = 0.
  static NormParams standardization(Eigen::Index dim, double eps = 1e-5);
};

/// Reads a 3 x D matrix: gamma, beta, and a row holding eps in every column.
NormParams load_norm_params(const std::filesystem::path& path);

/// Token ids stored as an N x 1 matrix of integral floats.
std::vector<std::int64_t> load_target_ids(const std::filesystem::path& path);

/// Least-squares affine fit through the normal equations of [H_t, 1] with a
/// 1e-8 * trace ridge jitter.
AffineProbe fit_affine_probe(const Eigen::MatrixXd& h_layer, const Eigen::MatrixXd& h_final,
                             int layer_index = 0);

/// Row-wise layer normalisation.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& h, const NormParams& norm);

/// -log softmax(z)[target] with max-subtracted log-sum-exp.
double token_surprisal(const Eigen::Ref<const Eigen::RowVectorXd>& logits, std::int64_t target);

/// Mean next-token surprisal in nats of LayerNorm(A h + b) W_U.
double layer_surprisal(const Eigen::MatrixXd& h_layer, const AffineProbe& probe,
                       const NormParams& norm, const Eigen::MatrixXd& unembedding,
                       std::span<const std::int64_t> targets);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded random partition; the training part has round(train_fraction * n)
/// rows.
SplitIndices split_samples(std::size_t n, double train_fraction, std::uint64_t seed);

struct SurprisalProfile {
  std::vector<int> layer_indices;
  std::vector<double> surprisal;  // nats
  std::vector<double> probe_residual;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  bool standardized_norm = false;  // manifest lacked norm params
  std::vector<std::string> warnings;
};

/// Fits a probe from every layer to the last listed layer on the training
/// split and evaluates surprisal on the validation split. The last layer uses
/// the identity probe.
SurprisalProfile surprisal_profile(const RunManifest& manifest, double train_fraction = 0.8,
                                   std::uint64_t seed = 0);

}  // namespace repgeom
