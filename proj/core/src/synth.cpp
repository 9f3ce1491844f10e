#include "repgeom/synth.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "repgeom/error.hpp"
#include "repgeom/manifest.hpp"
#include "repgeom/probe.hpp"

namespace repgeom {
namespace {

constexpr std::array<std::pair<std::string_view, ManifoldKind>, 6> kKinds{{
    {"hypercube", ManifoldKind::Hypercube},
    {"sphere", ManifoldKind::Sphere},
    {"gaussian", ManifoldKind::Gaussian},
    {"swiss_roll", ManifoldKind::SwissRoll},
    {"low_rank", ManifoldKind::LowRank},
    {"torus", ManifoldKind::Torus},
}};

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace

std::optional<ManifoldKind> parse_manifold_kind(std::string_view name) {
  for (const auto& [n, k] : kKinds) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::string_view manifold_kind_name(ManifoldKind kind) {
  for (const auto& [n, k] : kKinds) {
    if (k == kind) return n;
  }
  return "unknown";
}

Eigen::MatrixXd random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (cols > rows) throw ValidationError("cannot embed more columns than rows orthonormally");
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd g = gaussian_matrix(static_cast<Eigen::Index>(rows),
                                            static_cast<Eigen::Index>(cols), rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  // Sign fix against R's diagonal makes the draw Haar-distributed.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(g.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }
  return q;
}

Matrix synth_manifold(const ManifoldSpec& spec) {
  const std::size_t d = spec.intrinsic_dim;
  const std::size_t amb = spec.ambient_dim;
  const auto n = static_cast<Eigen::Index>(spec.n_points);
  if (spec.n_points == 0) throw ValidationError("need at least one point");
  if (d == 0 || amb == 0) throw ValidationError("dimensions must be positive");
  if (d > amb) throw ValidationError("intrinsic dimension exceeds ambient dimension");
  if (!(spec.noise >= 0.0)) throw ValidationError("noise must be non-negative");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd base;
  switch (spec.kind) {
    case ManifoldKind::Hypercube:
      base.resize(n, static_cast<Eigen::Index>(d));
      for (Eigen::Index i = 0; i < base.size(); ++i) base.data()[i] = unif(rng);
      break;
    case ManifoldKind::Gaussian:
      base = gaussian_matrix(n, static_cast<Eigen::Index>(d), rng);
      break;
    case ManifoldKind::Sphere: {
      if (d + 1 > amb) throw ValidationError("a d-sphere needs ambient dimension >= d + 1");
      base = gaussian_matrix(n, static_cast<Eigen::Index>(d + 1), rng);
      base.rowwise().normalize();
      break;
    }
    case ManifoldKind::SwissRoll: {
      if (d != 2) throw ValidationError("swiss_roll has intrinsic dimension 2");
      if (amb < 3) throw ValidationError("swiss_roll needs ambient dimension >= 3");
      base.resize(n, 3);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = 1.5 * std::numbers::pi * (1.0 + 2.0 * unif(rng));
        const double h = 21.0 * unif(rng);
        base(i, 0) = t * std::cos(t);
        base(i, 1) = h;
        base(i, 2) = t * std::sin(t);
      }
      break;
    }
    case ManifoldKind::LowRank: {
      const Eigen::MatrixXd latent = gaussian_matrix(n, static_cast<Eigen::Index>(d), rng);
      const Eigen::MatrixXd map =
          gaussian_matrix(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(amb), rng);
      base = latent * map;
      break;
    }
    case ManifoldKind::Torus: {
      if (2 * d > amb) throw ValidationError("a flat d-torus needs ambient dimension >= 2d");
      base.resize(n, static_cast<Eigen::Index>(2 * d));
      const double radius = 1.0 / (2.0 * std::numbers::pi);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
          const double angle = 2.0 * std::numbers::pi * unif(rng);
          base(i, 2 * j) = radius * std::cos(angle);
          base(i, 2 * j + 1) = radius * std::sin(angle);
        }
      }
      break;
    }
  }

  Eigen::MatrixXd points;
  if (static_cast<std::size_t>(base.cols()) == amb) {
    points = std::move(base);
  } else {
    const Eigen::MatrixXd embed =
        random_orthonormal(amb, static_cast<std::size_t>(base.cols()), rng());
    points = base * embed.transpose();
  }
  if (spec.noise > 0.0) {
    for (Eigen::Index i = 0; i < points.size(); ++i) points.data()[i] += spec.noise * normal(rng);
  }
  return Matrix::from_eigen(points);
}

std::vector<std::size_t> fixture_layer_dims(std::size_t n_layers) {
  // Rises from 2 to a peak of 10 around 55% depth, then falls to 3.
  std::vector<std::size_t> dims(n_layers);
  if (n_layers == 0) return dims;
  const double peak_pos = 0.55 * static_cast<double>(n_layers - 1);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const double x = static_cast<double>(l);
    double q = 0.0;
    if (x <= peak_pos) {
      q = peak_pos > 0 ? 2.0 + 8.0 * x / peak_pos : 10.0;
    } else {
      q = 10.0 - 7.0 * (x - peak_pos) / (static_cast<double>(n_layers - 1) - peak_pos);
    }
    dims[l] = static_cast<std::size_t>(std::lround(q));
  }
  return dims;
}

std::vector<std::filesystem::path> write_fixture_model(const FixtureConfig& config,
                                                       const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (config.n_layers == 0 || config.n_samples < 10 || config.hidden < 12 || config.vocab < 2 ||
      config.repeats == 0) {
    throw ValidationError("fixture needs >= 1 layer, >= 10 samples, hidden >= 12, vocab >= 2");
  }
  fs::create_directories(dir);
  const auto dims = fixture_layer_dims(config.n_layers);
  const std::size_t latent_dim = 10;
  const auto hidden = static_cast<Eigen::Index>(config.hidden);
  const auto n = static_cast<Eigen::Index>(config.n_samples);

  // Model weights are shared by all repeats; only the samples change.
  std::mt19937_64 model_rng(config.seed);
  const Eigen::MatrixXd mixing = gaussian_matrix(hidden, static_cast<Eigen::Index>(latent_dim),
                                                 model_rng) / std::sqrt(3.0);
  const Eigen::MatrixXd bias = gaussian_matrix(hidden, 1, model_rng) * 0.3;
  std::vector<double> gains(config.n_layers);
  std::uniform_real_distribution<double> gain_dist(0.8, 1.2);
  for (double& g : gains) g = gain_dist(model_rng);
  const Eigen::MatrixXd unembedding =
      gaussian_matrix(hidden, static_cast<Eigen::Index>(config.vocab), model_rng) *
      (1.5 / std::sqrt(static_cast<double>(config.hidden)));
  NormParams norm;
  norm.gamma = (Eigen::VectorXd::Ones(hidden) + 0.1 * gaussian_matrix(hidden, 1, model_rng)).eval();
  norm.beta = 0.1 * gaussian_matrix(hidden, 1, model_rng);
  norm.eps = 1e-5;

  const auto write = [&](const Eigen::MatrixXd& m, const fs::path& path) {
    write_matrix(Matrix::from_eigen(m, config.dtype), path);
  };
  write(unembedding, dir / "unembedding.lmrx");
  Eigen::MatrixXd norm_rows(3, hidden);
  norm_rows.row(0) = norm.gamma.transpose();
  norm_rows.row(1) = norm.beta.transpose();
  norm_rows.row(2).setConstant(norm.eps);
  write_matrix(Matrix::from_eigen(norm_rows, DType::Float64), dir / "norm_params.lmrx");

  std::vector<fs::path> manifests;
  for (std::size_t rep = 0; rep < config.repeats; ++rep) {
    const std::uint64_t sample_seed = config.seed * 1000003ULL + 7919ULL * (rep + 1);
    std::mt19937_64 rng(sample_seed);
    const Eigen::MatrixXd latent = gaussian_matrix(n, static_cast<Eigen::Index>(latent_dim), rng);
    const std::string prefix = "r" + std::to_string(rep) + "_";

    RunManifest manifest;
    manifest.model_name = config.model_name;
    manifest.checkpoint_step = config.checkpoint_step;
    manifest.sample_meta = {config.n_samples, 20, static_cast<std::int64_t>(sample_seed)};

    Eigen::MatrixXd last;
    for (std::size_t l = 0; l < config.n_layers; ++l) {
      const auto q = static_cast<Eigen::Index>(dims[l]);
      Eigen::MatrixXd pre = latent.leftCols(q) * mixing.leftCols(q).transpose();
      pre.rowwise() += bias.col(0).transpose();
      Eigen::MatrixXd h = (gains[l] * pre.array()).tanh().matrix() + 0.5 * pre;
      const fs::path file = dir / (prefix + "layer_" + std::to_string(l) + ".lmrx");
      write(h, file);
      manifest.layers.push_back({static_cast<int>(l), file});
      last = Matrix::from_eigen(h, config.dtype).to_eigen();
    }

    const Eigen::MatrixXd logits = layer_norm(last, norm) * unembedding;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd targets(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::RowVectorXd row = logits.row(i);
      const Eigen::ArrayXd p = (row.array() - row.maxCoeff()).exp();
      double u = unif(rng) * p.sum();
      Eigen::Index tok = 0;
      while (tok + 1 < p.size() && u >= p[tok]) u -= p[tok++];
      targets(i, 0) = static_cast<double>(tok);
    }
    write_matrix(Matrix::from_eigen(targets, DType::Float32), dir / (prefix + "targets.lmrx"));

    manifest.unembedding_path = dir / "unembedding.lmrx";
    manifest.norm_params_path = dir / "norm_params.lmrx";
    manifest.target_ids_path = dir / (prefix + "targets.lmrx");
    const fs::path manifest_path = dir / ("manifest_r" + std::to_string(rep) + ".json");
    save_manifest(manifest, manifest_path);
    manifests.push_back(manifest_path);
  }
  return manifests;
}

}  // namespace repgeom
