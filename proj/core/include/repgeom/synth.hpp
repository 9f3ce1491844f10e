#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repgeom/matrix.hpp"

namespace repgeom {

/// Point clouds of known intrinsic dimension.
///
///   hypercube   uniform in [0,1]^d
///   sphere      uniform on the unit d-sphere in R^(d+1)
///   gaussian    standard normal in R^d
///   swiss_roll  (t cos t, h, t sin t), t ~ U[1.5pi, 4.5pi], h ~ U[0, 21]; d = 2
///   low_rank    standard normal latent in R^d times a random d x D Gaussian map
///   torus       flat d-torus: each angle maps to (cos, sin) / (2 pi), in R^(2d)
///
/// Base coordinates that do not already span D dimensions are placed in R^D by
/// a random orthonormal embedding (low_rank maps straight to D). Isotropic
/// Gaussian noise of standard deviation `noise` is then added to every
/// ambient coordinate.
enum class ManifoldKind { Hypercube, Sphere, Gaussian, SwissRoll, LowRank, Torus };

std::optional<ManifoldKind> parse_manifold_kind(std::string_view name);
std::string_view manifold_kind_name(ManifoldKind kind);

struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::Hypercube;
  std::size_t intrinsic_dim = 2;
  std::size_t ambient_dim = 2;
  std::size_t n_points = 1000;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

Matrix synth_manifold(const ManifoldSpec& spec);

/// Haar-random D x m matrix with orthonormal columns (m <= D).
Eigen::MatrixXd random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// A small stand-in for an exported language model: per-layer last-token
/// states, unembedding, final norm, and next-token targets sampled from the
/// model's own output distribution. Layer l is a smooth map of the first q_l
/// coordinates of a shared latent, with q_l rising to a peak and falling, so
/// the layerwise Id profile is unimodal.
struct FixtureConfig {
  std::string model_name = "fixture-tiny";
  std::size_t n_layers = 8;
  std::size_t n_samples = 2000;
  std::size_t hidden = 32;
  std::size_t vocab = 64;
  std::size_t repeats = 1;
  std::optional<std::int64_t> checkpoint_step;
  std::uint64_t seed = 0;
  DType dtype = DType::Float32;
};

/// Latent dimensions used by each layer.
std::vector<std::size_t> fixture_layer_dims(std::size_t n_layers);

/// Writes matrices and one manifest per repeat into `dir`; returns the
/// manifest paths.
std::vector<std::filesystem::path> write_fixture_model(const FixtureConfig& config,
                                                       const std::filesystem::path& dir);

}  // namespace repgeom
