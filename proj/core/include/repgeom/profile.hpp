#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "repgeom/encoding.hpp"

namespace repgeom {

/// One scalar per layer; missing layers are masked (empty).
struct LayerProfile {
  std::string metric_name;
  std::vector<int> layer_indices;
  std::vector<std::optional<double>> values;

  struct Meta {
    std::string model;
    std::optional<std::int64_t> checkpoint_step;
    std::size_t repeats = 1;
    std::vector<std::optional<double>> std_dev;  // across repeats, when repeats > 1
  } meta;

  static LayerProfile from_values(std::string name, std::vector<int> layers,
                                  const std::vector<double>& values);

  /// Throws ValidationError unless indices ascend and sizes/finiteness hold.
  void validate() const;
  std::size_t size() const { return values.size(); }
};

/// Pearson r over layers unmasked in both profiles (matched by layer index).
/// Needs >= 3 shared layers and nonzero variance on both sides.
double profile_correlation(const LayerProfile& a, const LayerProfile& b);

struct PermutationResult {
  double p = 1.0;
  double observed_r = 0.0;
  std::size_t n_perm = 0;
  bool degenerate = false;  // n_perm == 0
};

/// Shuffles b's layer labels n_perm times; p = (1 + #{|r_perm| >= |r_obs|}) /
/// (n_perm + 1).
PermutationResult permutation_test(const LayerProfile& a, const LayerProfile& b,
                                   std::size_t n_perm = 10000, std::uint64_t seed = 0);

struct VoxelwiseCorrelation {
  std::vector<double> per_voxel;
  double mean = 0.0;
  std::optional<double> masked_mean;
  std::vector<std::size_t> flagged_voxels;  // constant score profile; r set to 0
};

/// Correlation across layers, voxel by voxel, between encoding scores and an
/// Id profile. scores[l] belongs to the profile's l-th layer. The optional
/// mask keeps voxels with a nonzero entry.
VoxelwiseCorrelation voxelwise_id_correlation(std::span<const EncodingScores> scores,
                                              const LayerProfile& id_profile,
                                              std::span<const double> voxel_mask = {});

struct PhaseReport {
  int peak_id_layer = 0;
  std::optional<int> peak_encoding_layer;
  std::optional<int> surprisal_drop_layer;
  std::optional<double> correlation_id_encoding;
  std::optional<double> permutation_p;
  std::vector<std::string> flags;
};

struct PhaseOptions {
  std::size_t n_perm = 10000;
  std::uint64_t seed = 0;
};

/// Peak layer = argmax (earliest on ties). Surprisal drop layer = start of the
/// most negative forward difference.
PhaseReport detect_phase_transition(const LayerProfile& id_profile,
                                    const LayerProfile* surprisal_profile = nullptr,
                                    const LayerProfile* encoding_profile = nullptr,
                                    const PhaseOptions& options = {});

}  // namespace repgeom
