#include "repgeom/profile.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "repgeom/error.hpp"

namespace repgeom {
namespace {

struct Paired {
  std::vector<double> a, b;
};

Paired common_values(const LayerProfile& a, const LayerProfile& b) {
  a.validate();
  b.validate();
  Paired out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.values[i]) continue;
    auto it = std::find(b.layer_indices.begin(), b.layer_indices.end(), a.layer_indices[i]);
    if (it == b.layer_indices.end()) continue;
    const auto j = static_cast<std::size_t>(it - b.layer_indices.begin());
    if (!b.values[j]) continue;
    out.a.push_back(*a.values[i]);
    out.b.push_back(*b.values[j]);
  }
  if (out.a.size() < 3) {
    throw ValidationError("profiles '" + a.metric_name + "' and '" + b.metric_name +
                          "' share fewer than 3 unmasked layers");
  }
  return out;
}

std::optional<double> pearson_raw(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n, mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db, saa += da * da, sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<std::size_t> argmax(const LayerProfile& p) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.values[i] && (!best || *p.values[i] > *p.values[*best])) best = i;
  }
  return best;
}

}  // namespace

LayerProfile LayerProfile::from_values(std::string name, std::vector<int> layers,
                                       const std::vector<double>& values) {
  LayerProfile p;
  p.metric_name = std::move(name);
  p.layer_indices = std::move(layers);
  p.values.assign(values.begin(), values.end());
  p.validate();
  return p;
}

void LayerProfile::validate() const {
  if (layer_indices.size() != values.size()) {
    throw ValidationError("profile '" + metric_name + "': layer and value counts differ");
  }
  for (std::size_t i = 1; i < layer_indices.size(); ++i) {
    if (layer_indices[i] <= layer_indices[i - 1]) {
      throw ValidationError("profile '" + metric_name + "': layer indices must ascend");
    }
  }
  for (const auto& v : values) {
    if (v && !std::isfinite(*v)) {
      throw ValidationError("profile '" + metric_name + "': non-finite unmasked value");
    }
  }
}

double profile_correlation(const LayerProfile& a, const LayerProfile& b) {
  const Paired p = common_values(a, b);
  auto r = pearson_raw(p.a, p.b);
  if (!r) throw NumericalError("profile correlation undefined: a profile has zero variance");
  return *r;
}

PermutationResult permutation_test(const LayerProfile& a, const LayerProfile& b,
                                   std::size_t n_perm, std::uint64_t seed) {
  Paired p = common_values(a, b);
  auto r = pearson_raw(p.a, p.b);
  if (!r) throw NumericalError("profile correlation undefined: a profile has zero variance");

  PermutationResult out;
  out.observed_r = *r;
  out.n_perm = n_perm;
  out.degenerate = n_perm == 0;
  const double threshold = std::abs(*r) - 1e-12;
  std::mt19937_64 rng(seed);
  std::size_t exceed = 0;
  for (std::size_t i = 0; i < n_perm; ++i) {
    std::shuffle(p.b.begin(), p.b.end(), rng);
    const double rp = pearson_raw(p.a, p.b).value_or(0.0);
    if (std::abs(rp) >= threshold) ++exceed;
  }
  out.p = static_cast<double>(1 + exceed) / static_cast<double>(n_perm + 1);
  return out;
}

VoxelwiseCorrelation voxelwise_id_correlation(std::span<const EncodingScores> scores,
                                              const LayerProfile& id_profile,
                                              std::span<const double> voxel_mask) {
  id_profile.validate();
  if (scores.size() != id_profile.size()) {
    throw ValidationError("need one EncodingScores per profile layer");
  }
  if (scores.empty()) throw ValidationError("no encoding scores");
  const std::size_t n_vox = scores[0].per_voxel.size();
  for (const auto& s : scores) {
    if (s.per_voxel.size() != n_vox) throw ValidationError("voxel count differs across layers");
  }
  if (!voxel_mask.empty() && voxel_mask.size() != n_vox) {
    throw ValidationError("voxel mask length differs from voxel count");
  }

  std::vector<std::size_t> layers;
  std::vector<double> id;
  for (std::size_t l = 0; l < id_profile.size(); ++l) {
    if (id_profile.values[l]) layers.push_back(l), id.push_back(*id_profile.values[l]);
  }
  if (layers.size() < 3) throw ValidationError("need at least 3 unmasked layers");

  VoxelwiseCorrelation out;
  out.per_voxel.resize(n_vox);
  std::vector<double> column(layers.size());
  double total = 0.0, masked_total = 0.0;
  std::size_t masked_count = 0;
  for (std::size_t v = 0; v < n_vox; ++v) {
    for (std::size_t j = 0; j < layers.size(); ++j) column[j] = scores[layers[j]].per_voxel[v];
    auto r = pearson_raw(column, id);
    if (!r) {
      if (!pearson_raw(id, id)) throw NumericalError("Id profile has zero variance");
      out.flagged_voxels.push_back(v);
    }
    out.per_voxel[v] = r.value_or(0.0);
    total += out.per_voxel[v];
    if (!voxel_mask.empty() && voxel_mask[v] != 0.0) {
      masked_total += out.per_voxel[v];
      ++masked_count;
    }
  }
  out.mean = total / static_cast<double>(n_vox);
  if (masked_count > 0) out.masked_mean = masked_total / static_cast<double>(masked_count);
  return out;
}

PhaseReport detect_phase_transition(const LayerProfile& id_profile,
                                    const LayerProfile* surprisal_profile,
                                    const LayerProfile* encoding_profile,
                                    const PhaseOptions& options) {
  id_profile.validate();
  const auto peak = argmax(id_profile);
  if (!peak) throw ValidationError("Id profile has no unmasked values");

  PhaseReport report;
  report.peak_id_layer = id_profile.layer_indices[*peak];
  double lo = *id_profile.values[*peak], hi = lo;
  for (const auto& v : id_profile.values) {
    if (v) lo = std::min(lo, *v), hi = std::max(hi, *v);
  }
  if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) {
    report.flags.push_back("flat Id profile: peak layer is the earliest layer by convention");
  }

  if (surprisal_profile) {
    surprisal_profile->validate();
    std::optional<std::size_t> drop;
    double steepest = 0.0;
    const auto& s = surprisal_profile->values;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      if (!s[i] || !s[i + 1]) continue;
      const double diff = *s[i + 1] - *s[i];
      if (!drop || diff < steepest) drop = i, steepest = diff;
    }
    if (drop) {
      report.surprisal_drop_layer = surprisal_profile->layer_indices[*drop];
      if (steepest >= 0.0) report.flags.push_back("surprisal never decreases between layers");
    } else {
      report.flags.push_back("surprisal profile too short for drop detection");
    }
  }

  if (encoding_profile) {
    encoding_profile->validate();
    if (auto enc_peak = argmax(*encoding_profile)) {
      report.peak_encoding_layer = encoding_profile->layer_indices[*enc_peak];
    }
    try {
      const auto perm = permutation_test(id_profile, *encoding_profile, options.n_perm,
                                         options.seed);
      report.correlation_id_encoding = perm.observed_r;
      report.permutation_p = perm.p;
    } catch (const std::exception& e) {
      report.flags.push_back(std::string("Id/encoding correlation unavailable: ") + e.what());
    }
  }
  return report;
}

}  // namespace repgeom
