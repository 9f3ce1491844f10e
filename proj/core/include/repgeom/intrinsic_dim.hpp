#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "repgeom/neighbors.hpp"

namespace repgeom {

/// Neighbour-distance ratios mu_i = r_{i,2k} / r_{i,k} at one scale k.
struct MuRatios {
  std::size_t k = 1;
  std::vector<double> values;
  std::size_t excluded = 0;     // points with r_{i,k} == 0
  std::size_t ambient_dim = 0;  // 0 if unknown
};

struct IdEstimate {
  double id = 0.0;
  std::size_t k = 1;
  std::size_t n_used = 0;
  double log_likelihood = 0.0;
  std::size_t n_unit_ratios = 0;  // ratios exactly equal to 1
  bool unit_ratio_warning = false;  // more than 1% of ratios equal 1
};

struct ScaleEntry {
  std::size_t k = 1;
  std::optional<IdEstimate> estimate;  // empty when estimation failed
  std::string error;
};

struct ScaleCurve {
  std::vector<ScaleEntry> entries;
  std::size_t selected_k = 0;
  bool selected_by_override = false;

  const ScaleEntry* at(std::size_t k) const;
};

inline constexpr std::size_t kMaxSweepScale = 4096;
inline constexpr std::size_t kMinRatios = 10;

/// mu_i for every point with r_{i,k} > 0. Requires 2k <= table.k_max().
MuRatios mu_ratios(const NeighborTable& table, std::size_t k);

/// Closed-form TwoNN maximum likelihood: n / sum(ln mu). Requires k == 1.
IdEstimate estimate_twonn(const MuRatios& mu);

/// Log-likelihood of the generalised ratio distribution at dimension d.
double gride_log_likelihood(std::span<const double> mu, std::size_t k, double d);

/// Maximises the GRIDE likelihood on (1e-3, upper] by bracketed Brent search,
/// with upper = 4 * ambient_dim (or `upper_bound` if given, or 1000 when the
/// ambient dimension is unknown). Throws NumericalError when the maximum sits
/// on the bracket boundary.
IdEstimate estimate_gride(const MuRatios& mu, std::optional<double> upper_bound = std::nullopt);

/// GRIDE at k = 1, 2, 4, ... up to min(k_max / 2, 4096). Failures are
/// recorded per entry and the sweep continues. selected_k is left at 0.
ScaleCurve scale_sweep(const NeighborTable& table);

/// Centre of the length-`window` run of consecutive valid entries with the
/// smallest mean |delta id / delta log2 k|. Ties go to the run whose centre is
/// nearest the middle of the curve, then to the larger k.
std::size_t select_scale(const ScaleCurve& curve, std::size_t window = 3);

/// One scale shared by several curves (e.g. every layer of a model): the
/// window score is averaged across curves.
std::size_t select_scale(std::span<const ScaleCurve> curves, std::size_t window = 3);

/// Published per-model scales. Returns nullopt for unknown names.
std::optional<std::size_t> scale_preset(std::string_view model,
                                        std::optional<std::int64_t> checkpoint_step = {});

struct ScalePreset {
  std::string_view model;
  std::optional<std::int64_t> checkpoint_step;
  std::size_t k;
};
std::span<const ScalePreset> scale_presets();

/// id / log_base(D). Natural log unless `log_base` is given.
double normalize_id(const IdEstimate& est, std::size_t ambient_dim,
                    std::optional<double> log_base = std::nullopt);

}  // namespace repgeom
