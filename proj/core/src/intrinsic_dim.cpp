#include "repgeom/intrinsic_dim.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "repgeom/error.hpp"

namespace repgeom {
namespace {

constexpr double kLowerBracket = 1e-3;
constexpr double kUnknownAmbientUpper = 1000.0;
constexpr double kBrentTol = 1e-9;

double log_beta_symmetric(std::size_t k) {
  const double kk = static_cast<double>(k);
  return 2.0 * std::lgamma(kk) - std::lgamma(2.0 * kk);
}

struct LogRatios {
  std::vector<double> log_mu;
  double sum = 0.0;
  std::size_t n_unit = 0;
};

// For k > 1 the density vanishes at mu == 1 for every d, so those ratios
// carry no information about d and are left out of the likelihood.
LogRatios prepare(const MuRatios& mu, bool drop_unit) {
  LogRatios out;
  out.log_mu.reserve(mu.values.size());
  for (double m : mu.values) {
    if (!(m >= 1.0) || !std::isfinite(m)) {
      throw ValidationError("ratios must be finite and >= 1");
    }
    if (m == 1.0) {
      ++out.n_unit;
      if (drop_unit) continue;
    }
    const double l = std::log(m);
    out.log_mu.push_back(l);
    out.sum += l;
  }
  return out;
}

void require_usable(const MuRatios& mu, const LogRatios& lr) {
  if (mu.values.size() < kMinRatios) {
    throw NumericalError("need at least " + std::to_string(kMinRatios) + " ratios at k=" +
                         std::to_string(mu.k) + ", got " + std::to_string(mu.values.size()));
  }
  if (lr.sum <= 0.0) {
    throw NumericalError("all ratios equal 1 at k=" + std::to_string(mu.k) +
                         "; intrinsic dimension is undefined");
  }
}

// -L(d) and dL/dd on prepared log-ratios.
double neg_loglik(const LogRatios& lr, std::size_t k, double log_beta, double d) {
  const double n = static_cast<double>(lr.log_mu.size());
  double tail = 0.0;
  if (k > 1) {
    for (double l : lr.log_mu) tail += std::log(-std::expm1(-d * l));
  }
  const double kk = static_cast<double>(k);
  return -(n * (std::log(d) - log_beta) + (kk - 1.0) * tail - (d * kk + 1.0) * lr.sum);
}

double score(const LogRatios& lr, std::size_t k, double d) {
  const double n = static_cast<double>(lr.log_mu.size());
  double tail = 0.0;
  if (k > 1) {
    for (double l : lr.log_mu) tail += l / std::expm1(d * l);
  }
  const double kk = static_cast<double>(k);
  return n / d + (kk - 1.0) * tail - kk * lr.sum;
}

// Brent's parabolic-interpolation minimiser on [a, b].
template <typename F>
double brent_minimize(F&& f, double a, double b, double tol) {
  constexpr double kGolden = 0.3819660112501051;
  constexpr int kMaxIter = 500;
  double x = a + kGolden * (b - a);
  double w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    const double m = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + 1e-12;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = x < m ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x < m ? b : a) - x;
      d = kGolden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      (u < x ? b : a) = x;
      v = w, fv = fw;
      w = x, fw = fx;
      x = u, fx = fu;
    } else {
      (u < x ? a : b) = u;
      if (fu <= fw || w == x) {
        v = w, fv = fw;
        w = u, fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u, fv = fu;
      }
    }
  }
  return x;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

const ScaleEntry* ScaleCurve::at(std::size_t k) const {
  for (const auto& e : entries) {
    if (e.k == k) return &e;
  }
  return nullptr;
}

MuRatios mu_ratios(const NeighborTable& table, std::size_t k) {
  if (k == 0 || 2 * k > table.k_max()) {
    throw ValidationError("scale k=" + std::to_string(k) + " needs 2k <= k_max=" +
                          std::to_string(table.k_max()));
  }
  MuRatios mu;
  mu.k = k;
  mu.ambient_dim = table.ambient_dim();
  mu.values.reserve(table.n_points());
  for (std::size_t i = 0; i < table.n_points(); ++i) {
    const double rk = table.r(i, k);
    if (rk == 0.0) {
      ++mu.excluded;
      continue;
    }
    mu.values.push_back(table.r(i, 2 * k) / rk);
  }
  return mu;
}

IdEstimate estimate_twonn(const MuRatios& mu) {
  if (mu.k != 1) throw ValidationError("TwoNN needs ratios at k=1");
  const LogRatios lr = prepare(mu, false);
  require_usable(mu, lr);
  const double n = static_cast<double>(lr.log_mu.size());
  IdEstimate est;
  est.k = 1;
  est.n_used = lr.log_mu.size();
  est.id = n / lr.sum;
  est.log_likelihood = n * std::log(est.id) - (est.id + 1.0) * lr.sum;
  est.n_unit_ratios = lr.n_unit;
  est.unit_ratio_warning = static_cast<double>(lr.n_unit) > 0.01 * n;
  if (mu.ambient_dim > 0 && est.id > 4.0 * static_cast<double>(mu.ambient_dim)) {
    std::ostringstream msg;
    msg << "TwoNN estimate " << est.id << " exceeds 4x the ambient dimension "
        << mu.ambient_dim;
    throw NumericalError(msg.str());
  }
  return est;
}

double gride_log_likelihood(std::span<const double> mu, std::size_t k, double d) {
  MuRatios tmp;
  tmp.k = k;
  tmp.values.assign(mu.begin(), mu.end());
  const LogRatios lr = prepare(tmp, k > 1);
  return -neg_loglik(lr, k, log_beta_symmetric(k), d);
}

IdEstimate estimate_gride(const MuRatios& mu, std::optional<double> upper_bound) {
  if (mu.k == 0) throw ValidationError("scale k must be >= 1");
  const LogRatios lr = prepare(mu, mu.k > 1);
  if (lr.log_mu.size() < kMinRatios) {
    throw NumericalError("need at least " + std::to_string(kMinRatios) +
                         " ratios above 1 at k=" + std::to_string(mu.k));
  }
  require_usable(mu, lr);

  const double lo = kLowerBracket;
  const double hi = upper_bound ? *upper_bound
                    : mu.ambient_dim > 0 ? 4.0 * static_cast<double>(mu.ambient_dim)
                                         : kUnknownAmbientUpper;
  if (!(hi > lo)) throw ValidationError("upper bracket must exceed 1e-3");
  const double log_beta = log_beta_symmetric(mu.k);
  auto f = [&](double d) { return neg_loglik(lr, mu.k, log_beta, d); };

  double d = brent_minimize(f, lo, hi, kBrentTol);

  // The likelihood is concave in d, so its score is decreasing: a sign
  // change inside the bracket certifies an interior maximum.
  if (score(lr, mu.k, hi) >= 0.0 || score(lr, mu.k, lo) <= 0.0) {
    std::ostringstream msg;
    msg << "no interior likelihood maximum in (" << lo << ", " << hi << "] at k=" << mu.k
        << " (Brent stopped at " << d << ")";
    throw NumericalError(msg.str());
  }
  // Polish by bisection on the score around the Brent point.
  double a = std::max(lo, d - 1e-4), b = std::min(hi, d + 1e-4);
  while (a > lo && score(lr, mu.k, a) <= 0.0) a = std::max(lo, a - 2.0 * (d - a) - 1e-4);
  while (b < hi && score(lr, mu.k, b) >= 0.0) b = std::min(hi, b + 2.0 * (b - d) + 1e-4);
  for (int iter = 0; iter < 200 && b - a > 1e-13 * std::max(1.0, d); ++iter) {
    const double m = 0.5 * (a + b);
    (score(lr, mu.k, m) > 0.0 ? a : b) = m;
  }
  d = 0.5 * (a + b);

  IdEstimate est;
  est.id = d;
  est.k = mu.k;
  est.n_used = lr.log_mu.size();
  est.log_likelihood = -f(d);
  est.n_unit_ratios = lr.n_unit;
  est.unit_ratio_warning =
      static_cast<double>(lr.n_unit) > 0.01 * static_cast<double>(mu.values.size());
  return est;
}

ScaleCurve scale_sweep(const NeighborTable& table) {
  ScaleCurve curve;
  for (std::size_t k = 1; 2 * k <= table.k_max() && k <= kMaxSweepScale; k *= 2) {
    ScaleEntry entry;
    entry.k = k;
    try {
      entry.estimate = estimate_gride(mu_ratios(table, k));
    } catch (const NumericalError& e) {
      entry.error = e.what();
    }
    curve.entries.push_back(std::move(entry));
  }
  return curve;
}

namespace {

// Mean |slope| of every valid window, keyed by the window's centre scale.
std::map<std::size_t, double> window_scores(const ScaleCurve& curve, std::size_t window) {
  std::map<std::size_t, double> scores;
  const auto& e = curve.entries;
  if (e.size() < window) return scores;
  for (std::size_t s = 0; s + window <= e.size(); ++s) {
    bool valid = true;
    for (std::size_t j = s; j < s + window; ++j) valid = valid && e[j].estimate.has_value();
    if (!valid) continue;
    double total = 0.0;
    for (std::size_t j = s; j + 1 < s + window; ++j) {
      const double dlog = std::log2(static_cast<double>(e[j + 1].k)) -
                          std::log2(static_cast<double>(e[j].k));
      total += std::abs(e[j + 1].estimate->id - e[j].estimate->id) / dlog;
    }
    scores[e[s + window / 2].k] = window > 1 ? total / static_cast<double>(window - 1) : 0.0;
  }
  return scores;
}

}  // namespace

std::size_t select_scale(const ScaleCurve& curve, std::size_t window) {
  return select_scale(std::span<const ScaleCurve>(&curve, 1), window);
}

std::size_t select_scale(std::span<const ScaleCurve> curves, std::size_t window) {
  if (window == 0) throw ValidationError("plateau window must be >= 1");
  if (curves.empty()) throw ValidationError("no scale curves to select from");

  std::map<std::size_t, double> combined;
  for (std::size_t c = 0; c < curves.size(); ++c) {
    auto scores = window_scores(curves[c], window);
    if (c == 0) {
      combined = std::move(scores);
      continue;
    }
    for (auto it = combined.begin(); it != combined.end();) {
      auto found = scores.find(it->first);
      if (found == scores.end()) {
        it = combined.erase(it);
      } else {
        it->second += found->second;
        ++it;
      }
    }
  }
  if (combined.empty()) {
    throw NumericalError("fewer than " + std::to_string(window) +
                         " consecutive valid scale entries; cannot select a plateau");
  }

  // Middle of the first curve's valid entries, in log2 k.
  std::vector<double> valid_logk;
  for (const auto& e : curves[0].entries) {
    if (e.estimate) valid_logk.push_back(std::log2(static_cast<double>(e.k)));
  }
  const double middle = 0.5 * (valid_logk.front() + valid_logk.back());

  std::size_t best_k = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& [k, total] : combined) {
    const double s = total / static_cast<double>(curves.size());
    const double tol = 1e-12 * std::max(1.0, std::abs(best_score));
    if (best_k == 0 || s < best_score - tol) {
      best_k = k, best_score = s;
      continue;
    }
    if (std::abs(s - best_score) <= tol) {
      const double dist_new = std::abs(std::log2(static_cast<double>(k)) - middle);
      const double dist_old = std::abs(std::log2(static_cast<double>(best_k)) - middle);
      // Iteration is in increasing k, so "<=" prefers the larger scale.
      if (dist_new <= dist_old + 1e-12) best_k = k, best_score = std::min(best_score, s);
    }
  }
  return best_k;
}

std::span<const ScalePreset> scale_presets() {
  static constexpr std::array<ScalePreset, 13> kPresets{{
      {"opt-125m", std::nullopt, 64},
      {"opt-1.3b", std::nullopt, 32},
      {"opt-13b", std::nullopt, 32},
      {"pythia-6.9b", std::nullopt, 16},
      {"pythia-6.9b", 64000, 16},
      {"pythia-6.9b", 32000, 32},
      {"pythia-6.9b", 16000, 32},
      {"pythia-6.9b", 8000, 32},
      {"pythia-6.9b", 4000, 64},
      {"pythia-6.9b", 3000, 64},
      {"pythia-6.9b", 2000, 16},
      {"pythia-6.9b", 1000, 16},
      {"pythia-6.9b", 512, 16},
  }};
  return kPresets;
}

std::optional<std::size_t> scale_preset(std::string_view model,
                                        std::optional<std::int64_t> checkpoint_step) {
  std::string name = lowercase(model);
  if (auto slash = name.rfind('/'); slash != std::string::npos) name = name.substr(slash + 1);
  if (name.ends_with("-deduped")) name.resize(name.size() - 8);

  constexpr std::int64_t kFinalPythiaStep = 143000;
  const bool final_model = !checkpoint_step || *checkpoint_step == kFinalPythiaStep;
  for (const auto& p : scale_presets()) {
    if (p.model != name) continue;
    if (final_model && !p.checkpoint_step) return p.k;
    if (!final_model && p.checkpoint_step == checkpoint_step) return p.k;
  }
  return std::nullopt;
}

double normalize_id(const IdEstimate& est, std::size_t ambient_dim,
                    std::optional<double> log_base) {
  if (ambient_dim < 2) throw ValidationError("normalisation needs an embedding size >= 2");
  double denom = std::log(static_cast<double>(ambient_dim));
  if (log_base) {
    if (!(*log_base > 0.0) || *log_base == 1.0) {
      throw ValidationError("logarithm base must be positive and not 1");
    }
    denom /= std::log(*log_base);
  }
  return est.id / denom;
}

}  // namespace repgeom
