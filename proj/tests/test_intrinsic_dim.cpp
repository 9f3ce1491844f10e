#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "repgeom/error.hpp"
#include "repgeom/intrinsic_dim.hpp"
#include "repgeom/neighbors.hpp"
#include "repgeom/synth.hpp"

using namespace repgeom;

namespace {

MuRatios ratios(std::vector<double> v, std::size_t k = 1, std::size_t ambient = 0) {
  MuRatios mu;
  mu.k = k;
  mu.values = std::move(v);
  mu.ambient_dim = ambient;
  return mu;
}

std::vector<double> repeat(const std::vector<double>& v, int times) {
  std::vector<double> out;
  for (int t = 0; t < times; ++t) out.insert(out.end(), v.begin(), v.end());
  return out;
}

// Independent evaluation of the GRIDE log-density, straight from the
// generalised-ratio formula.
double direct_loglik(const std::vector<double>& mu, std::size_t k, double d) {
  const double kk = static_cast<double>(k);
  const double log_b = std::lgamma(kk) + std::lgamma(kk) - std::lgamma(2 * kk);
  double total = 0.0;
  for (double m : mu) {
    total += std::log(d) + (kk - 1) * std::log(std::pow(m, d) - 1.0) - log_b -
             (d * (2 * kk - 1) + 1) * std::log(m);
  }
  return total;
}

ScaleCurve curve_of(const std::vector<std::pair<std::size_t, double>>& pts) {
  ScaleCurve c;
  for (auto [k, id] : pts) {
    ScaleEntry e;
    e.k = k;
    if (!std::isnan(id)) {
      IdEstimate est;
      est.id = id;
      est.k = k;
      e.estimate = est;
    }
    c.entries.push_back(e);
  }
  return c;
}

NeighborTable table_for(const ManifoldSpec& spec, std::size_t k_max) {
  return filter_degenerate(knn_exact(synth_manifold(spec), k_max)).table;
}

}  // namespace

TEST(MuRatios, HandGeometry) {
  const NeighborTable t = knn_exact(Matrix(3, 1, {0, 1, 3}), 2);
  const MuRatios mu = mu_ratios(t, 1);
  ASSERT_EQ(mu.values.size(), 3u);
  EXPECT_DOUBLE_EQ(mu.values[0], 3.0);
  EXPECT_DOUBLE_EQ(mu.values[1], 2.0);
  EXPECT_DOUBLE_EQ(mu.values[2], 1.5);
}

TEST(MuRatios, UnitRatioRetained) {
  // Point 1 at 0 has neighbours at distance 1 on both sides.
  const NeighborTable t = knn_exact(Matrix(3, 1, {-1, 0, 1}), 2);
  const MuRatios mu = mu_ratios(t, 1);
  EXPECT_EQ(mu.values[1], 1.0);
  EXPECT_EQ(mu.values.size(), 3u);
}

TEST(MuRatios, ScaleBeyondTableIsAnError) {
  const NeighborTable t(2, 8, std::vector<double>(16, 1.0));
  EXPECT_THROW(mu_ratios(t, 5), ValidationError);
  EXPECT_NO_THROW(mu_ratios(t, 4));
}

TEST(MuRatios, ZeroKthDistanceExcludedAndCounted) {
  const NeighborTable t(3, 2, {0, 1, 1, 2, 2, 4});
  const MuRatios mu = mu_ratios(t, 1);
  EXPECT_EQ(mu.excluded, 1u);
  EXPECT_EQ(mu.values.size(), 2u);
}

TEST(TwoNN, ClosedFormOnSmallSet) {
  // Replicating a sample leaves n / sum(ln mu) unchanged.
  const auto est = estimate_twonn(ratios(repeat({3, 2, 1.5}, 4)));
  EXPECT_NEAR(est.id, 3.0 / (std::log(3.0) + std::log(2.0) + std::log(1.5)), 1e-12);
  EXPECT_NEAR(est.id, 1.3654, 1e-4);
}

TEST(TwoNN, EulerRatiosGiveOne) {
  const auto est = estimate_twonn(ratios(std::vector<double>(12, std::exp(1.0))));
  EXPECT_NEAR(est.id, 1.0, 1e-15);
}

TEST(TwoNN, TooFewRatiosOrAllUnit) {
  EXPECT_THROW(estimate_twonn(ratios({3, 2, 1.5})), NumericalError);
  EXPECT_THROW(estimate_twonn(ratios(std::vector<double>(20, 1.0))), NumericalError);
}

TEST(TwoNN, UnitSquareRecovery) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t = table_for({ManifoldKind::Hypercube, 2, 2, 10000, 0.0, seed}, 2);
    EXPECT_NEAR(estimate_twonn(mu_ratios(t, 1)).id, 2.0, 0.15) << "seed " << seed;
  }
}

TEST(TwoNN, UnitRatioWarningAboveOnePercent) {
  std::vector<double> v(100, 2.0);
  for (int i = 0; i < 2; ++i) v[static_cast<std::size_t>(i)] = 1.0;
  const auto est = estimate_twonn(ratios(v));
  EXPECT_EQ(est.n_unit_ratios, 2u);
  EXPECT_TRUE(est.unit_ratio_warning);
  v[1] = 2.0;
  EXPECT_FALSE(estimate_twonn(ratios(v)).unit_ratio_warning);
}

TEST(Gride, LikelihoodMatchesDirectFormula) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1.001, 4.0);
  std::vector<double> mu(50);
  for (double& m : mu) m = u(rng);
  for (std::size_t k : {1u, 2u, 8u, 64u}) {
    for (double d : {0.5, 2.0, 7.5}) {
      const double want = direct_loglik(mu, k, d);
      EXPECT_NEAR(gride_log_likelihood(mu, k, d), want, 1e-9 * std::abs(want)) << k << " " << d;
    }
  }
}

TEST(Gride, LargeScaleLogBetaDoesNotOverflow) {
  std::vector<double> mu(40, 1.05);
  mu[0] = 1.2;
  const double l = gride_log_likelihood(mu, 4096, 3.0);
  EXPECT_TRUE(std::isfinite(l));
}

TEST(Gride, ScaleOneEqualsTwoNN) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1.0, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> mu(50);
    for (double& m : mu) m = u(rng);
    const auto g = estimate_gride(ratios(mu, 1));
    const auto t = estimate_twonn(ratios(mu, 1));
    EXPECT_NEAR(g.id, t.id, 1e-6);
  }
}

TEST(Gride, OptimumIsALocalMaximum) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto t = table_for({ManifoldKind::Gaussian, 6, 6, 2000, 0.0, seed}, 64);
    for (std::size_t k : {1u, 4u, 32u}) {
      const MuRatios mu = mu_ratios(t, k);
      const auto est = estimate_gride(mu);
      EXPECT_GE(est.log_likelihood, gride_log_likelihood(mu.values, k, est.id + 1e-3));
      EXPECT_GE(est.log_likelihood, gride_log_likelihood(mu.values, k, est.id - 1e-3));
      EXPECT_NEAR(est.log_likelihood, gride_log_likelihood(mu.values, k, est.id), 1e-9);
    }
  }
}

TEST(Gride, BoundaryMaximumIsReported) {
  // Ratios barely above 1 push the optimum past a tight upper bracket.
  std::vector<double> mu(30, 1.0001);
  try {
    estimate_gride(ratios(mu, 2), 5.0);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("5"), std::string::npos);
  }
}

TEST(Gride, FiveCubeAtScaleSixteen) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    // Zero-padded: D = 5 points placed in 50 dimensions via the orthonormal embedding.
    const auto t = table_for({ManifoldKind::Hypercube, 5, 50, 10000, 0.0, seed}, 32);
    EXPECT_NEAR(estimate_gride(mu_ratios(t, 16)).id, 5.0, 0.5) << "seed " << seed;
  }
}

TEST(Gride, TwentyDimensionalGaussianIsUnderestimatedAtFiniteN) {
  // With N = 1e4 the k = 16 neighbourhoods are far from the asymptotic regime;
  // an independent scipy evaluation of the same likelihood gives ~15.8.
  const auto t = table_for({ManifoldKind::Gaussian, 20, 20, 10000, 0.0, 5}, 32);
  const double id = estimate_gride(mu_ratios(t, 16)).id;
  EXPECT_GT(id, 14.5);
  EXPECT_LT(id, 17.5);
}

TEST(Gride, ScaleAndIsometryInvariance) {
  const Matrix base = synth_manifold({ManifoldKind::Sphere, 3, 8, 1500, 0.0, 4});
  const Eigen::MatrixXd x = base.to_eigen();
  const auto est = [](const Eigen::MatrixXd& m, std::size_t k) {
    return estimate_gride(mu_ratios(knn_exact(oracle::to_matrix(m), 16), k)).id;
  };
  const Eigen::MatrixXd q = oracle::orthogonal(8, 9);
  for (std::size_t k : {1u, 8u}) {
    const double ref = est(x, k);
    EXPECT_NEAR(est(x * 123.5, k), ref, 1e-9);
    EXPECT_NEAR(est(x * q, k), ref, 1e-6);
  }
}

TEST(ScaleSweep, CapRuleGivesTwelveEntries) {
  const Matrix x = synth_manifold({ManifoldKind::Hypercube, 3, 3, 4200, 0.0, 1});
  const ScaleCurve c = scale_sweep(knn_exact(x, 4096));
  ASSERT_EQ(c.entries.size(), 12u);
  EXPECT_EQ(c.entries.front().k, 1u);
  EXPECT_EQ(c.entries.back().k, 2048u);
  for (std::size_t i = 1; i < c.entries.size(); ++i) EXPECT_EQ(c.entries[i].k, 2 * c.entries[i - 1].k);
}

TEST(ScaleSweep, FiveCubeCurveIsFlat) {
  const auto t = table_for({ManifoldKind::Hypercube, 5, 50, 10000, 0.0, 0}, 32);
  const ScaleCurve c = scale_sweep(t);
  ASSERT_EQ(c.entries.size(), 5u);
  for (const auto& e : c.entries) {
    ASSERT_TRUE(e.estimate) << e.error;
    EXPECT_GE(e.estimate->id, 4.5) << "k=" << e.k;
    EXPECT_LE(e.estimate->id, 5.5) << "k=" << e.k;
  }
}

TEST(ScaleSweep, FineNoiseInflatesSmallScales) {
  // Noise of 0.01 per coordinate is comparable to the nearest-neighbour
  // spacing of 5000 points in the unit 5-cube but small against r_64.
  const auto noisy = scale_sweep(table_for({ManifoldKind::Hypercube, 5, 50, 5000, 0.01, 2}, 256));
  const auto clean = scale_sweep(table_for({ManifoldKind::Hypercube, 5, 50, 5000, 0.0, 2}, 256));
  EXPECT_GT(noisy.at(1)->estimate->id, noisy.at(64)->estimate->id + 1.0);
  EXPECT_GT(noisy.at(1)->estimate->id, clean.at(1)->estimate->id + 1.0);
  EXPECT_LT(std::abs(noisy.at(64)->estimate->id - clean.at(64)->estimate->id), 0.5);
}

TEST(ScaleSweep, FailuresAreRecordedPerEntry) {
  // At k = 2 every ratio r4 / r2 equals 1, so that entry cannot be estimated.
  std::vector<double> d(40, 1.0);
  d[1] = d[2] = d[3] = 1.5;
  const ScaleCurve c = scale_sweep(NeighborTable(10, 4, d));
  ASSERT_EQ(c.entries.size(), 2u);
  EXPECT_TRUE(c.entries[0].estimate.has_value());
  EXPECT_FALSE(c.entries[1].estimate.has_value());
  EXPECT_FALSE(c.entries[1].error.empty());
}

TEST(SelectScale, PerfectPlateauPicksMiddleTowardLargerK) {
  std::vector<std::pair<std::size_t, double>> pts;
  for (std::size_t k = 1; k <= 2048; k *= 2) pts.push_back({k, 5.0});
  EXPECT_EQ(select_scale(curve_of(pts)), 64u);
  pts.pop_back();  // 11 entries, k = 1 ... 1024: middle is exactly k = 32.
  EXPECT_EQ(select_scale(curve_of(pts)), 32u);
}

TEST(SelectScale, FlattestWindow) {
  const auto c = curve_of({{1, 9}, {2, 7}, {4, 5.1}, {8, 5.0}, {16, 5.0}, {32, 4.2}});
  EXPECT_EQ(select_scale(c, 3), 8u);
}

TEST(SelectScale, TooFewValidEntries) {
  EXPECT_THROW(select_scale(curve_of({{1, 5}, {2, 5}}), 3), NumericalError);
  const double nan = std::nan("");
  EXPECT_THROW(select_scale(curve_of({{1, 5}, {2, 5}, {4, nan}, {8, 5}, {16, 5}}), 3),
               NumericalError);
}

TEST(SelectScale, SharedScaleAcrossCurves) {
  const auto a = curve_of({{1, 9}, {2, 7}, {4, 5.0}, {8, 5.0}, {16, 5.0}, {32, 4.0}});
  const auto b = curve_of({{1, 4}, {2, 4}, {4, 4.0}, {8, 3.0}, {16, 3.0}, {32, 3.0}});
  std::vector<ScaleCurve> both{a, b};
  // Window scores: a -> {2:1.5, 4:1.0, 8:0.0, 16:0.5}, b -> {2:0, 4:0.5, 8:0.5, 16:0}.
  EXPECT_EQ(select_scale(both, 3), 8u);
}

TEST(Presets, PublishedScales) {
  EXPECT_EQ(scale_preset("pythia-6.9b"), 16u);
  EXPECT_EQ(scale_preset("EleutherAI/pythia-6.9b-deduped"), 16u);
  EXPECT_EQ(scale_preset("facebook/opt-1.3b"), 32u);
  EXPECT_EQ(scale_preset("opt-125m"), 64u);
  EXPECT_EQ(scale_preset("opt-13b"), 32u);
  EXPECT_EQ(scale_preset("pythia-6.9b", 4000), 64u);
  EXPECT_EQ(scale_preset("pythia-6.9b", 32000), 32u);
  EXPECT_EQ(scale_preset("pythia-6.9b", 512), 16u);
  EXPECT_EQ(scale_preset("pythia-6.9b", 143000), 16u);
  EXPECT_FALSE(scale_preset("pythia-6.9b", 777).has_value());
  EXPECT_FALSE(scale_preset("gpt2").has_value());
}

TEST(NormalizeId, NaturalLogByDefault) {
  IdEstimate e;
  e.id = 24.0;
  EXPECT_NEAR(normalize_id(e, 2048), 24.0 / std::log(2048.0), 1e-12);
  EXPECT_NEAR(normalize_id(e, 2048), 3.148, 1e-3);
  e.id = std::log(100.0);
  EXPECT_NEAR(normalize_id(e, 100), 1.0, 1e-15);
  e.id = 8.0;
  EXPECT_NEAR(normalize_id(e, 1024, 2.0), 0.8, 1e-12);
  EXPECT_THROW(normalize_id(e, 1), ValidationError);
}
