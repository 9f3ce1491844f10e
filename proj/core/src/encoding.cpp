#include "repgeom/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "repgeom/error.hpp"

namespace repgeom {

double EncodingScores::mean() const {
  if (per_voxel.empty()) return 0.0;
  return std::accumulate(per_voxel.begin(), per_voxel.end(), 0.0) /
         static_cast<double>(per_voxel.size());
}

double lanczos_kernel(double x, int lobes) {
  const double a = static_cast<double>(lobes);
  if (std::abs(x) >= a) return 0.0;
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return a * std::sin(px) * std::sin(px / a) / (px * px);
}

ResampledFeatures lanczos_resample(const StimulusFeatures& stim, double tr, std::size_t n_trs,
                                   int lobes) {
  if (!(tr > 0.0)) throw ValidationError("TR must be positive");
  if (n_trs == 0) throw ValidationError("need at least one TR");
  if (lobes < 1) throw ValidationError("Lanczos window needs at least one lobe");
  const auto& t = stim.times;
  if (t.size() != static_cast<std::size_t>(stim.features.rows())) {
    throw ValidationError("word times and feature rows differ in length");
  }
  if (t.empty()) throw ValidationError("no words in stimulus");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw ValidationError("word times must be strictly ascending");
  }

  const double cutoff = 1.0 / (2.0 * tr);
  const double half_width = static_cast<double>(lobes) / cutoff;
  ResampledFeatures out;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_trs), stim.features.cols());

  bool any_in_range = false;
  for (std::size_t row = 0; row < n_trs; ++row) {
    const double t_tr = static_cast<double>(row) * tr;
    auto first = std::upper_bound(t.begin(), t.end(), t_tr - half_width);
    auto last = std::lower_bound(t.begin(), t.end(), t_tr + half_width);
    double weight_sum = 0.0;
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(stim.features.cols());
    for (auto it = first; it != last; ++it) {
      const double w = lanczos_kernel(cutoff * (t_tr - *it), lobes);
      if (w == 0.0) continue;
      const auto idx = static_cast<Eigen::Index>(it - t.begin());
      acc += w * stim.features.row(idx);
      weight_sum += w;
    }
    if (std::abs(weight_sum) < 1e-12) {
      out.uncovered_trs.push_back(row);
      continue;
    }
    any_in_range = true;
    out.values.row(static_cast<Eigen::Index>(row)) = acc / weight_sum;
  }
  if (!any_in_range) throw ValidationError("no words fall within range of any TR");
  return out;
}

Eigen::MatrixXd add_fir_delays(const Eigen::MatrixXd& x, std::span<const int> delays) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index cols = x.cols();
  if (delays.empty()) throw ValidationError("need at least one delay");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols * static_cast<Eigen::Index>(delays.size()));
  for (std::size_t b = 0; b < delays.size(); ++b) {
    const int d = delays[b];
    if (d < 0 || d >= rows) {
      throw ValidationError("delay " + std::to_string(d) + " must be in [0, T) with T=" +
                            std::to_string(rows));
    }
    out.block(d, static_cast<Eigen::Index>(b) * cols, rows - d, cols) = x.topRows(rows - d);
  }
  return out;
}

std::vector<double> default_alphas() {
  std::vector<double> a(10);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::pow(10.0, 6.0 * static_cast<double>(i) / 9.0);
  return a;
}

std::optional<double> pearson(const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& b) {
  const Eigen::VectorXd ac = a.array() - a.mean();
  const Eigen::VectorXd bc = b.array() - b.mean();
  const double na = ac.norm(), nb = bc.norm();
  if (!(na > 0.0) || !(nb > 0.0)) return std::nullopt;
  return std::clamp(ac.dot(bc) / (na * nb), -1.0, 1.0);
}

EncodingScores score_voxelwise(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& x_test,
                               const Eigen::MatrixXd& y_test) {
  if (x_test.cols() != weights.rows() || y_test.cols() != weights.cols() ||
      x_test.rows() != y_test.rows()) {
    throw ValidationError("score_voxelwise: shapes of weights, design and responses disagree");
  }
  const Eigen::MatrixXd pred = x_test * weights;
  EncodingScores s;
  s.per_voxel.resize(static_cast<std::size_t>(y_test.cols()));
  for (Eigen::Index v = 0; v < y_test.cols(); ++v) {
    auto r = pearson(pred.col(v), y_test.col(v));
    s.per_voxel[static_cast<std::size_t>(v)] = r.value_or(0.0);
    if (!r) s.flagged_voxels.push_back(static_cast<std::size_t>(v));
  }
  return s;
}

std::vector<std::size_t> chunk_folds(std::size_t n_trs, std::size_t n_folds,
                                     std::size_t chunk_trs, std::uint64_t seed) {
  if (n_folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
  if (chunk_trs == 0) throw ValidationError("chunk length must be positive");
  const std::size_t n_chunks = (n_trs + chunk_trs - 1) / chunk_trs;
  if (n_chunks < n_folds) {
    throw ValidationError("only " + std::to_string(n_chunks) + " chunks for " +
                          std::to_string(n_folds) + " folds");
  }
  std::vector<std::size_t> order(n_chunks);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> chunk_fold(n_chunks);
  for (std::size_t pos = 0; pos < n_chunks; ++pos) chunk_fold[order[pos]] = pos % n_folds;
  std::vector<std::size_t> fold(n_trs);
  for (std::size_t t = 0; t < n_trs; ++t) fold[t] = chunk_fold[t / chunk_trs];
  return fold;
}

namespace {

struct Standardizer {
  Eigen::RowVectorXd mean, scale;
  std::vector<bool> constant;

  static Standardizer fit(const Eigen::MatrixXd& m) {
    Standardizer s;
    s.mean = m.colwise().mean();
    s.scale.resize(m.cols());
    s.constant.assign(static_cast<std::size_t>(m.cols()), false);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double sd = std::sqrt((m.col(c).array() - s.mean[c]).square().mean());
      s.constant[static_cast<std::size_t>(c)] = !(sd > 1e-12 * std::max(1.0, std::abs(s.mean[c])));
      s.scale[c] = s.constant[static_cast<std::size_t>(c)] ? 1.0 : sd;
    }
    return s;
  }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const {
    return (m.rowwise() - mean).array().rowwise() / scale.array();
  }
};

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

// Ridge solutions for every alpha from one thin SVD of the design.
struct RidgeSolver {
  Eigen::MatrixXd v;
  Eigen::VectorXd s;
  Eigen::MatrixXd uty;

  RidgeSolver(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    v = svd.matrixV();
    s = svd.singularValues();
    uty = svd.matrixU().transpose() * y;
  }
  Eigen::MatrixXd weights(double alpha) const {
    const Eigen::VectorXd shrink = s.array() / (s.array().square() + alpha);
    return v * (shrink.asDiagonal() * uty);
  }
  Eigen::VectorXd weights(double alpha, Eigen::Index voxel) const {
    const Eigen::VectorXd shrink = s.array() / (s.array().square() + alpha);
    return v * (shrink.asDiagonal() * uty.col(voxel));
  }
};

}  // namespace

Eigen::MatrixXd RidgeFit::predict(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd xz = (x.rowwise() - x_mean).array().rowwise() / x_scale.array();
  Eigen::MatrixXd pred = xz * weights;
  return (pred.array().rowwise() * y_scale.array()).rowwise() + y_mean.array();
}

RidgeFit ridge_fit_cv(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                      const RidgeConfig& config) {
  if (x.rows() != y.rows()) throw ValidationError("design and responses differ in rows");
  if (x.cols() == 0 || y.cols() == 0) throw ValidationError("empty design or responses");
  if (config.alphas.empty()) throw ValidationError("alpha grid is empty");
  for (double a : config.alphas) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("alphas must be positive");
  }
  const auto n_trs = static_cast<std::size_t>(x.rows());
  const auto n_vox = y.cols();
  const auto n_alpha = static_cast<Eigen::Index>(config.alphas.size());
  const auto folds = chunk_folds(n_trs, config.n_folds, config.chunk_trs, config.seed);

  Eigen::MatrixXd cv = Eigen::MatrixXd::Zero(n_alpha, n_vox);
  for (std::size_t f = 0; f < config.n_folds; ++f) {
    std::vector<Eigen::Index> train, val;
    for (std::size_t t = 0; t < n_trs; ++t) {
      (folds[t] == f ? val : train).push_back(static_cast<Eigen::Index>(t));
    }
    const Eigen::MatrixXd x_train = take_rows(x, train), y_train = take_rows(y, train);
    const auto xs = Standardizer::fit(x_train);
    const auto ys = Standardizer::fit(y_train);
    const RidgeSolver solver(xs.apply(x_train), ys.apply(y_train));
    const Eigen::MatrixXd x_val = xs.apply(take_rows(x, val));
    const Eigen::MatrixXd y_val = take_rows(y, val);
    for (Eigen::Index a = 0; a < n_alpha; ++a) {
      const Eigen::MatrixXd pred = x_val * solver.weights(config.alphas[static_cast<std::size_t>(a)]);
      for (Eigen::Index v = 0; v < n_vox; ++v) {
        cv(a, v) += pearson(pred.col(v), y_val.col(v)).value_or(0.0);
      }
    }
  }
  cv /= static_cast<double>(config.n_folds);

  RidgeFit fit;
  fit.cv_correlation = cv;
  const auto xs = Standardizer::fit(x);
  const auto ys = Standardizer::fit(y);
  fit.x_mean = xs.mean, fit.x_scale = xs.scale;
  fit.y_mean = ys.mean, fit.y_scale = ys.scale;
  const RidgeSolver solver(xs.apply(x), ys.apply(y));
  fit.weights = Eigen::MatrixXd::Zero(x.cols(), n_vox);
  fit.scores.per_voxel.resize(static_cast<std::size_t>(n_vox));
  fit.scores.alpha_per_voxel.resize(static_cast<std::size_t>(n_vox));
  for (Eigen::Index v = 0; v < n_vox; ++v) {
    const auto vi = static_cast<std::size_t>(v);
    if (ys.constant[vi]) {
      fit.scores.per_voxel[vi] = 0.0;
      fit.scores.alpha_per_voxel[vi] = config.alphas.front();
      fit.scores.flagged_voxels.push_back(vi);
      continue;
    }
    Eigen::Index best = 0;
    cv.col(v).maxCoeff(&best);
    fit.scores.per_voxel[vi] = cv(best, v);
    fit.scores.alpha_per_voxel[vi] = config.alphas[static_cast<std::size_t>(best)];
    fit.weights.col(v) = solver.weights(config.alphas[static_cast<std::size_t>(best)], v);
  }
  return fit;
}

Eigen::MatrixXd trim_rows(const Eigen::MatrixXd& m, std::size_t start, std::size_t end) {
  if (start + end >= static_cast<std::size_t>(m.rows())) {
    throw ValidationError("trimming removes every row");
  }
  return m.middleRows(static_cast<Eigen::Index>(start),
                      m.rows() - static_cast<Eigen::Index>(start + end));
}

Eigen::MatrixXd build_design(const StimulusFeatures& stim, std::size_t n_trs,
                             const DesignConfig& config) {
  const auto resampled = lanczos_resample(stim, config.tr, n_trs, config.lobes);
  return trim_rows(add_fir_delays(resampled.values, config.delays), config.trim_start,
                   config.trim_end);
}

SyntheticStory synth_story(const StoryConfig& config) {
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  const double duration = static_cast<double>(config.n_trs) * config.tr;
  StimulusFeatures stim;
  double t = 0.25 * jitter(rng);
  while (t < duration) {
    stim.times.push_back(t);
    t += jitter(rng) / config.words_per_second;
  }
  std::normal_distribution<double> normal;
  stim.features.resize(static_cast<Eigen::Index>(stim.times.size()),
                       static_cast<Eigen::Index>(config.n_features));
  for (Eigen::Index i = 0; i < stim.features.size(); ++i) stim.features.data()[i] = normal(rng);
  StoryConfig next = config;
  next.seed = config.seed ^ 0x9e3779b97f4a7c15ULL;
  return synth_story(std::move(stim), next);
}

SyntheticStory synth_story(StimulusFeatures stimulus, const StoryConfig& config) {
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal;
  const auto resampled = lanczos_resample(stimulus, config.tr, config.n_trs);
  const Eigen::MatrixXd design = add_fir_delays(resampled.values, config.delays);

  SyntheticStory story;
  story.true_weights.resize(design.cols(), static_cast<Eigen::Index>(config.n_voxels));
  for (Eigen::Index i = 0; i < story.true_weights.size(); ++i) {
    story.true_weights.data()[i] = normal(rng);
  }
  Eigen::MatrixXd signal = design * story.true_weights;
  // Unit signal variance per voxel so noise_sd is a noise-to-signal ratio.
  for (Eigen::Index v = 0; v < signal.cols(); ++v) {
    auto col = signal.col(v);
    const double sd = std::sqrt((col.array() - col.mean()).square().mean());
    if (sd > 0.0) {
      col /= sd;
      story.true_weights.col(v) /= sd;
    }
  }
  for (Eigen::Index i = 0; i < signal.size(); ++i) signal.data()[i] += config.noise_sd * normal(rng);
  story.stimulus = std::move(stimulus);
  story.responses.tr = config.tr;
  story.responses.values = std::move(signal);
  return story;
}

}  // namespace repgeom
