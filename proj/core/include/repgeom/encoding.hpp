#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace repgeom {

/// One feature row per word, aligned to word onset times (seconds).
struct StimulusFeatures {
  std::vector<double> times;
  Eigen::MatrixXd features;  // W x F
};

/// Voxel responses on the scan grid; TR t is acquired at time t * tr.
struct ResponseSeries {
  double tr = 2.0;
  Eigen::MatrixXd values;  // T x V
};

struct EncodingScores {
  std::vector<double> per_voxel;        // held-out Pearson r
  std::vector<double> alpha_per_voxel;  // empty when not produced by a fit
  std::vector<std::size_t> flagged_voxels;  // zero-variance target or prediction
  int layer_index = 0;

  double mean() const;
};

/// sinc(x) * sinc(x / lobes) for |x| < lobes, else 0.
double lanczos_kernel(double x, int lobes = 3);

struct ResampledFeatures {
  Eigen::MatrixXd values;                 // T x F
  std::vector<std::size_t> uncovered_trs; // rows left at zero
};

/// Weight-normalised Lanczos interpolation of word-time features onto the TR
/// grid: kernel argument f * (t_TR - t_word) with f = 1 / (2 tr).
ResampledFeatures lanczos_resample(const StimulusFeatures& stim, double tr, std::size_t n_trs,
                                   int lobes = 3);

inline const std::vector<int> kDefaultDelays{1, 2, 3, 4};

/// Concatenates copies of X shifted down by each delay (zero-filled on top).
Eigen::MatrixXd add_fir_delays(const Eigen::MatrixXd& x,
                               std::span<const int> delays = kDefaultDelays);

/// Ten log-spaced values in [1, 1e6].
std::vector<double> default_alphas();

struct RidgeConfig {
  std::vector<double> alphas = default_alphas();
  std::size_t n_folds = 5;
  std::size_t chunk_trs = 20;
  std::uint64_t seed = 0;
};

struct RidgeFit {
  Eigen::MatrixXd weights;  // P x V, acting on z-scored design and response
  Eigen::RowVectorXd x_mean, x_scale, y_mean, y_scale;
  EncodingScores scores;    // cross-validated, at the selected alpha
  Eigen::MatrixXd cv_correlation;  // alphas x V, mean held-out r per alpha

  /// Predictions in the response's original units.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

/// Contiguous chunk_trs-long blocks, shuffled with `seed`, dealt round-robin
/// into n_folds folds. Returns the fold id of every TR.
std::vector<std::size_t> chunk_folds(std::size_t n_trs, std::size_t n_folds,
                                     std::size_t chunk_trs, std::uint64_t seed);

/// Per-voxel alpha chosen by mean held-out correlation across folds, then a
/// refit on all rows at that alpha. Columns are z-scored with training-fold
/// statistics.
RidgeFit ridge_fit_cv(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                      const RidgeConfig& config = {});

/// Pearson r per voxel between x_test * weights and y_test.
EncodingScores score_voxelwise(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& x_test,
                               const Eigen::MatrixXd& y_test);

/// Pearson correlation of two equal-length columns; nullopt if either is
/// constant.
std::optional<double> pearson(const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& b);

struct DesignConfig {
  double tr = 2.0;
  std::vector<int> delays = kDefaultDelays;
  int lobes = 3;
  std::size_t trim_start = 10;
  std::size_t trim_end = 5;
};

/// Resample + delay + trim for one story. Returns the trimmed design; the
/// caller trims responses with trim_rows().
Eigen::MatrixXd build_design(const StimulusFeatures& stim, std::size_t n_trs,
                             const DesignConfig& config = {});
Eigen::MatrixXd trim_rows(const Eigen::MatrixXd& m, std::size_t start, std::size_t end);

/// Synthetic story: word onsets with jittered gaps and a response generated
/// as delayed-feature regression on random weights plus Gaussian noise.
struct SyntheticStory {
  StimulusFeatures stimulus;
  ResponseSeries responses;
  Eigen::MatrixXd true_weights;  // (F * delays) x V
};

struct StoryConfig {
  std::size_t n_trs = 300;
  std::size_t n_features = 8;
  std::size_t n_voxels = 20;
  double tr = 2.0;
  double words_per_second = 2.5;
  double noise_sd = 1.0;
  std::vector<int> delays = kDefaultDelays;
  std::uint64_t seed = 0;
};

/// Random word-level features (i.i.d. Gaussian).
SyntheticStory synth_story(const StoryConfig& config);

/// Same generator driven by caller-supplied word features.
SyntheticStory synth_story(StimulusFeatures stimulus, const StoryConfig& config);

}  // namespace repgeom
