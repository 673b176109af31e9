#pragma once

#include "aenc/synchrony.hpp"
#include "aenc/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace aenc {

/// Window-aligned samples ready for model fitting.
struct AlignedDataset {
  Matrix X;                        // samples x audio features
  Matrix C;                        // samples x covariates (may have zero columns)
  Vector y;                        // samples
  std::vector<int> video_id;       // per sample
  std::vector<std::string> feature_tags;

  std::size_t samples() const { return static_cast<std::size_t>(y.size()); }
  void validate() const;
};

struct FoldPlan {
  std::vector<int> fold;  // per sample, in [0, k)
  int k = 5;
  std::uint64_t seed = 0;

  std::vector<std::size_t> members(int f) const;
  /// Stable hash of the assignment; two plans with equal fingerprints split samples identically.
  std::uint64_t fingerprint() const;
};

struct RidgeFit {
  Vector weights;       // in standardized feature space
  double intercept = 0.0;
  double lambda = 0.0;
  Vector x_mean;        // fit-time standardization
  Vector x_scale;
  double y_center = 0.0;

  Vector predict(const Matrix& X) const;
};

struct EmotionScore {
  std::vector<double> per_fold;
  std::vector<double> lambda_per_fold;
  double mean = 0.0;
};

struct PcaModel {
  Vector mean;
  Matrix components;          // features x k, orthonormal columns
  Vector explained_ratio;     // k, non-increasing

  Eigen::Index k() const { return components.cols(); }
};

// --- temporal alignment ---------------------------------------------------

/// Mean of the frames falling in each window of `plan` (window w covers
/// [start_seconds(w), start_seconds(w) + window_seconds)). NaN frames are skipped; a window
/// without any finite frame is NaN. Throws if the frames end more than one window before the plan.
std::vector<double> align_to_windows(std::span<const double> frames, double frame_rate_hz, const WindowPlan& plan);
Matrix align_to_windows(const FeatureTable& table, const WindowPlan& plan);
ResponseSeries align_to_windows(const ResponseSeries& series, double rate_hz, const WindowPlan& plan);

// --- PCA ------------------------------------------------------------------

PcaModel pca_fit(const Matrix& X, Eigen::Index k);
Matrix pca_transform(const PcaModel& model, const Matrix& X);

// --- folds ----------------------------------------------------------------

/// Per video, a seeded permutation of its samples is dealt round-robin into k folds.
FoldPlan stratified_folds(std::span<const int> video_id, int k = 5, std::uint64_t seed = 0);

// --- ridge ----------------------------------------------------------------

/// 20 values log-spaced over [10, 1e8].
std::vector<double> default_lambda_grid();
std::vector<double> log_grid(double lo, double hi, int count);

/// Solves (X'X + lambda I) v = X'y by Cholesky, falling back to SVD when the system is
/// numerically singular or its condition estimate exceeds 1e12.
Vector ridge_solve(const Matrix& X, const Vector& y, double lambda);

/// Ridge fit. With `standardize`, X columns are z-scored and y centered with fit-time statistics
/// and the intercept is the training mean of y; otherwise inputs are used as given.
RidgeFit ridge_fit(const Matrix& X, const Vector& y, double lambda, bool standardize = true);

struct InnerCvOptions {
  int folds = 5;
  std::uint64_t seed = 0;
};

/// Lambda with the smallest mean inner-fold squared error; ties go to the smaller lambda.
/// Inner folds are stratified by `video_id` when given.
double nested_cv_lambda(const Matrix& X, const Vector& y, std::span<const double> grid,
                        std::span<const int> video_id = {}, const InnerCvOptions& options = {});

// --- emotion score --------------------------------------------------------

/// Per fold: standardize on train, fit ridge on [X | C] with nested-CV lambda, predict the test
/// fold from the audio block alone (covariates at zero) and correlate with y. A constant prediction
/// scores 0.
EmotionScore emotion_score(const AlignedDataset& ds, const FoldPlan& folds, std::span<const double> grid);

}  // namespace aenc
