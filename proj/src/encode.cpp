#include "aenc/encode.hpp"

#include "aenc/random.hpp"
#include "aenc/stattests.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace aenc {

void AlignedDataset::validate() const {
  const auto n = y.size();
  if (n == 0) throw std::invalid_argument("AlignedDataset: no samples");
  if (X.rows() != n) throw std::invalid_argument("AlignedDataset: X row count differs from y");
  if (C.cols() > 0 && C.rows() != n) throw std::invalid_argument("AlignedDataset: C row count differs from y");
  if (static_cast<Eigen::Index>(video_id.size()) != n)
    throw std::invalid_argument("AlignedDataset: video_id length differs from y");
  if (!X.allFinite() || !y.allFinite() || (C.cols() > 0 && !C.allFinite()))
    throw std::invalid_argument("AlignedDataset: non-finite value");
}

std::vector<std::size_t> FoldPlan::members(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] == f) out.push_back(i);
  return out;
}

std::uint64_t FoldPlan::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  feed(static_cast<std::uint64_t>(k));
  feed(fold.size());
  for (int f : fold) feed(static_cast<std::uint64_t>(f));
  return h;
}

// ---------------------------------------------------------------------------
// alignment

std::vector<double> align_to_windows(std::span<const double> frames, double frame_rate_hz, const WindowPlan& plan) {
  if (!(frame_rate_hz > 0.0)) throw std::invalid_argument("align_to_windows: frame rate must be positive");
  if (plan.n_windows == 0) throw std::invalid_argument("align_to_windows: empty plan");
  const auto per_window = static_cast<std::size_t>(std::llround(plan.window_seconds * frame_rate_hz));
  if (per_window == 0) throw std::invalid_argument("align_to_windows: window shorter than one frame");
  const double needed_seconds = plan.start_seconds(plan.n_windows - 1) + plan.window_seconds;
  const double available_seconds = static_cast<double>(frames.size()) / frame_rate_hz;
  if (needed_seconds - available_seconds > plan.window_seconds + 1e-9)
    throw std::invalid_argument("align_to_windows: source covers " + std::to_string(available_seconds) +
                                " s but the window plan needs " + std::to_string(needed_seconds) + " s");
  std::vector<double> out(plan.n_windows);
  for (std::size_t w = 0; w < plan.n_windows; ++w) {
    const auto begin = static_cast<std::size_t>(std::llround(plan.start_seconds(w) * frame_rate_hz));
    const std::size_t end = std::min(begin + per_window, frames.size());
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = begin; i < end; ++i) {
      if (std::isnan(frames[i])) continue;
      sum += frames[i];
      ++count;
    }
    out[w] = count ? sum / static_cast<double>(count) : std::nan("");
  }
  return out;
}

Matrix align_to_windows(const FeatureTable& table, const WindowPlan& plan) {
  table.validate();
  Matrix out(static_cast<Eigen::Index>(plan.n_windows), table.features());
  std::vector<double> column(static_cast<std::size_t>(table.frames()));
  for (Eigen::Index c = 0; c < table.features(); ++c) {
    for (Eigen::Index t = 0; t < table.frames(); ++t) column[static_cast<std::size_t>(t)] = table.values(t, c);
    const auto aligned = align_to_windows(column, table.frame_rate_hz, plan);
    for (std::size_t w = 0; w < aligned.size(); ++w) out(static_cast<Eigen::Index>(w), c) = aligned[w];
  }
  return out;
}

ResponseSeries align_to_windows(const ResponseSeries& series, double rate_hz, const WindowPlan& plan) {
  series.validate();
  ResponseSeries out = series;
  out.values = align_to_windows(series.values, rate_hz, plan);
  return out;
}

// ---------------------------------------------------------------------------
// PCA

PcaModel pca_fit(const Matrix& X, Eigen::Index k) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (k < 1 || k > std::min(n - 1, d))
    throw std::invalid_argument("pca_fit: k must lie in [1, min(samples - 1, features)]");
  if (!X.allFinite()) throw std::invalid_argument("pca_fit: non-finite input");
  PcaModel model;
  model.mean = X.colwise().mean().transpose();
  const Matrix centered = X.rowwise() - model.mean.transpose();
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double total = s.squaredNorm();
  model.components = svd.matrixV().leftCols(k);
  model.explained_ratio = Vector::Zero(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    // Sign convention: the largest-magnitude loading is positive.
    Eigen::Index arg = 0;
    model.components.col(j).cwiseAbs().maxCoeff(&arg);
    if (model.components(arg, j) < 0) model.components.col(j) *= -1.0;
    model.explained_ratio(j) = total > 0 ? s(j) * s(j) / total : 0.0;
  }
  return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& X) {
  if (X.cols() != model.mean.size()) throw std::invalid_argument("pca_transform: feature count mismatch");
  return (X.rowwise() - model.mean.transpose()) * model.components;
}

// ---------------------------------------------------------------------------
// folds

FoldPlan stratified_folds(std::span<const int> video_id, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_folds: need k >= 2");
  std::map<int, std::vector<std::size_t>> by_video;
  for (std::size_t i = 0; i < video_id.size(); ++i) by_video[video_id[i]].push_back(i);
  for (const auto& [vid, idx] : by_video)
    if (static_cast<int>(idx.size()) < k)
      throw std::invalid_argument("stratified_folds: video " + std::to_string(vid) + " has " +
                                  std::to_string(idx.size()) + " samples, fewer than " + std::to_string(k) + " folds");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.fold.assign(video_id.size(), -1);
  CounterRng rng(seed, 0x466f6c6473ULL);
  std::size_t dealt = 0;
  for (auto& [vid, idx] : by_video) {
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t r = 0; r < idx.size(); ++r)
      plan.fold[idx[r]] = static_cast<int>((dealt + r) % static_cast<std::size_t>(k));
    dealt += idx.size();
  }
  return plan;
}

// ---------------------------------------------------------------------------
// ridge

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi >= lo) || count < 1) throw std::invalid_argument("log_grid: need 0 < lo <= hi and count >= 1");
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = count == 1 ? lo : std::pow(10.0, a + (b - a) * i / (count - 1));
  return grid;
}

std::vector<double> default_lambda_grid() { return log_grid(10.0, 1e8, 20); }

namespace {

struct Standardization {
  Vector mean, scale;
};

Standardization standardization_of(const Matrix& X) {
  Standardization s;
  s.mean = X.colwise().mean().transpose();
  s.scale = Vector::Ones(X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const double var = (X.col(c).array() - s.mean(c)).square().mean();
    if (var > 0.0) s.scale(c) = std::sqrt(var);
  }
  return s;
}

Matrix apply(const Standardization& s, const Matrix& X) {
  Matrix Z = X.rowwise() - s.mean.transpose();
  for (Eigen::Index c = 0; c < Z.cols(); ++c) Z.col(c) /= s.scale(c);
  // Constant columns stay exactly zero.
  return Z;
}

Matrix rows_of(const Matrix& M, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), M.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = M.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

Vector rows_of(const Vector& v, const std::vector<std::size_t>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
  return out;
}

void check_finite(const Matrix& X, const Vector& y, const char* what) {
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

// Predictions on a validation block for every lambda from one spectral decomposition of the
// training design. Returns validation predictions, one column per lambda.
Matrix ridge_path_predictions(const Matrix& Xt, const Vector& yt, const Matrix& Xv, std::span<const double> grid) {
  const Eigen::Index n = Xt.rows(), d = Xt.cols();
  Matrix preds(Xv.rows(), static_cast<Eigen::Index>(grid.size()));
  if (d <= n) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Xt.transpose() * Xt);
    const Vector e = eig.eigenvalues().cwiseMax(0.0);
    const Vector b = eig.eigenvectors().transpose() * (Xt.transpose() * yt);
    const Matrix XvQ = Xv * eig.eigenvectors();
    for (std::size_t l = 0; l < grid.size(); ++l)
      preds.col(static_cast<Eigen::Index>(l)) = XvQ * (b.array() / (e.array() + grid[l])).matrix();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Xt * Xt.transpose());
    const Vector f = eig.eigenvalues().cwiseMax(0.0);
    const Vector c = eig.eigenvectors().transpose() * yt;
    const Matrix M = Xv * (Xt.transpose() * eig.eigenvectors());
    for (std::size_t l = 0; l < grid.size(); ++l)
      preds.col(static_cast<Eigen::Index>(l)) = M * (c.array() / (f.array() + grid[l])).matrix();
  }
  return preds;
}

FoldPlan inner_folds(std::span<const int> video_id, std::size_t n, int k, std::uint64_t seed) {
  if (!video_id.empty()) {
    std::map<int, int> counts;
    for (int v : video_id) ++counts[v];
    const bool stratifiable = std::all_of(counts.begin(), counts.end(), [&](const auto& kv) { return kv.second >= k; });
    if (stratifiable) return stratified_folds(video_id, k, seed);
  }
  const std::vector<int> single(n, 0);
  return stratified_folds(single, k, seed);
}

}  // namespace

Vector RidgeFit::predict(const Matrix& X) const {
  if (X.cols() != weights.size()) throw std::invalid_argument("RidgeFit::predict: feature count mismatch");
  Matrix Z = X.rowwise() - x_mean.transpose();
  for (Eigen::Index c = 0; c < Z.cols(); ++c) Z.col(c) /= x_scale(c);
  return (Z * weights).array() + intercept;
}

Vector ridge_solve(const Matrix& X, const Vector& y, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("ridge_solve: lambda must be >= 0");
  if (X.rows() != y.size()) throw std::invalid_argument("ridge_solve: row count mismatch");
  check_finite(X, y, "ridge_solve");
  const Eigen::Index d = X.cols();
  Matrix G = X.transpose() * X;
  G.diagonal().array() += lambda;
  const Vector rhs = X.transpose() * y;
  Eigen::LLT<Matrix> llt(G);
  if (llt.info() == Eigen::Success && d > 0) {
    const Vector diag = Matrix(llt.matrixL()).diagonal();
    const double lo = diag.minCoeff(), hi = diag.maxCoeff();
    if (lo > 0.0 && (hi / lo) * (hi / lo) <= 1e12) return llt.solve(rhs);
  }
  // Filter factors s / (s^2 + lambda) on the SVD of X; zero singular values contribute nothing.
  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = s.size() ? s(0) * 1e-13 * static_cast<double>(std::max(X.rows(), d)) : 0.0;
  Vector filt(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) filt(i) = s(i) > cutoff ? s(i) / (s(i) * s(i) + lambda) : 0.0;
  return svd.matrixV() * (filt.asDiagonal() * (svd.matrixU().transpose() * y));
}

RidgeFit ridge_fit(const Matrix& X, const Vector& y, double lambda, bool standardize) {
  if (X.rows() != y.size() || X.rows() == 0) throw std::invalid_argument("ridge_fit: row count mismatch");
  check_finite(X, y, "ridge_fit");
  RidgeFit fit;
  fit.lambda = lambda;
  if (standardize) {
    const auto s = standardization_of(X);
    fit.x_mean = s.mean;
    fit.x_scale = s.scale;
    fit.y_center = y.mean();
    fit.weights = ridge_solve(apply(s, X), y.array() - fit.y_center, lambda);
  } else {
    fit.x_mean = Vector::Zero(X.cols());
    fit.x_scale = Vector::Ones(X.cols());
    fit.y_center = 0.0;
    fit.weights = ridge_solve(X, y, lambda);
  }
  fit.intercept = fit.y_center;
  return fit;
}

double nested_cv_lambda(const Matrix& X, const Vector& y, std::span<const double> grid, std::span<const int> video_id,
                        const InnerCvOptions& options) {
  if (grid.empty()) throw std::invalid_argument("nested_cv_lambda: empty grid");
  if (y.size() < 10) throw std::invalid_argument("nested_cv_lambda: need at least 10 training samples");
  if (X.rows() != y.size()) throw std::invalid_argument("nested_cv_lambda: row count mismatch");
  if (!video_id.empty() && static_cast<Eigen::Index>(video_id.size()) != y.size())
    throw std::invalid_argument("nested_cv_lambda: video_id length mismatch");
  check_finite(X, y, "nested_cv_lambda");

  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  const auto plan = inner_folds(video_id, static_cast<std::size_t>(y.size()), options.folds, options.seed);
  Vector mse = Vector::Zero(static_cast<Eigen::Index>(sorted.size()));
  for (int f = 0; f < plan.k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < plan.fold.size(); ++i) (plan.fold[i] == f ? test : train).push_back(i);
    const Matrix Xtr = rows_of(X, train);
    const Vector ytr = rows_of(y, train);
    const auto s = standardization_of(Xtr);
    const double yc = ytr.mean();
    const Matrix preds = ridge_path_predictions(apply(s, Xtr), ytr.array() - yc, apply(s, rows_of(X, test)), sorted);
    const Vector yte = rows_of(y, test);
    for (Eigen::Index l = 0; l < preds.cols(); ++l)
      mse(l) += ((preds.col(l).array() + yc) - yte.array()).square().mean() / plan.k;
  }
  Eigen::Index best = 0;
  for (Eigen::Index l = 1; l < mse.size(); ++l)
    if (mse(l) < mse(best)) best = l;
  return sorted[static_cast<std::size_t>(best)];
}

EmotionScore emotion_score(const AlignedDataset& ds, const FoldPlan& folds, std::span<const double> grid) {
  ds.validate();
  if (folds.fold.size() != ds.samples()) throw std::invalid_argument("emotion_score: fold plan does not cover the dataset");
  const Eigen::Index da = ds.X.cols(), dc = ds.C.cols();
  Matrix design(static_cast<Eigen::Index>(ds.samples()), da + dc);
  design.leftCols(da) = ds.X;
  if (dc > 0) design.rightCols(dc) = ds.C;

  EmotionScore score;
  for (int f = 0; f < folds.k; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < folds.fold.size(); ++i) (folds.fold[i] == f ? test : train).push_back(i);
    if (test.size() < 3) throw std::invalid_argument("emotion_score: fold " + std::to_string(f) + " has fewer than 3 test samples");
    const Matrix Dtr = rows_of(design, train);
    const Vector ytr = rows_of(ds.y, train);
    std::vector<int> vid_train;
    for (auto i : train) vid_train.push_back(ds.video_id[i]);
    const double lambda =
        nested_cv_lambda(Dtr, ytr, grid, vid_train, {5, derive_seed(folds.seed, static_cast<std::uint64_t>(f) + 1)});
    const RidgeFit fit = ridge_fit(Dtr, ytr, lambda);

    // Standardized test design with the covariate block at zero: only audio drives the prediction.
    Matrix Zte = rows_of(design, test).rowwise() - fit.x_mean.transpose();
    for (Eigen::Index c = 0; c < Zte.cols(); ++c) Zte.col(c) /= fit.x_scale(c);
    if (dc > 0) Zte.rightCols(dc).setZero();
    const Vector pred = (Zte * fit.weights).array() + fit.intercept;
    const Vector yte = rows_of(ds.y, test);
    score.per_fold.push_back(pearson_or_zero(std::span<const double>(yte.data(), static_cast<std::size_t>(yte.size())),
                                             std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size()))));
    score.lambda_per_fold.push_back(lambda);
  }
  score.mean = mean(score.per_fold);
  return score;
}

}  // namespace aenc
