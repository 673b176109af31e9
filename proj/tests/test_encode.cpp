#include "aenc/encode.hpp"
#include "aenc/oracles.hpp"
#include "aenc/random.hpp"
#include "aenc/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace aenc;

namespace {

AlignedDataset linear(std::size_t n, double snr, std::uint64_t seed, std::size_t videos = 5) {
  SynthSpec spec;
  spec.n_samples = n;
  spec.snr = snr;
  spec.seed = seed;
  spec.n_videos = videos;
  return gen_linear_dataset(spec).data;
}

Matrix gather(const Matrix& M, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), M.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = M.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

// Same subspace up to column sign.
double max_abs_diff_up_to_sign(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double s = a.col(j).dot(b.col(j)) < 0 ? -1.0 : 1.0;
    worst = std::max(worst, (a.col(j) - s * b.col(j)).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace

// --- alignment --------------------------------------------------------------

TEST_CASE("aligning a constant stays constant") {
  const auto plan = window_plan(60, 1.0);
  const auto out = align_to_windows(std::vector<double>(60, 2.5), 1.0, plan);
  REQUIRE(out.size() == plan.n_windows);
  for (double v : out) CHECK(v == 2.5);
}

TEST_CASE("aligning a 1 Hz ramp gives w + 4.5") {
  std::vector<double> ramp(180);
  std::iota(ramp.begin(), ramp.end(), 0.0);
  const auto plan = window_plan(180, 1.0);
  const auto out = align_to_windows(ramp, 1.0, plan);
  REQUIRE(out.size() == 171);
  for (std::size_t w = 0; w < out.size(); ++w) CHECK(out[w] == doctest::Approx(static_cast<double>(w) + 4.5));
}

TEST_CASE("aligning a finer-rate table onto a synchrony plan") {
  // 200 Hz EEG plan, 50 Hz frames: each window averages 500 frames
  const auto plan = window_plan(200 * 30 - 1, 200.0);
  FeatureTable t;
  t.frame_rate_hz = 50.0;
  t.values = Matrix(50 * 30, 1);
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) t.values(i, 0) = static_cast<double>(i);
  t.feature_names = {"f"};
  const Matrix out = align_to_windows(t, plan);
  REQUIRE(out.rows() == static_cast<Eigen::Index>(plan.n_windows));
  CHECK(out(0, 0) == doctest::Approx(249.5));
  CHECK(out(3, 0) == doctest::Approx(150 + 249.5));
}

TEST_CASE("alignment skips missing frames and rejects short sources") {
  std::vector<double> x(30, 1.0);
  x[2] = kMissing;
  x[5] = 4.0;
  const auto plan = window_plan(30, 1.0);
  const auto out = align_to_windows(x, 1.0, plan);
  CHECK(out[0] == doctest::Approx((8.0 + 4.0) / 9.0));

  std::vector<double> gap(30, kMissing);
  for (std::size_t i = 10; i < 30; ++i) gap[i] = 1.0;
  CHECK(std::isnan(align_to_windows(gap, 1.0, plan)[0]));

  // within one window of shortfall is tolerated, more is not
  const auto long_plan = window_plan(45, 1.0);
  CHECK_NOTHROW(align_to_windows(std::vector<double>(36, 1.0), 1.0, long_plan));
  CHECK_THROWS_AS(align_to_windows(std::vector<double>(34, 1.0), 1.0, long_plan), std::invalid_argument);

  ResponseSeries r;
  r.values = std::vector<double>(30, 3.0);
  r.channel_or_region_id = "arousal";
  const auto aligned = align_to_windows(r, 1.0, plan);
  CHECK(aligned.values.size() == plan.n_windows);
  CHECK(aligned.channel_or_region_id == "arousal");
}

// --- PCA --------------------------------------------------------------------

TEST_CASE("points on a line need one component") {
  Matrix X(20, 2);
  for (int i = 0; i < 20; ++i) X.row(i) << i * 0.5 - 3.0, -2.0 * (i * 0.5 - 3.0) + 1.0;
  const auto m = pca_fit(X, 1);
  CHECK(m.explained_ratio(0) == doctest::Approx(1.0).epsilon(1e-10));
  const auto two = pca_fit(X, 2);
  CHECK(two.explained_ratio(1) <= 1e-10);
}

TEST_CASE("transform of the mean row is zero") {
  const Matrix X = gen_normal_matrix(30, 5, 3);
  const auto m = pca_fit(X, 3);
  const Matrix mean_row = m.mean.transpose();
  CHECK(pca_transform(m, mean_row).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("5x3 toy matrix matches the covariance eigendecomposition oracle") {
  const Matrix X{{2.5, 2.4, 0.5}, {0.5, 0.7, -1.1}, {2.2, 2.9, 0.3}, {1.9, 2.2, 0.8}, {3.1, 3.0, -0.4}};
  const auto m = pca_fit(X, 3);
  const auto o = oracle::pca(X, 3);
  CHECK(max_abs_diff_up_to_sign(m.components, o.components) <= 1e-8);
  CHECK((m.explained_ratio - o.explained_ratio).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(o.explained_ratio.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pca invariants and reconstruction against the oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Matrix X = gen_normal_matrix(25, 8, seed);
    X.col(1) += 2.0 * X.col(0);
    X.col(5) *= 3.0;
    const Eigen::Index k = 3;
    const auto m = pca_fit(X, k);
    CHECK((m.components.transpose() * m.components - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() <= 1e-8);
    for (Eigen::Index j = 1; j < k; ++j) CHECK(m.explained_ratio(j) <= m.explained_ratio(j - 1));
    CHECK(m.explained_ratio.sum() <= 1.0 + 1e-12);

    const Matrix centered = X.rowwise() - m.mean.transpose();
    const Matrix Z = pca_transform(m, X);
    const double err = (centered - Z * m.components.transpose()).squaredNorm();
    const auto o = oracle::pca(X, k);
    const double oerr = (centered - centered * o.components * o.components.transpose()).squaredNorm();
    CHECK(err <= oerr + 1e-8);
  }
}

TEST_CASE("pca rejects k out of range") {
  const Matrix X = gen_normal_matrix(5, 10, 1);
  CHECK_THROWS_AS(pca_fit(X, 5), std::invalid_argument);
  CHECK_THROWS_AS(pca_fit(X, 0), std::invalid_argument);
  CHECK_NOTHROW(pca_fit(X, 4));
}

// --- folds ------------------------------------------------------------------

TEST_CASE("one video of 10 samples gives folds of 2") {
  const std::vector<int> vid(10, 0);
  const auto plan = stratified_folds(vid, 5, 1);
  for (int f = 0; f < 5; ++f) CHECK(plan.members(f).size() == 2);
}

TEST_CASE("per-video fold sizes differ by at most one") {
  std::vector<int> vid(7, 0);
  vid.insert(vid.end(), 8, 1);
  const auto plan = stratified_folds(vid, 5, 2);
  for (int v = 0; v < 2; ++v) {
    std::map<int, int> sizes;
    for (std::size_t i = 0; i < vid.size(); ++i)
      if (vid[i] == v) ++sizes[plan.fold[i]];
    int lo = 100, hi = 0;
    for (int f = 0; f < 5; ++f) {
      lo = std::min(lo, sizes[f]);
      hi = std::max(hi, sizes[f]);
    }
    CHECK(hi - lo <= 1);
  }
  std::size_t total = 0;
  for (int f = 0; f < 5; ++f) total += plan.members(f).size();
  CHECK(total == vid.size());
}

TEST_CASE("folds are a function of the seed") {
  std::vector<int> vid;
  for (int i = 0; i < 40; ++i) vid.push_back(i / 10);
  const auto a = stratified_folds(vid, 5, 9), b = stratified_folds(vid, 5, 9), c = stratified_folds(vid, 5, 10);
  CHECK(a.fold == b.fold);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fold != c.fold);
  CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("undersized videos are rejected") {
  std::vector<int> vid(10, 0);
  vid.push_back(1);
  CHECK_THROWS_AS(stratified_folds(vid, 5, 0), std::invalid_argument);
}

// --- ridge ------------------------------------------------------------------

TEST_CASE("lambda grids") {
  const auto g = default_lambda_grid();
  REQUIRE(g.size() == 20);
  CHECK(g.front() == doctest::Approx(10.0));
  CHECK(g.back() == doctest::Approx(1e8));
  for (std::size_t i = 1; i < g.size(); ++i)
    CHECK(std::log10(g[i]) - std::log10(g[i - 1]) == doctest::Approx(7.0 / 19.0));
  CHECK(log_grid(5, 5, 1) == std::vector<double>{5});
}

TEST_CASE("unpenalized ridge on a square system recovers the weights") {
  const Matrix X = gen_normal_matrix(6, 6, 21) + 3.0 * Matrix::Identity(6, 6);
  const Vector v = gen_normal_matrix(6, 1, 22).col(0);
  const Vector y = X * v;
  CHECK((ridge_solve(X, y, 0.0) - v).cwiseAbs().maxCoeff() <= 1e-8);
  const auto fit = ridge_fit(X, y, 0.0, false);
  CHECK((fit.weights - v).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("huge penalty shrinks weights to nothing") {
  const auto ds = linear(200, 1.0, 4);
  const auto fit = ridge_fit(ds.X, ds.y, 1e12);
  CHECK(fit.weights.norm() < 1e-6);
  const Vector p = fit.predict(ds.X);
  CHECK((p.array() - ds.y.mean()).abs().maxCoeff() < 1e-5);
  CHECK(fit.intercept == doctest::Approx(ds.y.mean()));
}

TEST_CASE("weight norm shrinks monotonically along the grid") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ds = linear(80, 0.5, seed);
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : default_lambda_grid()) {
      const double norm = ridge_fit(ds.X, ds.y, lambda).weights.norm();
      CHECK(norm <= previous * (1.0 + 1e-12));
      previous = norm;
    }
  }
}

TEST_CASE("singular systems fall back to SVD") {
  Matrix X = gen_normal_matrix(30, 4, 5);
  X.col(3) = X.col(2);
  const Vector y = X.col(0) + X.col(2);
  const Vector v = ridge_solve(X, y, 0.0);
  CHECK(v.allFinite());
  CHECK((X * v - y).norm() <= 1e-8);
  // minimum-norm solution splits the duplicated column evenly
  CHECK(v(2) == doctest::Approx(v(3)).epsilon(1e-8));
}

TEST_CASE("ridge rejects non-finite input") {
  Matrix X = gen_normal_matrix(10, 2, 1);
  X(3, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ridge_fit(X, Vector::Ones(10), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ridge_solve(gen_normal_matrix(10, 2, 1), Vector::Ones(10), -1.0), std::invalid_argument);
}

namespace {

// Index of the chosen lambda for 100 seeded trials with n = 100, d = 12.
std::vector<std::size_t> chosen_lambda_indices(double signal_gain) {
  const auto grid = default_lambda_grid();
  std::vector<std::size_t> out;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const Matrix X = gen_normal_matrix(100, 12, trial, 1);
    const Vector noise = gen_normal_matrix(100, 1, trial, 2).col(0);
    const Vector v = gen_normal_matrix(12, 1, trial, 3).col(0).normalized();
    const double lambda = nested_cv_lambda(X, X * v * signal_gain + noise, grid, {}, {5, trial});
    out.push_back(static_cast<std::size_t>(std::find(grid.begin(), grid.end(), lambda) - grid.begin()));
  }
  return out;
}

}  // namespace

TEST_CASE("nested CV on a strong signal picks the bottom half of the grid") {
  const auto idx = chosen_lambda_indices(10.0);
  CHECK(std::count_if(idx.begin(), idx.end(), [](std::size_t i) { return i < 10; }) >= 90);
}

TEST_CASE("nested CV on pure noise picks the top half of the grid") {
  const auto idx = chosen_lambda_indices(0.0);
  CHECK(std::count_if(idx.begin(), idx.end(), [](std::size_t i) { return i >= 10; }) >= 90);
}

TEST_CASE("nested CV ties go to the smaller lambda") {
  // y constant: every lambda predicts the training mean, so all errors tie
  const Matrix X = gen_normal_matrix(20, 3, 8);
  CHECK(nested_cv_lambda(X, Vector::Constant(20, 2.0), std::vector<double>{1e3, 10, 1e5}) == 10.0);
  CHECK_THROWS_AS(nested_cv_lambda(X.topRows(9), Vector::Ones(9), std::vector<double>{1}), std::invalid_argument);
}

// --- emotion score ----------------------------------------------------------

TEST_CASE("noiseless linear data scores at least 0.99") {
  const auto ds = linear(1000, kNoiseless, 1);
  const auto folds = stratified_folds(ds.video_id, 5, 1);
  const auto s = emotion_score(ds, folds, default_lambda_grid());
  CHECK(s.mean >= 0.99);
  CHECK(s.per_fold.size() == 5);
  CHECK(s.lambda_per_fold.size() == 5);
}

TEST_CASE("signal carried only by the covariates scores near zero") {
  auto ds = linear(500, kNoiseless, 2);
  ds.C = gen_normal_matrix(500, 3, 2, 9);
  ds.y = ds.C * Vector{{1.0, -0.5, 0.25}} + 0.1 * gen_normal_matrix(500, 1, 2, 10).col(0);
  const auto s = emotion_score(ds, stratified_folds(ds.video_id, 5, 2), default_lambda_grid());
  CHECK(std::abs(s.mean) < 0.1);
}

TEST_CASE("covariate zeroing isolates the audio part") {
  auto ds = linear(500, kNoiseless, 3);
  ds.C = gen_normal_matrix(500, 2, 3, 9);
  const Vector audio = ds.y;
  ds.y = audio + 3.0 * ds.C.col(0);
  const auto with_c = emotion_score(ds, stratified_folds(ds.video_id, 5, 3), default_lambda_grid());
  // the prediction is the audio part, whose correlation with y is about 1 / sqrt(10)
  CHECK(with_c.mean == doctest::Approx(1.0 / std::sqrt(10.0)).epsilon(0.15));
}

TEST_CASE("shuffled responses score near zero") {
  const auto ds = linear(500, 1.0, 4);
  const auto folds = stratified_folds(ds.video_id, 5, 4);
  double total = 0.0;
  const int shuffles = 100;
  for (int s = 0; s < shuffles; ++s) {
    AlignedDataset shuffled = ds;
    CounterRng rng(77, static_cast<std::uint64_t>(s));
    const auto perm = rng.permutation(ds.samples());
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled.y(static_cast<Eigen::Index>(i)) = ds.y(static_cast<Eigen::Index>(perm[i]));
    total += emotion_score(shuffled, folds, default_lambda_grid()).mean;
  }
  CHECK(std::abs(total / shuffles) < 0.1);
}

TEST_CASE("score is invariant to positive rescaling of y") {
  auto ds = linear(300, 1.0, 5);
  const auto folds = stratified_folds(ds.video_id, 5, 5);
  const auto a = emotion_score(ds, folds, default_lambda_grid());
  ds.y *= 37.5;
  const auto b = emotion_score(ds, folds, default_lambda_grid());
  CHECK(std::abs(a.mean - b.mean) <= 1e-9);
}

TEST_CASE("without covariates the score equals a plain audio pipeline") {
  const auto ds = linear(300, 1.0, 6);
  const auto folds = stratified_folds(ds.video_id, 5, 6);
  const auto grid = default_lambda_grid();
  const auto s = emotion_score(ds, folds, grid);
  for (int f = 0; f < 5; ++f) {
    const auto test = folds.members(f);
    std::vector<std::size_t> train;
    std::vector<int> train_vid;
    for (std::size_t i = 0; i < ds.samples(); ++i)
      if (folds.fold[i] != f) {
        train.push_back(i);
        train_vid.push_back(ds.video_id[i]);
      }
    const Matrix Xtr = gather(ds.X, train);
    const Vector ytr = gather(ds.y, train);
    const double lambda = nested_cv_lambda(Xtr, ytr, grid, train_vid, {5, derive_seed(folds.seed, static_cast<std::uint64_t>(f) + 1)});
    CHECK(lambda == s.lambda_per_fold[static_cast<std::size_t>(f)]);
    const Vector pred = ridge_fit(Xtr, ytr, lambda).predict(gather(ds.X, test));
    const Vector ytest = gather(ds.y, test);
    const double r = pearson_or_zero(std::span(pred.data(), static_cast<std::size_t>(pred.size())),
                                     std::span(ytest.data(), static_cast<std::size_t>(ytest.size())));
    CHECK(std::abs(r - s.per_fold[static_cast<std::size_t>(f)]) <= 1e-12);
  }
}

TEST_CASE("emotion score is deterministic and rejects tiny folds") {
  const auto ds = linear(200, 1.0, 7);
  const auto folds = stratified_folds(ds.video_id, 5, 7);
  const auto a = emotion_score(ds, folds, default_lambda_grid());
  const auto b = emotion_score(ds, folds, default_lambda_grid());
  CHECK(a.per_fold == b.per_fold);

  const auto small = linear(12, 1.0, 8, 1);
  CHECK_THROWS_AS(emotion_score(small, stratified_folds(small.video_id, 5, 0), default_lambda_grid()),
                  std::invalid_argument);
}

TEST_CASE("constant predictions score zero") {
  auto ds = linear(100, 1.0, 9);
  ds.X.setConstant(1.0);
  const auto s = emotion_score(ds, stratified_folds(ds.video_id, 5, 9), default_lambda_grid());
  for (double v : s.per_fold) CHECK(v == 0.0);
}
