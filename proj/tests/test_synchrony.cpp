#include "aenc/oracles.hpp"
#include "aenc/synchrony.hpp"
#include "aenc/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace aenc;

namespace {

SubjectStack noise_stack(std::size_t subjects, std::size_t channels, double seconds, double rate, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_subjects = subjects;
  spec.n_channels = channels;
  spec.duration_s = seconds;
  spec.sample_rate_hz = rate;
  spec.snr = 0.0;
  spec.seed = seed;
  return gen_subject_stack(spec);
}

double finite_mean(const Matrix& m) {
  double s = 0.0;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (!std::isnan(m.data()[i])) {
      s += m.data()[i];
      ++n;
    }
  return s / static_cast<double>(n);
}

}  // namespace

TEST_CASE("window plan counts") {
  const auto p = window_plan(36000, 200.0);
  CHECK(p.n_windows == 171);
  CHECK(p.window_samples == 2000);
  CHECK(p.step_samples == 200);
  CHECK(p.start_indices.back() + p.window_samples <= 36000);
  CHECK(p.start_seconds(3) == 3.0);
  CHECK(window_plan(2000, 200.0).n_windows == 1);
  CHECK_THROWS_AS(window_plan(1800, 200.0), std::invalid_argument);
}

TEST_CASE("plan_for accounts for differencing") {
  const auto stack = noise_stack(3, 1, 20.0, 100.0, 1);
  CHECK(plan_for(stack, 10, 1, true).n_samples == 1999);
  CHECK(plan_for(stack, 10, 1, false).n_samples == 2000);
  CHECK(plan_for(stack, 10, 1, true).n_windows == 10);
}

TEST_CASE("pair index is lexicographic") {
  CHECK(pair_index(0, 1, 4) == 0);
  CHECK(pair_index(0, 3, 4) == 2);
  CHECK(pair_index(1, 2, 4) == 3);
  CHECK(pair_index(2, 3, 4) == 5);
}

TEST_CASE("identical subjects give synchrony 1") {
  SynthSpec spec;
  spec.n_subjects = 5;
  spec.n_channels = 2;
  spec.duration_s = 30;
  spec.sample_rate_hz = 50;
  spec.snr = kNoiseless;
  const auto stack = gen_subject_stack(spec);
  const auto s = group_synchrony(stack, plan_for(stack));
  CHECK((s.values.array() - 1.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("independent noise subjects average near zero") {
  const auto stack = noise_stack(20, 1, 120.0, 100.0, 9);
  const auto plan = plan_for(stack);
  REQUIRE(plan.n_windows >= 100);
  const auto s = group_synchrony(stack, plan);
  CHECK(std::abs(finite_mean(s.values)) <= 0.05);
}

TEST_CASE("toy stack equals the two-pass oracle") {
  const auto stack = noise_stack(3, 2, 30.0, 50.0, 4);
  for (bool diff : {true, false}) {
    const auto plan = plan_for(stack, 10, 1, diff);
    const auto fast = group_synchrony(stack, plan, diff);
    const Matrix slow = oracle::group_synchrony(stack, plan, diff);
    CHECK((fast.values - slow).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("zero-variance pairs are excluded and empty windows are missing") {
  SubjectStack stack;
  stack.sample_rate_hz = 10;
  const Eigen::Index n = 300;
  Matrix a(1, n), b(1, n), flat = Matrix::Constant(1, n, 2.0);
  for (Eigen::Index t = 0; t < n; ++t) {
    a(0, t) = std::sin(0.37 * static_cast<double>(t * t % 97));
    b(0, t) = std::cos(0.11 * static_cast<double>(t * t % 89));
  }
  // subject 2 is flat for the first half only
  Matrix half = flat;
  half.rightCols(n / 2) = a.rightCols(n / 2) * 0.5 + b.rightCols(n / 2);
  stack.subjects = {a, b, half};
  const auto plan = window_plan(static_cast<std::size_t>(n), 10.0);
  const auto s = group_synchrony(stack, plan, false);
  const Matrix oracle = oracle::group_synchrony(stack, plan, false);
  CHECK((s.values - oracle).cwiseAbs().maxCoeff() <= 1e-10);
  // first window: only the (0, 1) pair counts
  const double r01 = oracle::window_corr(std::span(a.data(), 100), std::span(b.data(), 100));
  CHECK(s.values(0, 0) == doctest::Approx(r01).epsilon(1e-12));

  SubjectStack dead;
  dead.sample_rate_hz = 10;
  dead.subjects = {flat, flat};
  const auto d = group_synchrony(dead, plan, false);
  CHECK(d.missing(0, 0));
  const auto series = d.channel(0);
  CHECK(is_missing(series.values[0]));
  CHECK(series.source == ResponseSource::synchrony);
}

TEST_CASE("window correlation ignores positive affine maps of a subject") {
  auto stack = noise_stack(4, 1, 40.0, 50.0, 12);
  const auto plan = plan_for(stack);
  const Matrix before = pairwise_window_correlations(stack, plan, 0);
  stack.subjects[2] = (stack.subjects[2].array() * 3.5 + 100.0).matrix();
  const Matrix after = pairwise_window_correlations(stack, plan, 0);
  CHECK((before - after).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("subject order and thread count do not change the output") {
  SynthSpec spec;
  spec.n_subjects = 6;
  spec.n_channels = 3;
  spec.duration_s = 40;
  spec.sample_rate_hz = 50;
  spec.snr = 1.0;
  spec.seed = 77;
  auto stack = gen_subject_stack(spec);
  const auto plan = plan_for(stack);
  const auto one = group_synchrony(stack, plan, true, 1);
  const auto many = group_synchrony(stack, plan, true, 7);
  CHECK(one.values == many.values);
  std::reverse(stack.subjects.begin(), stack.subjects.end());
  const auto reversed = group_synchrony(stack, plan, true, 3);
  CHECK((one.values - reversed.values).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(one.values.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("validate rejects mismatched subjects") {
  SubjectStack s;
  s.sample_rate_hz = 10;
  s.subjects = {Matrix::Zero(2, 100), Matrix::Zero(2, 99)};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.subjects = {Matrix::Zero(2, 100)};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("split half: identical subjects correlate perfectly") {
  SynthSpec spec;
  spec.n_subjects = 6;
  spec.n_channels = 2;
  spec.duration_s = 60;
  spec.sample_rate_hz = 50;
  spec.snr = kNoiseless;
  const auto stack = gen_subject_stack(spec);
  const auto r = split_half(stack, plan_for(stack), 10, 3);
  REQUIRE(r.round_pcc.size() == 10);
  for (double v : r.round_pcc) CHECK(v == 1.0);
  CHECK(r.mean_pcc == 1.0);
}

TEST_CASE("split half: noise near zero, shared signal strong, too few subjects rejected") {
  SynthSpec spec;
  spec.n_subjects = 20;
  spec.n_channels = 2;
  spec.duration_s = 120;
  spec.sample_rate_hz = 50;
  spec.snr = 0.0;
  spec.seed = 5;
  const auto noise = gen_subject_stack(spec);
  const auto rn = split_half(noise, plan_for(noise), 100, 1);
  CHECK(std::abs(rn.mean_pcc) <= 0.1);

  spec.snr = 1.0;
  spec.modulation_depth = 0.9;
  const auto shared = gen_subject_stack(spec);
  const auto rs = split_half(shared, plan_for(shared), 100, 1);
  CHECK(rs.mean_pcc > 0.5);
  CHECK(rs.test.p_value < 1e-6);
  CHECK(rs.round_pcc.size() == 100);

  const auto again = split_half(shared, plan_for(shared), 100, 1, true, 3);
  CHECK(again.round_pcc == rs.round_pcc);

  spec.n_subjects = 3;
  const auto tiny = gen_subject_stack(spec);
  CHECK_THROWS_AS(split_half(tiny, plan_for(tiny)), std::invalid_argument);
}
