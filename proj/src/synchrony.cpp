#include "aenc/synchrony.hpp"

#include "aenc/parallel.hpp"
#include "aenc/random.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aenc {

void SubjectStack::validate() const {
  if (subjects.size() < 2) throw std::invalid_argument("SubjectStack: need at least 2 subjects");
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("SubjectStack: sample rate must be > 0");
  for (const auto& s : subjects)
    if (s.rows() != subjects.front().rows() || s.cols() != subjects.front().cols())
      throw std::invalid_argument("SubjectStack: subjects have different dimensions");
  if (!channel_labels.empty() && static_cast<Eigen::Index>(channel_labels.size()) != n_channels())
    throw std::invalid_argument("SubjectStack: channel label count mismatch");
}

WindowPlan window_plan(std::size_t n_samples, double rate_hz, double window_seconds, double step_seconds) {
  if (!(rate_hz > 0.0) || !(window_seconds > 0.0) || !(step_seconds > 0.0))
    throw std::invalid_argument("window_plan: rate, window and step must be positive");
  WindowPlan plan;
  plan.window_seconds = window_seconds;
  plan.step_seconds = step_seconds;
  plan.rate_hz = rate_hz;
  plan.n_samples = n_samples;
  plan.window_samples = static_cast<std::size_t>(std::llround(window_seconds * rate_hz));
  plan.step_samples = static_cast<std::size_t>(std::llround(step_seconds * rate_hz));
  if (plan.window_samples < 2 || plan.step_samples < 1)
    throw std::invalid_argument("window_plan: window must span at least 2 samples");
  if (n_samples < plan.window_samples)
    throw std::invalid_argument("window_plan: signal (" + std::to_string(n_samples) +
                                " samples) is shorter than one window (" + std::to_string(plan.window_samples) + ")");
  plan.n_windows = (n_samples - plan.window_samples) / plan.step_samples + 1;
  plan.start_indices.resize(plan.n_windows);
  for (std::size_t w = 0; w < plan.n_windows; ++w) plan.start_indices[w] = w * plan.step_samples;
  return plan;
}

WindowPlan plan_for(const SubjectStack& stack, double window_seconds, double step_seconds, bool differentiate) {
  stack.validate();
  const auto n = static_cast<std::size_t>(stack.n_samples());
  if (differentiate && n < 2) throw std::invalid_argument("plan_for: need at least 2 samples to difference");
  return window_plan(differentiate ? n - 1 : n, stack.sample_rate_hz, window_seconds, step_seconds);
}

ResponseSeries SynchronySeries::channel(Eigen::Index c) const {
  ResponseSeries r;
  r.source = ResponseSource::synchrony;
  r.channel_or_region_id = c < static_cast<Eigen::Index>(channel_labels.size()) ? channel_labels[static_cast<std::size_t>(c)]
                                                                                : std::to_string(c);
  r.values.resize(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index w = 0; w < values.cols(); ++w) r.values[static_cast<std::size_t>(w)] = values(c, w);
  return r;
}

std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n) {
  if (!(i < j && j < n)) throw std::invalid_argument("pair_index: need i < j < n");
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

namespace {

// Window boundaries as positions in a sorted list of cut points; cumulative sums are kept only at
// cut points so the per-pair pass is a handful of segment reductions.
struct Cuts {
  std::vector<std::size_t> points;       // sorted unique sample indices, including 0
  std::vector<std::size_t> window_begin;  // index into points
  std::vector<std::size_t> window_end;
};

Cuts make_cuts(const WindowPlan& plan) {
  Cuts cuts;
  cuts.points.push_back(0);
  for (std::size_t w = 0; w < plan.n_windows; ++w) {
    cuts.points.push_back(plan.start_indices[w]);
    cuts.points.push_back(plan.start_indices[w] + plan.window_samples);
  }
  std::sort(cuts.points.begin(), cuts.points.end());
  cuts.points.erase(std::unique(cuts.points.begin(), cuts.points.end()), cuts.points.end());
  auto locate = [&](std::size_t p) {
    return static_cast<std::size_t>(std::lower_bound(cuts.points.begin(), cuts.points.end(), p) - cuts.points.begin());
  };
  for (std::size_t w = 0; w < plan.n_windows; ++w) {
    cuts.window_begin.push_back(locate(plan.start_indices[w]));
    cuts.window_end.push_back(locate(plan.start_indices[w] + plan.window_samples));
  }
  return cuts;
}

// Four interleaved partial sums; fixed order, so the result is reproducible.
inline double dot_segment(const double* x, const double* y, std::size_t n) {
  double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += x[i] * y[i];
    a1 += x[i + 1] * y[i + 1];
    a2 += x[i + 2] * y[i + 2];
    a3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) a0 += x[i] * y[i];
  return (a0 + a1) + (a2 + a3);
}

inline double sum_segment(const double* x, std::size_t n) {
  double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += x[i];
    a1 += x[i + 1];
    a2 += x[i + 2];
    a3 += x[i + 3];
  }
  for (; i < n; ++i) a0 += x[i];
  return (a0 + a1) + (a2 + a3);
}

void cumulate(const Cuts& cuts, std::vector<double>& cum, auto&& segment) {
  cum.assign(cuts.points.size(), 0.0);
  for (std::size_t k = 1; k < cuts.points.size(); ++k)
    cum[k] = cum[k - 1] + segment(cuts.points[k - 1], cuts.points[k] - cuts.points[k - 1]);
}

struct SubjectMoments {
  std::vector<double> series;  // mean-shifted
  std::vector<double> cum_x, cum_xx;
};

std::vector<SubjectMoments> prepare_channel(const SubjectStack& stack, const WindowPlan& plan, const Cuts& cuts,
                                            Eigen::Index channel, bool differentiate) {
  const std::size_t length = plan.n_samples;
  const auto expected = static_cast<std::size_t>(stack.n_samples()) - (differentiate ? 1 : 0);
  if (length != expected)
    throw std::invalid_argument("window plan length (" + std::to_string(length) +
                                ") does not match the processed stack length (" + std::to_string(expected) + ")");
  std::vector<SubjectMoments> out(stack.n_subjects());
  for (std::size_t s = 0; s < stack.n_subjects(); ++s) {
    const auto row = stack.subjects[s].row(channel);
    auto& m = out[s];
    m.series.resize(length);
    for (std::size_t t = 0; t < length; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      m.series[t] = differentiate ? row(ti + 1) - row(ti) : row(ti);
    }
    double shift = sum_segment(m.series.data(), length) / static_cast<double>(length);
    for (double& v : m.series) v -= shift;
    const double* x = m.series.data();
    cumulate(cuts, m.cum_x, [&](std::size_t b, std::size_t n) { return sum_segment(x + b, n); });
    cumulate(cuts, m.cum_xx, [&](std::size_t b, std::size_t n) { return dot_segment(x + b, x + b, n); });
  }
  return out;
}

constexpr double kRelativeVarianceFloor = 1e-12;

void pair_windows(const SubjectMoments& a, const SubjectMoments& b, const Cuts& cuts, const WindowPlan& plan,
                  std::vector<double>& cum_xy, double* out) {
  const double* x = a.series.data();
  const double* y = b.series.data();
  cumulate(cuts, cum_xy, [&](std::size_t s, std::size_t n) { return dot_segment(x + s, y + s, n); });
  const double w = static_cast<double>(plan.window_samples);
  for (std::size_t k = 0; k < plan.n_windows; ++k) {
    const std::size_t lo = cuts.window_begin[k], hi = cuts.window_end[k];
    const double mx = (a.cum_x[hi] - a.cum_x[lo]) / w;
    const double my = (b.cum_x[hi] - b.cum_x[lo]) / w;
    const double qxx = (a.cum_xx[hi] - a.cum_xx[lo]) / w;
    const double qyy = (b.cum_xx[hi] - b.cum_xx[lo]) / w;
    const double qxy = (cum_xy[hi] - cum_xy[lo]) / w;
    const double vx = qxx - mx * mx;
    const double vy = qyy - my * my;
    if (!(vx > kRelativeVarianceFloor * qxx) || !(vy > kRelativeVarianceFloor * qyy)) {
      out[k] = std::nan("");
      continue;
    }
    const double r = (qxy - mx * my) / std::sqrt(vx * vy);
    out[k] = std::clamp(r, -1.0, 1.0);
  }
}

}  // namespace

Matrix pairwise_window_correlations(const SubjectStack& stack, const WindowPlan& plan, Eigen::Index channel,
                                    bool differentiate) {
  stack.validate();
  if (channel < 0 || channel >= stack.n_channels()) throw std::out_of_range("pairwise_window_correlations: channel");
  const Cuts cuts = make_cuts(plan);
  const auto moments = prepare_channel(stack, plan, cuts, channel, differentiate);
  const std::size_t S = stack.n_subjects();
  // Row-major scratch so each pair writes a contiguous run of windows.
  std::vector<double> buffer(S * (S - 1) / 2 * plan.n_windows);
  std::vector<double> cum_xy;
  std::size_t p = 0;
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t j = i + 1; j < S; ++j, ++p)
      pair_windows(moments[i], moments[j], cuts, plan, cum_xy, buffer.data() + p * plan.n_windows);
  Matrix out(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(plan.n_windows));
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t k = 0; k < plan.n_windows; ++k)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = buffer[r * plan.n_windows + k];
  return out;
}

SynchronySeries group_synchrony(const SubjectStack& stack, const WindowPlan& plan, bool differentiate,
                                unsigned threads) {
  stack.validate();
  const Cuts cuts = make_cuts(plan);
  const std::size_t S = stack.n_subjects();
  const auto C = stack.n_channels();
  SynchronySeries result;
  result.plan = plan;
  result.channel_labels = stack.channel_labels;
  result.values = Matrix::Constant(C, static_cast<Eigen::Index>(plan.n_windows), std::nan(""));

  parallel_for(static_cast<std::size_t>(C), threads, [&](std::size_t c) {
    const auto moments = prepare_channel(stack, plan, cuts, static_cast<Eigen::Index>(c), differentiate);
    std::vector<double> sum(plan.n_windows, 0.0), corr(plan.n_windows);
    std::vector<std::size_t> count(plan.n_windows, 0);
    std::vector<double> cum_xy;
    for (std::size_t i = 0; i < S; ++i) {
      for (std::size_t j = i + 1; j < S; ++j) {
        pair_windows(moments[i], moments[j], cuts, plan, cum_xy, corr.data());
        for (std::size_t k = 0; k < plan.n_windows; ++k) {
          if (std::isnan(corr[k])) continue;
          sum[k] += corr[k];
          ++count[k];
        }
      }
    }
    for (std::size_t k = 0; k < plan.n_windows; ++k)
      if (count[k] > 0)
        result.values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) =
            sum[k] / static_cast<double>(count[k]);
  });
  return result;
}

SplitHalfResult split_half(const SubjectStack& stack, const WindowPlan& plan, std::size_t rounds, std::uint64_t seed,
                           bool differentiate, unsigned threads) {
  stack.validate();
  const std::size_t S = stack.n_subjects();
  if (S < 4) throw std::invalid_argument("split_half: need at least 4 subjects");
  if (rounds == 0) throw std::invalid_argument("split_half: need at least one round");
  const auto C = static_cast<std::size_t>(stack.n_channels());
  std::vector<Matrix> pairs(C);
  parallel_for(C, threads, [&](std::size_t c) {
    pairs[c] = pairwise_window_correlations(stack, plan, static_cast<Eigen::Index>(c), differentiate);
  });

  const std::size_t W = plan.n_windows;
  auto half_series = [&](const Matrix& pc, const std::vector<std::size_t>& members) {
    std::vector<double> sum(W, 0.0);
    std::vector<std::size_t> count(W, 0);
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const auto row = static_cast<Eigen::Index>(
            pair_index(std::min(members[a], members[b]), std::max(members[a], members[b]), S));
        for (std::size_t k = 0; k < W; ++k) {
          const double v = pc(row, static_cast<Eigen::Index>(k));
          if (std::isnan(v)) continue;
          sum[k] += v;
          ++count[k];
        }
      }
    for (std::size_t k = 0; k < W; ++k) sum[k] = count[k] ? sum[k] / static_cast<double>(count[k]) : std::nan("");
    return sum;
  };

  SplitHalfResult result;
  result.round_pcc.resize(rounds);
  parallel_for(rounds, threads, [&](std::size_t r) {
    CounterRng rng(seed, r);
    const auto perm = rng.permutation(S);
    const std::size_t first = (S + 1) / 2;
    std::vector<std::size_t> g1(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(first));
    std::vector<std::size_t> g2(perm.begin() + static_cast<std::ptrdiff_t>(first), perm.end());
    std::sort(g1.begin(), g1.end());
    std::sort(g2.begin(), g2.end());
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < C; ++c) {
      const auto s1 = half_series(pairs[c], g1);
      const auto s2 = half_series(pairs[c], g2);
      std::vector<double> x, y;
      for (std::size_t k = 0; k < W; ++k)
        if (!std::isnan(s1[k]) && !std::isnan(s2[k])) {
          x.push_back(s1[k]);
          y.push_back(s2[k]);
        }
      if (x.size() < 3) continue;
      // Equal halves agree perfectly even when both series are flat.
      total += x == y ? 1.0 : pearson_or_zero(x, y);
      ++used;
    }
    result.round_pcc[r] = used ? total / static_cast<double>(used) : 0.0;
  });
  result.mean_pcc = mean(result.round_pcc);
  try {
    result.test = wilcoxon_signed_rank(result.round_pcc, 0.0, Alternative::two_sided);
  } catch (const DegenerateInput&) {
    result.test = TestResult{0.0, 1.0, rounds, Alternative::two_sided};
  } catch (const std::invalid_argument&) {
    // Fewer than 6 non-zero rounds: no test.
    result.test = TestResult{0.0, 1.0, rounds, Alternative::two_sided};
  }
  return result;
}

}  // namespace aenc
