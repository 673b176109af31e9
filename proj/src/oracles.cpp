#include "aenc/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace aenc::oracle {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("oracle: " + what);
}

std::vector<double> series(const Matrix& subject, Eigen::Index channel, std::size_t start, std::size_t length,
                           bool differentiate) {
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const auto t = static_cast<Eigen::Index>(start + i);
    out[i] = differentiate ? subject(channel, t + 1) - subject(channel, t) : subject(channel, t);
  }
  return out;
}

// 1-based midranks by counting.
std::vector<double> brute_ranks(std::span<const double> v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (double w : v) {
      if (w < v[i]) ++less;
      if (w == v[i]) ++equal;
    }
    r[i] = static_cast<double>(less) + 0.5 * static_cast<double>(equal + 1);
  }
  return r;
}

double tail(double lower, double upper, double total, Alternative alt) {
  lower /= total;
  upper /= total;
  switch (alt) {
    case Alternative::greater: return std::min(1.0, upper);
    case Alternative::less: return std::min(1.0, lower);
    case Alternative::two_sided: return std::min(1.0, 2.0 * std::min(lower, upper));
  }
  return 1.0;
}

}  // namespace

double window_corr(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "window_corr needs two equal series of length >= 2");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  const bool flat_x = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
  const bool flat_y = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (flat_x || flat_y) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

double single_window(const SubjectStack& stack, Eigen::Index channel, std::size_t start, std::size_t length,
                     bool differentiate) {
  require(length <= kMaxSamples, "window longer than " + std::to_string(kMaxSamples) + " samples");
  require(channel >= 0 && channel < stack.n_channels(), "channel out of range");
  require(start + length + (differentiate ? 1 : 0) <= static_cast<std::size_t>(stack.n_samples()),
          "window runs past the end of the recording");
  std::vector<std::vector<double>> x;
  for (const auto& s : stack.subjects) x.push_back(series(s, channel, start, length, differentiate));
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double r = window_corr(x[i], x[j]);
      if (std::isnan(r)) continue;
      sum += r;
      ++count;
    }
  return count ? sum / static_cast<double>(count) : std::nan("");
}

Matrix group_synchrony(const SubjectStack& stack, const WindowPlan& plan, bool differentiate) {
  require(stack.n_subjects() <= kMaxSubjects, "more than " + std::to_string(kMaxSubjects) + " subjects");
  require(static_cast<std::size_t>(stack.n_samples()) <= kMaxSamples, "more than " + std::to_string(kMaxSamples) + " samples");
  Matrix out(stack.n_channels(), static_cast<Eigen::Index>(plan.n_windows));
  for (Eigen::Index c = 0; c < stack.n_channels(); ++c)
    for (std::size_t w = 0; w < plan.n_windows; ++w)
      out(c, static_cast<Eigen::Index>(w)) =
          single_window(stack, c, plan.start_indices[w], plan.window_samples, differentiate);
  return out;
}

Pca pca(const Matrix& X, Eigen::Index k) {
  const Eigen::Index n = X.rows(), d = X.cols();
  require(d <= kMaxPcaFeatures, "more than " + std::to_string(kMaxPcaFeatures) + " features");
  require(n >= 2 && k >= 1 && k <= d, "need n >= 2 and 1 <= k <= features");
  Pca out;
  out.mean = Vector::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) out.mean(j) += X(i, j) / static_cast<double>(n);
  Matrix a = Matrix::Zero(d, d);
  for (Eigen::Index p = 0; p < d; ++p)
    for (Eigen::Index q = 0; q < d; ++q) {
      double s = 0;
      for (Eigen::Index i = 0; i < n; ++i) s += (X(i, p) - out.mean(p)) * (X(i, q) - out.mean(q));
      a(p, q) = s / static_cast<double>(n - 1);
    }
  Matrix v = Matrix::Identity(d, d);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (Eigen::Index p = 0; p < d; ++p)
      for (Eigen::Index q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < d; ++p)
      for (Eigen::Index q = p + 1; q < d; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index r = 0; r < d; ++r) {
          const double arp = a(r, p), arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (Eigen::Index r = 0; r < d; ++r) {
          const double apr = a(p, r), aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
        for (Eigen::Index r = 0; r < d; ++r) {
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  double total = 0;
  for (Eigen::Index i = 0; i < d; ++i) total += std::max(a(i, i), 0.0);
  out.components.resize(d, k);
  out.explained_ratio.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    Eigen::Index big = 0;
    for (Eigen::Index r = 1; r < d; ++r)
      if (std::abs(v(r, src)) > std::abs(v(big, src))) big = r;
    const double sign = v(big, src) < 0 ? -1.0 : 1.0;
    for (Eigen::Index r = 0; r < d; ++r) out.components(r, j) = sign * v(r, src);
    out.explained_ratio(j) = total > 0 ? std::max(a(src, src), 0.0) / total : 0.0;
  }
  return out;
}

Adjustment bh(std::span<const double> p, double alpha) {
  const std::size_t m = p.size();
  require(m <= kMaxPValues, "too many p-values");
  for (double v : p) require(v >= 0.0 && v <= 1.0, "p-value outside [0, 1]");
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
  Adjustment out{std::vector<double>(m), std::vector<bool>(m, false)};
  std::size_t last = 0;  // 1-based, 0 = none
  for (std::size_t i = 1; i <= m; ++i)
    if (p[order[i - 1]] <= static_cast<double>(i) * alpha / static_cast<double>(m)) last = i;
  for (std::size_t i = 1; i <= m; ++i) {
    double best = 1.0;
    for (std::size_t j = i; j <= m; ++j) best = std::min(best, static_cast<double>(m) * p[order[j - 1]] / static_cast<double>(j));
    out.adjusted[order[i - 1]] = best;
    out.reject[order[i - 1]] = i <= last;
  }
  return out;
}

Adjustment holm(std::span<const double> p, double alpha) {
  const std::size_t m = p.size();
  require(m <= kMaxPValues, "too many p-values");
  for (double v : p) require(v >= 0.0 && v <= 1.0, "p-value outside [0, 1]");
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
  Adjustment out{std::vector<double>(m), std::vector<bool>(m, false)};
  bool stopped = false;
  for (std::size_t i = 1; i <= m; ++i) {
    if (!stopped && p[order[i - 1]] <= alpha / static_cast<double>(m - i + 1))
      out.reject[order[i - 1]] = true;
    else
      stopped = true;
    double worst = 0.0;
    for (std::size_t j = 1; j <= i; ++j)
      worst = std::max(worst, std::min(1.0, static_cast<double>(m - j + 1) * p[order[j - 1]]));
    out.adjusted[order[i - 1]] = worst;
  }
  return out;
}

double dft_energy(std::span<const double> x) {
  const std::size_t n = x.size();
  require(n >= 1 && n <= kMaxDftLength, "DFT length out of range");
  double energy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    energy += std::norm(acc);
  }
  return energy;
}

double wilcoxon_exact_p(std::span<const double> x, double mu, Alternative alt) {
  std::vector<double> d;
  for (double v : x)
    if (v - mu != 0.0) d.push_back(v - mu);
  const std::size_t n = d.size();
  require(n >= 1 && n <= 25, "signed-rank enumeration needs 1..25 non-zero differences");
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(d[i]);
  const auto ranks = brute_ranks(mag);
  std::vector<std::int64_t> r2(n);
  std::int64_t observed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r2[i] = std::llround(2.0 * ranks[i]);
    if (d[i] > 0) observed += r2[i];
  }
  // Gray code walk: one sign flips per step.
  std::uint64_t state = 0, lower = 0, upper = 0;
  std::int64_t w = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t i = 0; i < total; ++i) {
    if (i > 0) {
      const int bit = std::countr_zero(i);
      state ^= std::uint64_t{1} << bit;
      w += (state >> bit & 1) ? r2[static_cast<std::size_t>(bit)] : -r2[static_cast<std::size_t>(bit)];
    }
    if (w <= observed) ++lower;
    if (w >= observed) ++upper;
  }
  return tail(static_cast<double>(lower), static_cast<double>(upper), static_cast<double>(total), alt);
}

double mann_whitney_exact_p(std::span<const double> a, std::span<const double> b, Alternative alt) {
  const std::size_t n1 = a.size(), n2 = b.size(), N = n1 + n2;
  require(n1 >= 1 && n2 >= 1, "both samples must be non-empty");
  // Doubled U by direct pairwise comparison.
  std::int64_t observed = 0;
  for (double x : a)
    for (double y : b) observed += x > y ? 2 : x == y ? 1 : 0;

  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  double count = 1;  // C(N, n1)
  for (std::size_t i = 1; i <= n1; ++i) count = count * static_cast<double>(N - n1 + i) / static_cast<double>(i);

  double lower = 0, upper = 0, total = 0;
  if (count <= static_cast<double>(kMaxEnumeratedSubsets)) {
    const auto ranks = brute_ranks(pooled);
    std::vector<std::int64_t> r2(N);
    for (std::size_t i = 0; i < N; ++i) r2[i] = std::llround(2.0 * ranks[i]);
    const auto offset = static_cast<std::int64_t>(n1 * (n1 + 1));
    std::vector<std::size_t> pick(n1);
    for (std::size_t i = 0; i < n1; ++i) pick[i] = i;
    for (;;) {
      std::int64_t s = 0;
      for (std::size_t i : pick) s += r2[i];
      const std::int64_t u2 = s - offset;
      if (u2 <= observed) ++lower;
      if (u2 >= observed) ++upper;
      ++total;
      std::size_t i = n1;
      while (i > 0 && pick[i - 1] == N - n1 + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < n1; ++j) pick[j] = pick[j - 1] + 1;
    }
  } else {
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "recurrence requires tie-free data; instance too large to enumerate");
    // f[i][j][u]: arrangements of i a's and j b's with U = u; the largest element is an a
    // (adds j) or a b (adds 0).
    std::vector<std::vector<std::vector<double>>> f(n1 + 1, std::vector<std::vector<double>>(n2 + 1));
    for (std::size_t i = 0; i <= n1; ++i)
      for (std::size_t j = 0; j <= n2; ++j) {
        f[i][j].assign(i * j + 1, 0.0);
        if (i == 0 || j == 0) {
          f[i][j][0] = 1.0;
          continue;
        }
        for (std::size_t u = 0; u <= i * j; ++u) {
          double v = 0;
          if (u >= j && u - j < f[i - 1][j].size()) v += f[i - 1][j][u - j];
          if (u < f[i][j - 1].size()) v += f[i][j - 1][u];
          f[i][j][u] = v;
        }
      }
    for (std::size_t u = 0; u <= n1 * n2; ++u) {
      const double c = f[n1][n2][u];
      const auto u2 = static_cast<std::int64_t>(2 * u);
      if (u2 <= observed) lower += c;
      if (u2 >= observed) upper += c;
      total += c;
    }
  }
  return tail(lower, upper, total, alt);
}

}  // namespace aenc::oracle
