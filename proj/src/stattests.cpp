#include "aenc/stattests.hpp"

#include "aenc/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace aenc {

std::string to_string(Alternative alt) {
  switch (alt) {
    case Alternative::two_sided: return "two-sided";
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
  }
  return "two-sided";
}

double mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean: empty input");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

namespace {

double correlation(std::span<const double> x, std::span<const double> y, bool allow_degenerate) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("pearson: need at least 3 samples");
  // The mean of a constant series need not equal the constant, so test flatness directly.
  auto flat = [](std::span<const double> v) { return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; }); };
  if (flat(x) || flat(y)) {
    if (allow_degenerate) return 0.0;
    throw DegenerateInput("pearson: constant input");
  }
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    if (allow_degenerate) return 0.0;
    throw DegenerateInput("pearson: constant input");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double normal_upper(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double tie_sum(std::span<const double> sorted) {
  double s = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    s += t * t * t - t;
    i = j;
  }
  return s;
}

// Tail probabilities of an integer-valued statistic from its count distribution.
double tail_p(const std::vector<double>& counts, long observed, Alternative alt) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double lower = 0.0, upper = 0.0;
  for (long s = 0; s < static_cast<long>(counts.size()); ++s) {
    if (s <= observed) lower += counts[static_cast<std::size_t>(s)];
    if (s >= observed) upper += counts[static_cast<std::size_t>(s)];
  }
  lower /= total;
  upper /= total;
  switch (alt) {
    case Alternative::greater: return std::min(1.0, upper);
    case Alternative::less: return std::min(1.0, lower);
    case Alternative::two_sided: return std::min(1.0, 2.0 * std::min(lower, upper));
  }
  return 1.0;
}

double normal_p(double stat, double mu, double sd, Alternative alt) {
  if (!(sd > 0.0)) return 1.0;
  switch (alt) {
    case Alternative::greater: return normal_upper((stat - mu - 0.5) / sd);
    case Alternative::less: return 1.0 - normal_upper((stat - mu + 0.5) / sd);
    case Alternative::two_sided: {
      const double z = std::max(0.0, std::abs(stat - mu) - 0.5) / sd;
      return std::min(1.0, 2.0 * normal_upper(z));
    }
  }
  return 1.0;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) { return correlation(x, y, false); }

double pearson_or_zero(std::span<const double> x, std::span<const double> y) { return correlation(x, y, true); }

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

TestResult wilcoxon_signed_rank(std::span<const double> x, double mu, Alternative alt, PMethod method) {
  std::vector<double> d;
  for (double v : x)
    if (v - mu != 0.0) d.push_back(v - mu);
  if (d.empty()) throw DegenerateInput("wilcoxon_signed_rank: all differences are zero");
  if (d.size() < 6) throw std::invalid_argument("wilcoxon_signed_rank: need at least 6 non-zero differences");

  std::vector<double> mag(d.size());
  std::transform(d.begin(), d.end(), mag.begin(), [](double v) { return std::abs(v); });
  const auto ranks = midranks(mag);
  const std::size_t n = d.size();
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w_plus += ranks[i];

  TestResult result;
  result.statistic = w_plus;
  result.n = n;
  result.alternative = alt;
  const bool exact = method == PMethod::exact || (method == PMethod::automatic && n <= kWilcoxonExactMaxN);
  if (exact) {
    // Doubled midranks are integers; enumerate sign assignments by dynamic programming.
    std::vector<long> doubled(n);
    long total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = std::lround(2.0 * ranks[i]);
      total += doubled[i];
    }
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    long reach = 0;
    for (long r : doubled) {
      for (long s = reach; s >= 0; --s)
        counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
      reach += r;
    }
    result.p_value = tail_p(counts, std::lround(2.0 * w_plus), alt);
  } else {
    std::sort(mag.begin(), mag.end());
    const double nn = static_cast<double>(n);
    const double mu_w = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_sum(mag) / 48.0;
    result.p_value = normal_p(w_plus, mu_w, std::sqrt(std::max(var, 0.0)), alt);
  }
  return result;
}

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, Alternative alt, PMethod method) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: both samples must be non-empty");
  const std::size_t n1 = a.size(), n2 = b.size(), N = n1 + n2;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  double ra = 0.0;
  for (std::size_t i = 0; i < n1; ++i) ra += ranks[i];
  const double u = ra - static_cast<double>(n1) * (n1 + 1) / 2.0;

  TestResult result;
  result.statistic = u;
  result.n = N;
  result.alternative = alt;
  const bool exact = method == PMethod::exact || (method == PMethod::automatic && n1 * n2 <= kMannWhitneyExactMaxProduct);
  if (exact) {
    // Null distribution of the doubled rank sum of the smaller group: choose m of N doubled
    // midranks uniformly.
    const bool a_small = n1 <= n2;
    const std::size_t m = a_small ? n1 : n2;
    std::vector<long> doubled(N);
    long total = 0;
    for (std::size_t i = 0; i < N; ++i) {
      doubled[i] = std::lround(2.0 * ranks[i]);
      total += doubled[i];
    }
    // dp[k][s]: number of k-subsets with doubled sum s.
    std::vector<std::vector<double>> dp(m + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
    dp[0][0] = 1.0;
    long reach = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const long r = doubled[i];
      for (std::size_t k = std::min(m, i + 1); k >= 1; --k)
        for (long s = reach; s >= 0; --s)
          if (dp[k - 1][static_cast<std::size_t>(s)] != 0.0)
            dp[k][static_cast<std::size_t>(s + r)] += dp[k - 1][static_cast<std::size_t>(s)];
      reach += r;
    }
    // Map small-group doubled rank sum to doubled U of sample a.
    const long min_sum = static_cast<long>(m * (m + 1));
    const long two_n1n2 = static_cast<long>(2 * n1 * n2);
    std::vector<double> u_counts(static_cast<std::size_t>(two_n1n2) + 1, 0.0);
    for (long s = 0; s <= total; ++s) {
      const double c = dp[m][static_cast<std::size_t>(s)];
      if (c == 0.0) continue;
      const long u_small = s - min_sum;
      const long u_a = a_small ? u_small : two_n1n2 - u_small;
      u_counts[static_cast<std::size_t>(u_a)] += c;
    }
    result.p_value = tail_p(u_counts, std::lround(2.0 * u), alt);
  } else {
    std::sort(pooled.begin(), pooled.end());
    const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2), dN = static_cast<double>(N);
    const double mu_u = dn1 * dn2 / 2.0;
    const double var = dn1 * dn2 / 12.0 * ((dN + 1.0) - tie_sum(pooled) / (dN * (dN - 1.0)));
    result.p_value = normal_p(u, mu_u, std::sqrt(std::max(var, 0.0)), alt);
  }
  return result;
}

namespace {

void check_p_values(std::span<const double> p, const char* what) {
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + ": p-value outside [0, 1]");
}

std::vector<std::size_t> ascending_order(std::span<const double> p) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  return order;
}

}  // namespace

Adjustment bh_fdr(std::span<const double> p, double alpha) {
  check_p_values(p, "bh_fdr");
  const std::size_t m = p.size();
  Adjustment out{std::vector<double>(m), std::vector<bool>(m)};
  const auto order = ascending_order(p);
  double running = 1.0;
  for (std::size_t k = m; k >= 1; --k) {
    const std::size_t idx = order[k - 1];
    running = std::min(running, static_cast<double>(m) * p[idx] / static_cast<double>(k));
    out.adjusted[idx] = std::min(1.0, std::max(running, p[idx]));
  }
  for (std::size_t i = 0; i < m; ++i) out.reject[i] = out.adjusted[i] <= alpha;
  return out;
}

Adjustment holm_fwer(std::span<const double> p, double alpha) {
  check_p_values(p, "holm_fwer");
  const std::size_t m = p.size();
  Adjustment out{std::vector<double>(m), std::vector<bool>(m)};
  const auto order = ascending_order(p);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t idx = order[k];
    running = std::max(running, std::min(1.0, static_cast<double>(m - k) * p[idx]));
    out.adjusted[idx] = running;
  }
  for (std::size_t i = 0; i < m; ++i) out.reject[i] = out.adjusted[i] <= alpha;
  return out;
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace aenc
