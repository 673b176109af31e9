#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace aenc {

enum class Alternative { two_sided, greater, less };

std::string to_string(Alternative alt);

/// How a rank test computes its p-value. `automatic` picks exact enumeration inside the exact
/// regime (Wilcoxon n <= 25, Mann-Whitney n1*n2 <= 400) and the tie-corrected normal
/// approximation with continuity correction elsewhere.
enum class PMethod { automatic, exact, normal };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  Alternative alternative = Alternative::two_sided;
};

inline constexpr std::size_t kWilcoxonExactMaxN = 25;
inline constexpr std::size_t kMannWhitneyExactMaxProduct = 400;

/// Product-moment correlation. Throws DegenerateInput when either series is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Same as pearson, but a constant series yields 0 instead of an error.
double pearson_or_zero(std::span<const double> x, std::span<const double> y);

/// Signed-rank test of x - mu. Exact-zero differences are dropped; at least 6 must remain.
/// The statistic is W+ (sum of ranks of positive differences).
TestResult wilcoxon_signed_rank(std::span<const double> x, double mu = 0.0,
                                Alternative alt = Alternative::two_sided,
                                PMethod method = PMethod::automatic);

/// Rank-sum test. The statistic is U for sample a: #(a > b) + 0.5 #(a == b).
/// `greater` tests whether a tends to exceed b.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          Alternative alt = Alternative::two_sided,
                          PMethod method = PMethod::automatic);

struct Adjustment {
  std::vector<double> adjusted;
  std::vector<bool> reject;
};

/// Benjamini-Hochberg step-up.
Adjustment bh_fdr(std::span<const double> p_values, double alpha);

/// Holm step-down.
Adjustment holm_fwer(std::span<const double> p_values, double alpha);

/// Midranks (1-based) of the values; ties share the mean rank.
std::vector<double> midranks(std::span<const double> values);

/// Linear-interpolated quantile, q in [0, 1].
double quantile(std::span<const double> values, double q);

double mean(std::span<const double> values);

}  // namespace aenc
