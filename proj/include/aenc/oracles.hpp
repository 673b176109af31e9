#pragma once

// Deliberately naive reference implementations. Nothing here calls into the optimized code
// paths, so a shared bug cannot hide on both sides of a comparison. Each oracle refuses
// instances above its size bound.

#include "aenc/stattests.hpp"
#include "aenc/synchrony.hpp"
#include "aenc/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace aenc::oracle {

inline constexpr std::size_t kMaxSubjects = 6;
inline constexpr std::size_t kMaxSamples = 5000;
inline constexpr Eigen::Index kMaxPcaFeatures = 10;
inline constexpr std::size_t kMaxPValues = 10000;
inline constexpr std::size_t kMaxDftLength = 16384;
inline constexpr std::size_t kMaxEnumeratedSubsets = 5'000'000;

/// Two-pass Pearson correlation; NaN when either series has no spread.
double window_corr(std::span<const double> x, std::span<const double> y);

/// Mean over all subject pairs of window_corr on [start, start + length) of one channel, after
/// optional first differencing. Any subject count; length bounded by kMaxSamples.
double single_window(const SubjectStack& stack, Eigen::Index channel, std::size_t start, std::size_t length,
                     bool differentiate);

/// Group synchrony, channels x windows, window by window. S <= 6, T <= 5000.
Matrix group_synchrony(const SubjectStack& stack, const WindowPlan& plan, bool differentiate);

struct Pca {
  Vector mean;
  Matrix components;  // features x k, largest-magnitude loading positive
  Vector explained_ratio;
};

/// Cyclic Jacobi eigendecomposition of the explicit sample covariance. Features <= 10.
Pca pca(const Matrix& X, Eigen::Index k);

/// Benjamini-Hochberg by literal scans: the largest i with p_(i) <= i alpha / m, and adjusted
/// p_(i) = min over j >= i of m p_(j) / j.
Adjustment bh(std::span<const double> p, double alpha);

/// Holm by a literal step-down loop; adjusted p_(i) = max over j <= i of (m - j + 1) p_(j).
Adjustment holm(std::span<const double> p, double alpha);

/// sum_k |DFT(x)[k]|^2 by the O(N^2) transform.
double dft_energy(std::span<const double> x);

/// Exact signed-rank p-value by visiting all 2^n sign assignments (n <= 25 after dropping zeros).
double wilcoxon_exact_p(std::span<const double> x, double mu, Alternative alt);

/// Exact rank-sum p-value: every split of the pooled sample when the count is at most
/// kMaxEnumeratedSubsets, otherwise the classical recurrence for tie-free data.
double mann_whitney_exact_p(std::span<const double> a, std::span<const double> b, Alternative alt);

}  // namespace aenc::oracle
