#pragma once

#include "aenc/stattests.hpp"
#include "aenc/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace aenc {

/// Aligned multi-subject recording of one stimulus: one channels x samples matrix per subject.
struct SubjectStack {
  std::vector<Matrix> subjects;
  double sample_rate_hz = 0.0;
  std::vector<std::string> subject_ids;
  std::vector<std::string> channel_labels;

  std::size_t n_subjects() const { return subjects.size(); }
  Eigen::Index n_channels() const { return subjects.empty() ? 0 : subjects.front().rows(); }
  Eigen::Index n_samples() const { return subjects.empty() ? 0 : subjects.front().cols(); }
  void validate() const;
};

struct WindowPlan {
  double window_seconds = 10.0;
  double step_seconds = 1.0;
  double rate_hz = 0.0;
  std::size_t n_samples = 0;
  std::size_t window_samples = 0;
  std::size_t step_samples = 0;
  std::size_t n_windows = 0;
  std::vector<std::size_t> start_indices;

  /// Start time of window w in seconds.
  double start_seconds(std::size_t w) const { return static_cast<double>(start_indices.at(w)) / rate_hz; }
};

/// n_windows = floor((n_samples - window_samples) / step_samples) + 1.
WindowPlan window_plan(std::size_t n_samples, double rate_hz, double window_seconds = 10.0,
                       double step_seconds = 1.0);

/// Plan over the length group_synchrony will see (one sample shorter when differencing).
WindowPlan plan_for(const SubjectStack& stack, double window_seconds = 10.0, double step_seconds = 1.0,
                    bool differentiate = true);

/// Group-level synchrony, channels x windows. Missing windows (no pair with variance in both
/// members) hold NaN.
struct SynchronySeries {
  Matrix values;
  std::vector<std::string> channel_labels;
  WindowPlan plan;

  bool missing(Eigen::Index channel, Eigen::Index window) const { return std::isnan(values(channel, window)); }
  ResponseSeries channel(Eigen::Index c) const;
};

/// Index of subject pair (i, j), i < j, in lexicographic order.
std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n_subjects);

/// Pearson correlation of every subject pair in every window for one channel: pairs x windows,
/// NaN where either member has zero variance in the window. Prefix sums of x, y, x^2, y^2 and xy
/// over mean-shifted series make each window O(1).
Matrix pairwise_window_correlations(const SubjectStack& stack, const WindowPlan& plan, Eigen::Index channel,
                                    bool differentiate = true);

/// Mean of the valid pairwise correlations per channel and window.
SynchronySeries group_synchrony(const SubjectStack& stack, const WindowPlan& plan, bool differentiate = true,
                                unsigned threads = 0);

struct SplitHalfResult {
  std::vector<double> round_pcc;
  double mean_pcc = 0.0;
  TestResult test;  // Wilcoxon signed-rank of round_pcc against 0
};

/// Random halves of the subjects (odd counts put the extra subject in the first group); each half's
/// synchrony series is correlated with the other's per channel and averaged over channels.
/// Identical half series count as correlation 1, flat unequal ones as 0.
SplitHalfResult split_half(const SubjectStack& stack, const WindowPlan& plan, std::size_t rounds = 100,
                           std::uint64_t seed = 0, bool differentiate = true, unsigned threads = 0);

}  // namespace aenc
