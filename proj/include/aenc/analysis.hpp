#pragma once

#include "aenc/encode.hpp"
#include "aenc/stattests.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace aenc {

// --- permutation null -----------------------------------------------------

/// uniform: full permutation of y. circular: y rotated by a random non-zero offset.
/// block: y cut into consecutive blocks of `block_length` samples, blocks permuted.
enum class ShuffleScheme { uniform, circular, block };

std::string to_string(ShuffleScheme scheme);
ShuffleScheme parse_shuffle_scheme(const std::string& text);

struct NullOptions {
  std::size_t n_shuffles = 200;
  std::uint64_t seed = 0;
  ShuffleScheme scheme = ShuffleScheme::uniform;
  std::size_t block_length = 10;
  unsigned threads = 0;
};

struct NullDistribution {
  std::vector<double> scores;  // mean emotion score per shuffle
  std::uint64_t seed = 0;
  ShuffleScheme scheme = ShuffleScheme::uniform;
};

/// Shuffled copy of y for shuffle index `index` (stream `index` of `seed`).
Vector shuffle_responses(const Vector& y, std::uint64_t seed, std::size_t index, ShuffleScheme scheme,
                         std::size_t block_length = 10);

/// Emotion scores after shuffling y, each refit with the same fold plan.
NullDistribution permutation_null(const AlignedDataset& ds, const FoldPlan& folds, std::span<const double> grid,
                                  const NullOptions& options = {});

// --- significance ---------------------------------------------------------

struct TargetSignificance {
  std::string label;
  double real_mean = 0.0;
  double null_mean = 0.0;
  double null_q99 = 0.0;
  double u = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  bool significant = false;
};

struct SignificanceMap {
  std::vector<TargetSignificance> targets;
  double alpha = 0.05;
};

/// Per target, one-sided Mann-Whitney U of the real fold scores against the null scores
/// (greater), then Benjamini-Hochberg across targets.
SignificanceMap significance_map(std::span<const std::vector<double>> real_scores,
                                 std::span<const std::vector<double>> nulls, std::span<const std::string> labels,
                                 double alpha = 0.05);

/// Fold-level scores of one condition across repeated seeded CV, with a fingerprint of every
/// fold plan used.
struct ConditionScores {
  std::vector<std::vector<double>> per_target;
  std::uint64_t fold_fingerprint = 0;
};

struct RepeatedScores {
  std::vector<double> scores;  // repeats x folds, repeat-major
  std::uint64_t fold_fingerprint = 0;
};

/// Repeat r uses stratified_folds(video_id, k, derive_seed(seed, r)).
RepeatedScores repeated_cv_scores(const AlignedDataset& ds, int k, std::size_t repeats, std::uint64_t seed,
                                  std::span<const double> grid);

struct RegionDifference {
  std::string label;
  double delta = 0.0;  // mean(A) - mean(B)
  double u = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  bool significant = false;
};

/// Two-sided Mann-Whitney of A against B per region, Holm across regions.
/// Throws if the two conditions were not scored on identical folds.
std::vector<RegionDifference> score_difference_map(const ConditionScores& a, const ConditionScores& b,
                                                   std::span<const std::string> labels, double alpha = 0.05);

// --- stepwise -------------------------------------------------------------

enum class StepOrder { ab, ba };

std::string to_string(StepOrder order);
StepOrder parse_step_order(const std::string& text);

struct StepwiseOptions {
  StepOrder order = StepOrder::ab;
  std::size_t iterations = 100;
  std::uint64_t seed = 0;
  int folds = 5;
  unsigned threads = 0;
};

struct StepwisePath {
  Matrix scores;  // iterations x steps; column s uses the first s + 1 features
  std::vector<std::vector<std::string>> order_log;
  std::size_t boundary = 0;  // features in the first group; column boundary - 1 closes it
  StepOrder order = StepOrder::ab;
  std::vector<std::uint64_t> fold_seeds;
};

struct FeatureGroup {
  Matrix values;  // samples x features
  std::vector<std::string> names;
};

/// Iteration i shuffles the order within each group, then adds features one at a time (first
/// group, then second), scoring each prefix with a single fold plan for the iteration.
StepwisePath stepwise(const FeatureGroup& a, const FeatureGroup& b, const Vector& y, std::span<const int> video_id,
                      std::span<const double> grid, const StepwiseOptions& options = {});

// --- layers ---------------------------------------------------------------

struct LayerwiseResult {
  std::vector<EmotionScore> scores;  // per layer
  std::vector<double> gains;         // (s_k - s_0) / |s_0|; NaN when s_0 == 0
  std::vector<std::size_t> top;      // best layers first, ties to the lower index
};

/// Scores every layer's features against the template's y (covariates and videos shared) using
/// one fold plan.
LayerwiseResult layerwise_scores(std::span<const Matrix> layers, const AlignedDataset& tmpl, const FoldPlan& folds,
                                 std::span<const double> grid, std::size_t top_m = 3);

// --- element effect -------------------------------------------------------

struct AudioSamples {
  std::string audio_id;
  Matrix voice;       // samples x features
  Matrix soundtrack;  // samples x features
  Vector y;
};

enum class Dominance { voice, soundtrack, tie };

std::string to_string(Dominance d);

struct ElementEffect {
  std::string audio_id;
  double voice_score = 0.0;
  double soundtrack_score = 0.0;
  Dominance dominance = Dominance::tie;
};

inline constexpr double kDominanceTie = 1e-9;

/// Leave-one-audio-out: models trained on the other audios predict the held-out one from voice and
/// from soundtrack features; the higher PCC names the dominant element.
std::vector<ElementEffect> loo_element_effect(std::span<const AudioSamples> audios, std::span<const double> grid,
                                              std::uint64_t seed = 0, unsigned threads = 0);

}  // namespace aenc
