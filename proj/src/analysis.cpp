#include "aenc/analysis.hpp"

#include "aenc/parallel.hpp"
#include "aenc/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace aenc {

std::string to_string(ShuffleScheme scheme) {
  switch (scheme) {
    case ShuffleScheme::uniform: return "uniform";
    case ShuffleScheme::circular: return "circular";
    case ShuffleScheme::block: return "block";
  }
  return "uniform";
}

ShuffleScheme parse_shuffle_scheme(const std::string& text) {
  if (text == "uniform") return ShuffleScheme::uniform;
  if (text == "circular") return ShuffleScheme::circular;
  if (text == "block") return ShuffleScheme::block;
  throw std::invalid_argument("unknown shuffle scheme '" + text + "' (expected uniform, circular or block)");
}

std::string to_string(StepOrder order) { return order == StepOrder::ab ? "AB" : "BA"; }

StepOrder parse_step_order(const std::string& text) {
  if (text == "AB" || text == "ab") return StepOrder::ab;
  if (text == "BA" || text == "ba") return StepOrder::ba;
  throw std::invalid_argument("unknown step order '" + text + "' (expected AB or BA)");
}

std::string to_string(Dominance d) {
  switch (d) {
    case Dominance::voice: return "voice";
    case Dominance::soundtrack: return "soundtrack";
    case Dominance::tie: return "tie";
  }
  return "tie";
}

Vector shuffle_responses(const Vector& y, std::uint64_t seed, std::size_t index, ShuffleScheme scheme,
                         std::size_t block_length) {
  const auto n = static_cast<std::size_t>(y.size());
  CounterRng rng(seed, index);
  Vector out(y.size());
  switch (scheme) {
    case ShuffleScheme::uniform: {
      const auto perm = rng.permutation(n);
      for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(perm[i]));
      break;
    }
    case ShuffleScheme::circular: {
      const std::size_t shift = n > 1 ? 1 + static_cast<std::size_t>(rng.bounded(n - 1)) : 0;
      for (std::size_t i = 0; i < n; ++i)
        out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>((i + shift) % n));
      break;
    }
    case ShuffleScheme::block: {
      if (block_length == 0) throw std::invalid_argument("shuffle_responses: block length must be positive");
      const std::size_t blocks = (n + block_length - 1) / block_length;
      const auto perm = rng.permutation(blocks);
      std::size_t pos = 0;
      for (std::size_t b : perm)
        for (std::size_t i = b * block_length; i < std::min(n, (b + 1) * block_length); ++i)
          out(static_cast<Eigen::Index>(pos++)) = y(static_cast<Eigen::Index>(i));
      break;
    }
  }
  return out;
}

NullDistribution permutation_null(const AlignedDataset& ds, const FoldPlan& folds, std::span<const double> grid,
                                  const NullOptions& options) {
  ds.validate();
  NullDistribution null;
  null.seed = options.seed;
  null.scheme = options.scheme;
  null.scores.assign(options.n_shuffles, 0.0);
  parallel_for(options.n_shuffles, options.threads, [&](std::size_t i) {
    AlignedDataset shuffled = ds;
    shuffled.y = shuffle_responses(ds.y, options.seed, i, options.scheme, options.block_length);
    null.scores[i] = emotion_score(shuffled, folds, grid).mean;
  });
  return null;
}

SignificanceMap significance_map(std::span<const std::vector<double>> real_scores,
                                 std::span<const std::vector<double>> nulls, std::span<const std::string> labels,
                                 double alpha) {
  if (real_scores.size() != nulls.size() || labels.size() != nulls.size())
    throw std::invalid_argument("significance_map: targets, nulls and labels differ in count");
  SignificanceMap map;
  map.alpha = alpha;
  std::vector<double> p;
  for (std::size_t t = 0; t < nulls.size(); ++t) {
    if (nulls[t].empty()) throw std::invalid_argument("significance_map: empty null for target " + labels[t]);
    if (real_scores[t].empty()) throw std::invalid_argument("significance_map: no real scores for target " + labels[t]);
    const auto test = mann_whitney_u(real_scores[t], nulls[t], Alternative::greater);
    TargetSignificance row;
    row.label = labels[t];
    row.real_mean = mean(real_scores[t]);
    row.null_mean = mean(nulls[t]);
    row.null_q99 = quantile(nulls[t], 0.99);
    row.u = test.statistic;
    row.p_raw = test.p_value;
    p.push_back(test.p_value);
    map.targets.push_back(row);
  }
  const auto adj = bh_fdr(p, alpha);
  for (std::size_t t = 0; t < map.targets.size(); ++t) {
    map.targets[t].p_adjusted = adj.adjusted[t];
    map.targets[t].significant = adj.reject[t];
  }
  return map;
}

RepeatedScores repeated_cv_scores(const AlignedDataset& ds, int k, std::size_t repeats, std::uint64_t seed,
                                  std::span<const double> grid) {
  RepeatedScores out;
  std::uint64_t fp = 0x726570656174ULL;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto plan = stratified_folds(ds.video_id, k, derive_seed(seed, r));
    const auto score = emotion_score(ds, plan, grid);
    out.scores.insert(out.scores.end(), score.per_fold.begin(), score.per_fold.end());
    fp = CounterRng::mix(fp ^ plan.fingerprint());
  }
  out.fold_fingerprint = fp;
  return out;
}

std::vector<RegionDifference> score_difference_map(const ConditionScores& a, const ConditionScores& b,
                                                   std::span<const std::string> labels, double alpha) {
  if (a.fold_fingerprint != b.fold_fingerprint)
    throw std::invalid_argument("score_difference_map: conditions were scored on different fold plans");
  if (a.per_target.size() != b.per_target.size() || labels.size() != a.per_target.size())
    throw std::invalid_argument("score_difference_map: region counts differ");
  std::vector<RegionDifference> out;
  std::vector<double> p;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (a.per_target[r].empty() || b.per_target[r].empty())
      throw std::invalid_argument("score_difference_map: no scores for region " + labels[r]);
    const auto test = mann_whitney_u(a.per_target[r], b.per_target[r], Alternative::two_sided);
    RegionDifference row;
    row.label = labels[r];
    row.delta = mean(a.per_target[r]) - mean(b.per_target[r]);
    row.u = test.statistic;
    row.p_raw = test.p_value;
    p.push_back(test.p_value);
    out.push_back(row);
  }
  const auto adj = holm_fwer(p, alpha);
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r].p_adjusted = adj.adjusted[r];
    out[r].significant = adj.reject[r];
  }
  return out;
}

StepwisePath stepwise(const FeatureGroup& a, const FeatureGroup& b, const Vector& y, std::span<const int> video_id,
                      std::span<const double> grid, const StepwiseOptions& options) {
  if (a.values.cols() == 0 || b.values.cols() == 0) throw std::invalid_argument("stepwise: both groups need features");
  if (a.values.rows() != y.size() || b.values.rows() != y.size())
    throw std::invalid_argument("stepwise: group row counts differ from y");
  if (static_cast<Eigen::Index>(a.names.size()) != a.values.cols() ||
      static_cast<Eigen::Index>(b.names.size()) != b.values.cols())
    throw std::invalid_argument("stepwise: feature names do not match column counts");
  if (options.iterations == 0) throw std::invalid_argument("stepwise: need at least one iteration");

  const FeatureGroup& first = options.order == StepOrder::ab ? a : b;
  const FeatureGroup& second = options.order == StepOrder::ab ? b : a;
  const auto steps = static_cast<std::size_t>(first.values.cols() + second.values.cols());

  StepwisePath path;
  path.order = options.order;
  path.boundary = static_cast<std::size_t>(first.values.cols());
  path.scores = Matrix::Zero(static_cast<Eigen::Index>(options.iterations), static_cast<Eigen::Index>(steps));
  path.order_log.assign(options.iterations, {});
  path.fold_seeds.assign(options.iterations, 0);

  parallel_for(options.iterations, options.threads, [&](std::size_t it) {
    CounterRng rng(derive_seed(options.seed, 0x73746570ULL), it);
    auto order_a = rng.permutation(static_cast<std::size_t>(a.values.cols()));
    auto order_b = rng.permutation(static_cast<std::size_t>(b.values.cols()));
    const auto& order_first = options.order == StepOrder::ab ? order_a : order_b;
    const auto& order_second = options.order == StepOrder::ab ? order_b : order_a;

    AlignedDataset ds;
    ds.X.resize(y.size(), static_cast<Eigen::Index>(steps));
    ds.y = y;
    ds.video_id.assign(video_id.begin(), video_id.end());
    std::vector<std::string> log;
    Eigen::Index col = 0;
    for (std::size_t j : order_first) {
      ds.X.col(col++) = first.values.col(static_cast<Eigen::Index>(j));
      log.push_back(first.names[j]);
    }
    for (std::size_t j : order_second) {
      ds.X.col(col++) = second.values.col(static_cast<Eigen::Index>(j));
      log.push_back(second.names[j]);
    }
    path.fold_seeds[it] = derive_seed(options.seed, it);
    const auto plan = stratified_folds(video_id, options.folds, path.fold_seeds[it]);

    AlignedDataset prefix;
    prefix.y = y;
    prefix.video_id = ds.video_id;
    for (std::size_t s = 0; s < steps; ++s) {
      prefix.X = ds.X.leftCols(static_cast<Eigen::Index>(s + 1));
      path.scores(static_cast<Eigen::Index>(it), static_cast<Eigen::Index>(s)) = emotion_score(prefix, plan, grid).mean;
    }
    path.order_log[it] = std::move(log);
  });
  return path;
}

LayerwiseResult layerwise_scores(std::span<const Matrix> layers, const AlignedDataset& tmpl, const FoldPlan& folds,
                                 std::span<const double> grid, std::size_t top_m) {
  if (layers.empty()) throw std::invalid_argument("layerwise_scores: no layers");
  for (std::size_t k = 0; k < layers.size(); ++k)
    if (layers[k].rows() != static_cast<Eigen::Index>(tmpl.samples()))
      throw std::invalid_argument("layerwise_scores: layer " + std::to_string(k) + " has " +
                                  std::to_string(layers[k].rows()) + " rows but the responses have " +
                                  std::to_string(tmpl.samples()));
  LayerwiseResult result;
  for (const auto& layer : layers) {
    AlignedDataset ds = tmpl;
    ds.X = layer;
    result.scores.push_back(emotion_score(ds, folds, grid));
  }
  const double s0 = result.scores.front().mean;
  for (const auto& s : result.scores)
    result.gains.push_back(s0 != 0.0 ? (s.mean - s0) / std::abs(s0) : std::nan(""));
  std::vector<std::size_t> order(layers.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return result.scores[i].mean > result.scores[j].mean; });
  order.resize(std::min(top_m, order.size()));
  result.top = std::move(order);
  return result;
}

namespace {

double held_out_score(std::span<const AudioSamples> audios, std::size_t held, bool voice, std::span<const double> grid,
                      std::uint64_t seed) {
  auto block = [&](const AudioSamples& s) -> const Matrix& { return voice ? s.voice : s.soundtrack; };
  Eigen::Index rows = 0;
  for (std::size_t i = 0; i < audios.size(); ++i)
    if (i != held) rows += audios[i].y.size();
  const Eigen::Index d = block(audios[held]).cols();
  Matrix X(rows, d);
  Vector y(rows);
  std::vector<int> group;
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < audios.size(); ++i) {
    if (i == held) continue;
    const auto n = audios[i].y.size();
    X.middleRows(r, n) = block(audios[i]);
    y.segment(r, n) = audios[i].y;
    group.insert(group.end(), static_cast<std::size_t>(n), static_cast<int>(i));
    r += n;
  }
  const double lambda = nested_cv_lambda(X, y, grid, group, {5, seed});
  const Vector pred = ridge_fit(X, y, lambda).predict(block(audios[held]));
  const Vector& truth = audios[held].y;
  return pearson_or_zero(std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())),
                         std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())));
}

}  // namespace

std::vector<ElementEffect> loo_element_effect(std::span<const AudioSamples> audios, std::span<const double> grid,
                                              std::uint64_t seed, unsigned threads) {
  if (audios.size() < 3) throw std::invalid_argument("loo_element_effect: need at least 3 audios");
  for (const auto& a : audios) {
    if (a.voice.rows() != a.y.size() || a.soundtrack.rows() != a.y.size())
      throw std::invalid_argument("loo_element_effect: audio " + a.audio_id + " has mismatched row counts");
    if (a.voice.cols() != audios.front().voice.cols() || a.soundtrack.cols() != audios.front().soundtrack.cols())
      throw std::invalid_argument("loo_element_effect: audio " + a.audio_id + " has a different feature count");
    if (a.y.size() < 3) throw std::invalid_argument("loo_element_effect: audio " + a.audio_id + " has fewer than 3 samples");
  }
  std::vector<ElementEffect> out(audios.size());
  parallel_for(audios.size(), threads, [&](std::size_t i) {
    ElementEffect e;
    e.audio_id = audios[i].audio_id;
    const auto s = derive_seed(seed, i);
    e.voice_score = held_out_score(audios, i, true, grid, s);
    e.soundtrack_score = held_out_score(audios, i, false, grid, s);
    const double delta = e.voice_score - e.soundtrack_score;
    e.dominance = std::abs(delta) < kDominanceTie ? Dominance::tie : delta > 0 ? Dominance::voice : Dominance::soundtrack;
    out[i] = e;
  });
  return out;
}

}  // namespace aenc
