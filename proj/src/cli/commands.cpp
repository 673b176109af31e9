#include "aenc/cli/commands.hpp"

#include "aenc/audio_features.hpp"
#include "aenc/matrix_io.hpp"
#include "aenc/parallel.hpp"
#include "aenc/random.hpp"
#include "aenc/signal.hpp"
#include "aenc/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>

namespace aenc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void log(const std::string& message) { std::cerr << "[aenc] " << message << "\n"; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json vec_json(std::span<const double> v) { return json(std::vector<double>(v.begin(), v.end())); }

json stamp(const Context& ctx, const std::string& command) {
  json j;
  j["command"] = command;
  j["config_hash"] = ctx.config.fingerprint();
  j["seed"] = ctx.config.seed;
  return j;
}

// Upstream result written by `producer`; refuses missing or stale files.
json upstream(const Context& ctx, const std::string& file, const std::string& producer) {
  const fs::path path = ctx.config.output_dir / file;
  std::ifstream in(path);
  if (!in) throw DataError("missing " + path.string() + "; run `aenc " + producer + "` first");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error&) {
    throw DataError("corrupt " + path.string() + "; rerun `aenc " + producer + "`");
  }
  if (j.value("config_hash", "") != ctx.config.fingerprint())
    throw DataError("stale " + path.string() + " (config changed); rerun `aenc " + producer + "`");
  return j;
}

std::string feature_file(const std::string& id, ElementTag tag) {
  return "features/" + id + "_" + to_string(tag) + ".fbin";
}

// --- EEG --------------------------------------------------------------------

SubjectStack load_stack(const Context& ctx, const StimulusEntry& s) {
  SubjectStack stack;
  for (const auto& path : s.eeg) {
    SignalMatrix m;
    try {
      m = load_signal(path, format_from_path(path));
    } catch (const LoadError& e) {
      throw DataError(std::string("stimulus ") + s.id + ": " + e.what());
    }
    const auto& p = ctx.config.preprocess;
    if (p.enabled) {
      if (m.sample_rate_hz / 2.0 > p.notch_high_hz) m = notch_filter(m, p.notch_low_hz, p.notch_high_hz);
      if (m.sample_rate_hz >= p.target_rate_hz) m = band_and_resample(m, p.band_low_hz, p.band_high_hz, p.target_rate_hz);
    }
    if (stack.subjects.empty()) {
      stack.sample_rate_hz = m.sample_rate_hz;
      stack.channel_labels = m.channel_labels;
    } else if (m.sample_rate_hz != stack.sample_rate_hz) {
      throw DataError("stimulus " + s.id + ": subjects differ in sample rate (" + path.string() + ")");
    }
    stack.subjects.push_back(std::move(m.data));
    stack.subject_ids.push_back(path.stem().string());
  }
  if (stack.channel_labels.empty())
    for (Eigen::Index c = 0; c < stack.n_channels(); ++c) stack.channel_labels.push_back("ch" + std::to_string(c + 1));
  try {
    stack.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError("stimulus " + s.id + ": " + e.what());
  }
  return stack;
}

// --- dataset assembly -------------------------------------------------------

struct Target {
  std::string label;
  std::string source;
  std::vector<double> values;  // all rows
};

// Window-aligned rows of every stimulus, concatenated in manifest order.
struct Assembly {
  std::vector<WindowPlan> plans;
  std::vector<int> video;
  std::vector<Target> targets;
  Matrix C;
  std::vector<std::string> covariate_names;
  json features;  // features.json, when loaded

  Eigen::Index rows() const { return static_cast<Eigen::Index>(video.size()); }
};

Matrix stack_rows(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.rows();
  Matrix out(rows, blocks.empty() ? 0 : blocks.front().cols());
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    if (b.cols() != out.cols()) throw DataError("feature tables differ in column count across stimuli");
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

Assembly assemble(const Context& ctx, bool need_features) {
  const auto& stimuli = ctx.manifest.stimuli;
  const auto& cfg = ctx.config;
  Assembly a;
  const bool all_eeg = std::all_of(stimuli.begin(), stimuli.end(), [](const auto& s) { return !s.eeg.empty(); });
  const bool any_eeg = std::any_of(stimuli.begin(), stimuli.end(), [](const auto& s) { return !s.eeg.empty(); });
  const bool all_annotation = std::all_of(stimuli.begin(), stimuli.end(), [](const auto& s) { return s.annotation.has_value(); });
  const bool any_cov = std::any_of(stimuli.begin(), stimuli.end(), [](const auto& s) { return s.covariates.has_value(); });
  const bool all_cov = std::all_of(stimuli.begin(), stimuli.end(), [](const auto& s) { return s.covariates.has_value(); });
  if (any_cov && !all_cov) throw DataError("covariates must be given for every stimulus or for none");

  json sync;
  std::map<std::string, json> sync_by_id;
  if (any_eeg) {
    sync = upstream(ctx, "synchrony.json", "synchrony");
    for (const auto& e : sync.at("stimuli")) sync_by_id[e.at("id").get<std::string>()] = e;
  }
  if (need_features) a.features = upstream(ctx, "features.json", "features");

  std::vector<std::vector<double>> annotation_rows;
  std::vector<std::vector<std::vector<double>>> sync_rows;  // per channel, per stimulus
  std::vector<std::string> sync_labels;
  std::vector<Matrix> cov_blocks;
  for (std::size_t i = 0; i < stimuli.size(); ++i) {
    const auto& s = stimuli[i];
    WindowPlan plan;
    std::optional<ResponseSeries> annotation;
    if (s.annotation) {
      try {
        annotation = load_response_csv(*s.annotation);
      } catch (const LoadError& e) {
        throw DataError("stimulus " + s.id + ": " + e.what());
      }
    }
    if (!s.eeg.empty()) {
      const auto it = sync_by_id.find(s.id);
      if (it == sync_by_id.end()) throw DataError("synchrony.json lacks stimulus " + s.id + "; rerun `aenc synchrony`");
      plan = window_plan(it->second.at("n_samples").get<std::size_t>(), it->second.at("rate_hz").get<double>(),
                         cfg.window_seconds, cfg.step_seconds);
    } else if (annotation) {
      plan = window_plan(annotation->values.size(), s.annotation_rate_hz, cfg.window_seconds, cfg.step_seconds);
    } else {
      throw DataError("stimulus " + s.id + " has neither EEG nor an annotation to model");
    }
    a.plans.push_back(plan);
    a.video.insert(a.video.end(), plan.n_windows, static_cast<int>(i));

    if (all_annotation) annotation_rows.push_back(align_to_windows(annotation->values, s.annotation_rate_hz, plan));
    if (all_eeg) {
      const auto table = load_table_csv(cfg.output_dir / ("synchrony/" + s.id + ".csv"));
      std::vector<std::string> labels(table.header.begin() + 1, table.header.end());
      if (sync_labels.empty()) {
        sync_labels = labels;
        sync_rows.resize(labels.size());
      } else if (labels != sync_labels) {
        throw DataError("stimulus " + s.id + ": EEG channel labels differ from the first stimulus");
      }
      if (static_cast<std::size_t>(table.rows.rows()) != plan.n_windows)
        throw DataError("synchrony/" + s.id + ".csv does not match its window plan; rerun `aenc synchrony`");
      for (std::size_t c = 0; c < labels.size(); ++c) {
        std::vector<double> col(plan.n_windows);
        for (std::size_t w = 0; w < plan.n_windows; ++w)
          col[w] = table.rows(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(c + 1));
        sync_rows[c].push_back(std::move(col));
      }
    }
    if (all_cov) {
      FeatureTable cov;
      try {
        cov = load_feature_table(*s.covariates, format_from_path(*s.covariates));
      } catch (const LoadError& e) {
        throw DataError("stimulus " + s.id + ": " + e.what());
      }
      if (a.covariate_names.empty()) a.covariate_names = cov.feature_names;
      cov_blocks.push_back(align_to_windows(cov, plan));
    }
  }
  auto concat = [](const std::vector<std::vector<double>>& parts) {
    std::vector<double> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
  };
  if (all_annotation) a.targets.push_back({"annotation", "annotation", concat(annotation_rows)});
  for (std::size_t c = 0; c < sync_labels.size(); ++c)
    a.targets.push_back({"sync:" + sync_labels[c], "synchrony", concat(sync_rows[c])});
  if (a.targets.empty()) throw DataError("no response target is available for every stimulus");
  a.C = all_cov ? stack_rows(cov_blocks) : Matrix(a.rows(), 0);
  return a;
}

Matrix element_features(const Context& ctx, const Assembly& a, ElementTag tag) {
  std::vector<Matrix> blocks;
  for (std::size_t i = 0; i < ctx.manifest.stimuli.size(); ++i) {
    const auto& id = ctx.manifest.stimuli[i].id;
    const auto rel = feature_file(id, tag);
    const fs::path path = ctx.config.output_dir / rel;
    if (!fs::exists(path))
      throw DataError("no " + to_string(tag) + " features for stimulus " + id + " (see features.json); rerun `aenc features`");
    blocks.push_back(align_to_windows(load_feature_table(path, MatrixFormat::fbin), a.plans[i]));
  }
  return stack_rows(blocks);
}

std::size_t layer_count(const Context& ctx) {
  const auto& st = ctx.manifest.stimuli;
  const std::size_t n = st.front().layers.size();
  for (const auto& s : st)
    if (s.layers.size() != n) throw DataError("stimulus " + s.id + " lists a different number of layers");
  if (n == 0) throw DataError("the manifest lists no layer feature tables");
  return n;
}

Matrix layer_features(const Context& ctx, const Assembly& a, std::size_t layer) {
  std::vector<Matrix> blocks;
  for (std::size_t i = 0; i < ctx.manifest.stimuli.size(); ++i) {
    const auto& path = ctx.manifest.stimuli[i].layers.at(layer);
    FeatureTable t;
    try {
      t = load_feature_table(path, format_from_path(path));
    } catch (const LoadError& e) {
      throw DataError("stimulus " + ctx.manifest.stimuli[i].id + ": " + e.what());
    }
    blocks.push_back(align_to_windows(t, a.plans[i]));
  }
  return stack_rows(blocks);
}

// Rows usable for a target: finite response, features and covariates.
std::vector<std::size_t> usable_rows(const Assembly& a, const Target& t, std::span<const Matrix* const> designs) {
  std::vector<std::size_t> rows;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    bool ok = std::isfinite(t.values[static_cast<std::size_t>(r)]) && a.C.row(r).allFinite();
    for (const Matrix* d : designs) ok = ok && d->row(r).allFinite();
    if (ok) rows.push_back(static_cast<std::size_t>(r));
  }
  return rows;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

AlignedDataset dataset_for(const Assembly& a, const Target& t, const Matrix& X, const std::vector<std::size_t>& rows,
                           std::vector<std::string> tags) {
  AlignedDataset ds;
  ds.X = take_rows(X, rows);
  ds.C = take_rows(a.C, rows);
  ds.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.y(static_cast<Eigen::Index>(i)) = t.values[rows[i]];
    ds.video_id.push_back(a.video[rows[i]]);
  }
  ds.feature_tags = std::move(tags);
  try {
    ds.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError("target " + t.label + ": " + e.what());
  }
  return ds;
}

// PCA to `dims` columns when the table is wider.
Matrix reduce(const Matrix& X, int dims, std::vector<std::string>& names) {
  if (X.cols() <= dims) {
    names.clear();
    for (Eigen::Index c = 0; c < X.cols(); ++c) names.push_back("f" + std::to_string(c + 1));
    return X;
  }
  const auto model = pca_fit(X, dims);
  names.clear();
  for (int c = 0; c < dims; ++c) names.push_back("pc" + std::to_string(c + 1));
  return pca_transform(model, X);
}

ElementTag feature_element(const Context& ctx) { return parse_element_tag(ctx.config.feature_element); }

json score_json(const EmotionScore& s) {
  return {{"per_fold", vec_json(s.per_fold)}, {"lambda_per_fold", vec_json(s.lambda_per_fold)}, {"mean", s.mean}};
}

json test_json(const TestResult& t) {
  return {{"statistic", t.statistic}, {"p_value", t.p_value}, {"n", t.n}, {"alternative", to_string(t.alternative)}};
}

}  // namespace

// ---------------------------------------------------------------------------

Context prepare(const CommonOptions& options) {
  Context ctx;
  ctx.config = load_config(options.config);
  apply_env_overrides(ctx.config);
  if (options.seed) ctx.config.seed = *options.seed;
  if (options.threads) ctx.config.threads = *options.threads;
  if (options.out) ctx.config.output_dir = *options.out;
  ctx.manifest = load_manifest(ctx.config.manifest);
  validate(ctx.config, ctx.manifest);
  return ctx;
}

void cmd_features(const Context& ctx) {
  json result = stamp(ctx, "features");
  json entries = json::array();
  json ratios = json::array();
  std::size_t failures = 0;
  for (const auto& s : ctx.manifest.stimuli) {
    std::map<ElementTag, AudioClip> clips;
    for (const auto& [tag, path] : {std::pair{ElementTag::original, s.audio}, std::pair{ElementTag::voice, s.voice},
                                    std::pair{ElementTag::soundtrack, s.soundtrack}}) {
      if (!path) continue;
      json entry = {{"id", s.id}, {"element", to_string(tag)}};
      try {
        const auto clip = load_wav(*path);
        const auto table = lld_table(clip, tag);
        const auto rel = feature_file(s.id, tag);
        fs::create_directories((ctx.config.output_dir / rel).parent_path());
        save_matrix(ctx.config.output_dir / rel, MatrixFormat::fbin, table);
        entry["status"] = "ok";
        entry["path"] = rel;
        entry["frames"] = table.frames();
        clips[tag] = clip;
      } catch (const std::exception& e) {
        // A bad entry is recorded; the remaining entries still run.
        entry["status"] = "failed";
        entry["error"] = e.what();
        ++failures;
        log("features: " + s.id + "/" + to_string(tag) + " failed: " + e.what());
      }
      entries.push_back(entry);
    }
    if (clips.count(ElementTag::voice) && clips.count(ElementTag::soundtrack)) {
      try {
        const auto [v, st] = rms_energy_ratio(clips[ElementTag::voice], clips[ElementTag::soundtrack]);
        ratios.push_back({{"id", s.id}, {"voice", v}, {"soundtrack", st}});
      } catch (const std::exception& e) {
        ratios.push_back({{"id", s.id}, {"error", e.what()}});
      }
    }
  }
  result["entries"] = entries;
  result["energy_ratios"] = ratios;
  result["failures"] = failures;
  write_json(ctx.config.output_dir / "features.json", result);
  log("features: " + std::to_string(entries.size() - failures) + " tables written, " + std::to_string(failures) + " failed");
}

void cmd_synchrony(const Context& ctx) {
  json result = stamp(ctx, "synchrony");
  json out = json::array();
  const auto& cfg = ctx.config;
  for (const auto& s : ctx.manifest.stimuli) {
    if (s.eeg.empty()) continue;
    const auto stack = load_stack(ctx, s);
    const auto plan = plan_for(stack, cfg.window_seconds, cfg.step_seconds, cfg.differentiate);
    const auto series = group_synchrony(stack, plan, cfg.differentiate, cfg.threads);
    Matrix table(series.values.cols(), series.values.rows() + 1);
    for (Eigen::Index w = 0; w < table.rows(); ++w) table(w, 0) = plan.start_seconds(static_cast<std::size_t>(w));
    table.rightCols(series.values.rows()) = series.values.transpose();
    std::vector<std::string> header{"start_s"};
    header.insert(header.end(), stack.channel_labels.begin(), stack.channel_labels.end());
    fs::create_directories(cfg.output_dir / "synchrony");
    save_table_csv(cfg.output_dir / ("synchrony/" + s.id + ".csv"), header, table);

    std::size_t missing = 0;
    double sum = 0;
    json channel_means = json::array();
    for (Eigen::Index c = 0; c < series.values.rows(); ++c) {
      double cs = 0;
      std::size_t cn = 0;
      for (Eigen::Index w = 0; w < series.values.cols(); ++w) {
        if (series.missing(c, w)) {
          ++missing;
        } else {
          cs += series.values(c, w);
          ++cn;
        }
      }
      sum += cs;
      channel_means.push_back(cn ? cs / static_cast<double>(cn) : std::nan(""));
    }
    const auto total = static_cast<std::size_t>(series.values.size());
    out.push_back({{"id", s.id},
                   {"subjects", stack.n_subjects()},
                   {"channels", stack.channel_labels},
                   {"rate_hz", stack.sample_rate_hz},
                   {"n_samples", plan.n_samples},
                   {"n_windows", plan.n_windows},
                   {"missing_windows", missing},
                   {"channel_mean", channel_means},
                   {"mean", total > missing ? sum / static_cast<double>(total - missing) : std::nan("")},
                   {"path", "synchrony/" + s.id + ".csv"}});
    log("synchrony: " + s.id + " " + std::to_string(plan.n_windows) + " windows");
  }
  if (out.empty()) throw DataError("no stimulus in the manifest lists EEG recordings");
  result["window_seconds"] = cfg.window_seconds;
  result["step_seconds"] = cfg.step_seconds;
  result["differentiate"] = cfg.differentiate;
  result["stimuli"] = out;
  write_json(cfg.output_dir / "synchrony.json", result);
}

void cmd_splithalf(const Context& ctx) {
  json result = stamp(ctx, "splithalf");
  json out = json::array();
  const auto& cfg = ctx.config;
  for (std::size_t i = 0; i < ctx.manifest.stimuli.size(); ++i) {
    const auto& s = ctx.manifest.stimuli[i];
    if (s.eeg.empty()) continue;
    const auto stack = load_stack(ctx, s);
    const auto plan = plan_for(stack, cfg.window_seconds, cfg.step_seconds, cfg.differentiate);
    SplitHalfResult r;
    try {
      r = split_half(stack, plan, cfg.splithalf_rounds, derive_seed(cfg.seed, i), cfg.differentiate, cfg.threads);
    } catch (const std::invalid_argument& e) {
      throw DataError("stimulus " + s.id + ": " + e.what());
    }
    out.push_back({{"id", s.id}, {"rounds", r.round_pcc.size()}, {"round_pcc", r.round_pcc}, {"mean_pcc", r.mean_pcc},
                   {"wilcoxon", test_json(r.test)}});
    log("splithalf: " + s.id + " mean PCC " + format_double(r.mean_pcc));
  }
  if (out.empty()) throw DataError("no stimulus in the manifest lists EEG recordings");
  result["stimuli"] = out;
  write_json(cfg.output_dir / "splithalf.json", result);
}

namespace {

struct TargetData {
  std::string label;
  std::string source;
  AlignedDataset ds;
  FoldPlan folds;
};

std::vector<TargetData> encode_datasets(const Context& ctx, const Assembly& a, const Matrix& X) {
  std::vector<TargetData> out;
  const Matrix* designs[] = {&X};
  for (const auto& t : a.targets) {
    const auto rows = usable_rows(a, t, designs);
    TargetData td{t.label, t.source, dataset_for(a, t, X, rows, lld_feature_names()), {}};
    try {
      td.folds = stratified_folds(td.ds.video_id, ctx.config.folds, ctx.config.seed);
    } catch (const std::invalid_argument& e) {
      throw DataError("target " + t.label + ": " + e.what());
    }
    out.push_back(std::move(td));
  }
  return out;
}

}  // namespace

void cmd_encode(const Context& ctx) {
  const auto a = assemble(ctx, true);
  const auto tag = feature_element(ctx);
  const Matrix X = element_features(ctx, a, tag);
  const auto data = encode_datasets(ctx, a, X);
  const auto grid = ctx.config.lambda_grid();
  std::vector<EmotionScore> scores(data.size());
  parallel_for(data.size(), ctx.config.threads, [&](std::size_t i) { scores[i] = emotion_score(data[i].ds, data[i].folds, grid); });

  json result = stamp(ctx, "encode");
  result["feature_element"] = to_string(tag);
  result["feature_tags"] = lld_feature_names();
  result["covariates"] = a.covariate_names;
  result["lambda_grid"] = grid;
  json targets = json::array();
  Matrix table(static_cast<Eigen::Index>(data.size()), ctx.config.folds + 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    json t = score_json(scores[i]);
    t["label"] = data[i].label;
    t["source"] = data[i].source;
    t["samples"] = data[i].ds.samples();
    t["fold_fingerprint"] = data[i].folds.fingerprint();
    targets.push_back(t);
    for (int f = 0; f < ctx.config.folds; ++f) table(static_cast<Eigen::Index>(i), f) = scores[i].per_fold[static_cast<std::size_t>(f)];
    table(static_cast<Eigen::Index>(i), ctx.config.folds) = scores[i].mean;
    log("encode: " + data[i].label + " score " + format_double(scores[i].mean));
  }
  result["targets"] = targets;
  std::vector<std::string> header;
  for (int f = 0; f < ctx.config.folds; ++f) header.push_back("fold" + std::to_string(f));
  header.push_back("mean");
  write_json(ctx.config.output_dir / "encode.json", result);
  save_table_csv(ctx.config.output_dir / "encode.csv", header, table);
}

void cmd_null(const Context& ctx) {
  const json enc = upstream(ctx, "encode.json", "encode");
  const auto a = assemble(ctx, true);
  const Matrix X = element_features(ctx, a, feature_element(ctx));
  const auto data = encode_datasets(ctx, a, X);
  const auto grid = ctx.config.lambda_grid();

  std::vector<std::vector<double>> real, nulls;
  std::vector<std::string> labels;
  json targets = json::array();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& t = enc.at("targets").at(i);
    if (t.at("label") != data[i].label) throw DataError("encode.json targets do not match the manifest; rerun `aenc encode`");
    real.push_back(t.at("per_fold").get<std::vector<double>>());
    NullOptions opt;
    opt.n_shuffles = ctx.config.shuffles;
    opt.seed = derive_seed(ctx.config.seed, 0x6e756c6c00ULL + i);
    opt.scheme = ctx.config.shuffle_scheme;
    opt.block_length = ctx.config.block_length;
    opt.threads = ctx.config.threads;
    const auto null = permutation_null(data[i].ds, data[i].folds, grid, opt);
    nulls.push_back(null.scores);
    labels.push_back(data[i].label);
    targets.push_back({{"label", data[i].label}, {"scores", null.scores}, {"seed", null.seed}});
    log("null: " + data[i].label + " " + std::to_string(null.scores.size()) + " shuffles");
  }
  const auto map = significance_map(real, nulls, labels, ctx.config.alpha_fdr);
  json sig = json::array();
  Matrix table(static_cast<Eigen::Index>(map.targets.size()), 6);
  for (std::size_t i = 0; i < map.targets.size(); ++i) {
    const auto& m = map.targets[i];
    sig.push_back({{"label", m.label}, {"real_mean", m.real_mean}, {"null_mean", m.null_mean}, {"null_q99", m.null_q99},
                   {"u", m.u}, {"p_raw", m.p_raw}, {"p_adjusted", m.p_adjusted}, {"significant", m.significant}});
    table.row(static_cast<Eigen::Index>(i)) << m.real_mean, m.null_mean, m.null_q99, m.p_raw, m.p_adjusted, m.significant ? 1.0 : 0.0;
  }
  json result = stamp(ctx, "null");
  result["scheme"] = to_string(ctx.config.shuffle_scheme);
  result["shuffles"] = ctx.config.shuffles;
  result["nulls"] = targets;
  result["significance"] = {{"test", "mann-whitney"}, {"alternative", "greater"}, {"correction", "bh-fdr"},
                            {"alpha", map.alpha}, {"targets", sig}};
  write_json(ctx.config.output_dir / "null.json", result);
  save_table_csv(ctx.config.output_dir / "significance.csv",
                 {"real_mean", "null_mean", "null_q99", "p_raw", "p_adjusted", "significant"}, table);
}

void cmd_stepwise(const Context& ctx) {
  const auto a = assemble(ctx, true);
  const auto& cfg = ctx.config;
  const Matrix acoustic_all = element_features(ctx, a, feature_element(ctx));
  const std::size_t layers = layer_count(ctx);
  const std::size_t pick = cfg.semantic_layer < 0 ? layers - 1 : static_cast<std::size_t>(cfg.semantic_layer);
  if (pick >= layers) throw DataError("semantic_layer " + std::to_string(cfg.semantic_layer) + " is out of range");
  const Matrix semantic_raw = layer_features(ctx, a, pick);
  const auto grid = cfg.lambda_grid();

  const Target& target = a.targets.front();
  const Matrix* designs[] = {&acoustic_all, &semantic_raw};
  const auto rows = usable_rows(a, target, designs);
  FeatureGroup acoustic{take_rows(acoustic_all, rows), lld_feature_names()};
  FeatureGroup semantic;
  semantic.values = reduce(take_rows(semantic_raw, rows), cfg.pca_dims, semantic.names);
  Vector y(static_cast<Eigen::Index>(rows.size()));
  std::vector<int> video;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = target.values[rows[i]];
    video.push_back(a.video[rows[i]]);
  }

  json result = stamp(ctx, "stepwise");
  result["target"] = target.label;
  result["group_a"] = "acoustic";
  result["group_b"] = "semantic";
  result["semantic_layer"] = pick;
  json orders;
  for (StepOrder order : {StepOrder::ab, StepOrder::ba}) {
    StepwiseOptions opt;
    opt.order = order;
    opt.iterations = cfg.stepwise_iterations;
    opt.seed = cfg.seed;
    opt.folds = cfg.folds;
    opt.threads = cfg.threads;
    StepwisePath path;
    try {
      path = stepwise(acoustic, semantic, y, video, grid, opt);
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("stepwise: ") + e.what());
    }
    const Vector mean_path = path.scores.colwise().mean();
    orders[to_string(order)] = {{"boundary", path.boundary},
                                {"mean_path", vec_json(std::span<const double>(mean_path.data(), static_cast<std::size_t>(mean_path.size())))},
                                {"order_log", path.order_log},
                                {"fold_seeds", path.fold_seeds}};
    std::vector<std::string> header;
    for (Eigen::Index s = 0; s < path.scores.cols(); ++s) header.push_back("step" + std::to_string(s + 1));
    save_table_csv(cfg.output_dir / ("stepwise_" + to_string(order) + ".csv"), header, path.scores);
    log("stepwise: order " + to_string(order) + " done");
  }
  result["orders"] = orders;
  write_json(cfg.output_dir / "stepwise.json", result);

  // Semantic minus acoustic per region on identical repeated folds.
  std::vector<std::string> labels;
  ConditionScores sem, aco;
  std::uint64_t fp_sem = 0, fp_aco = 0;
  for (const auto& t : a.targets) {
    if (t.source != "synchrony" && a.targets.size() > 1) continue;
    const auto r = usable_rows(a, t, designs);
    std::vector<std::string> names;
    const Matrix sem_x = reduce(take_rows(semantic_raw, r), cfg.pca_dims, names);
    std::vector<std::size_t> all(r.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    Assembly sub;
    sub.video.resize(r.size());
    Target tt{t.label, t.source, std::vector<double>(r.size())};
    for (std::size_t i = 0; i < r.size(); ++i) {
      sub.video[i] = a.video[r[i]];
      tt.values[i] = t.values[r[i]];
    }
    sub.C = take_rows(a.C, r);
    const auto ds_sem = dataset_for(sub, tt, sem_x, all, names);
    const auto ds_aco = dataset_for(sub, tt, take_rows(acoustic_all, r), all, lld_feature_names());
    const auto rs = repeated_cv_scores(ds_sem, cfg.folds, cfg.cv_repeats, cfg.seed, grid);
    const auto ra = repeated_cv_scores(ds_aco, cfg.folds, cfg.cv_repeats, cfg.seed, grid);
    sem.per_target.push_back(rs.scores);
    aco.per_target.push_back(ra.scores);
    fp_sem = CounterRng::mix(fp_sem ^ rs.fold_fingerprint);
    fp_aco = CounterRng::mix(fp_aco ^ ra.fold_fingerprint);
    labels.push_back(t.label);
  }
  sem.fold_fingerprint = fp_sem;
  aco.fold_fingerprint = fp_aco;
  const auto diff = score_difference_map(sem, aco, labels, cfg.alpha_fwer);
  json regions = json::array();
  Matrix table(static_cast<Eigen::Index>(diff.size()), 4);
  for (std::size_t i = 0; i < diff.size(); ++i) {
    const auto& d = diff[i];
    regions.push_back({{"label", d.label}, {"delta", d.delta}, {"u", d.u}, {"p_raw", d.p_raw},
                       {"p_adjusted", d.p_adjusted}, {"significant", d.significant}});
    table.row(static_cast<Eigen::Index>(i)) << d.delta, d.p_raw, d.p_adjusted, d.significant ? 1.0 : 0.0;
  }
  json dj = stamp(ctx, "stepwise");
  dj["condition_a"] = "semantic";
  dj["condition_b"] = "acoustic";
  dj["test"] = "mann-whitney";
  dj["alternative"] = "two-sided";
  dj["correction"] = "holm-fwer";
  dj["alpha"] = cfg.alpha_fwer;
  dj["repeats"] = cfg.cv_repeats;
  dj["regions"] = regions;
  write_json(cfg.output_dir / "difference.json", dj);
  save_table_csv(cfg.output_dir / "difference.csv", {"delta", "p_raw", "p_adjusted", "significant"}, table);
}

void cmd_layers(const Context& ctx) {
  const auto a = assemble(ctx, false);
  const auto& cfg = ctx.config;
  const std::size_t n_layers = layer_count(ctx);
  std::vector<Matrix> raw;
  for (std::size_t k = 0; k < n_layers; ++k) raw.push_back(layer_features(ctx, a, k));
  const auto grid = cfg.lambda_grid();
  std::vector<const Matrix*> designs;
  for (const auto& m : raw) designs.push_back(&m);

  std::vector<LayerwiseResult> results(a.targets.size());
  std::vector<std::size_t> samples(a.targets.size());
  parallel_for(a.targets.size(), cfg.threads, [&](std::size_t i) {
    const auto& t = a.targets[i];
    const auto rows = usable_rows(a, t, designs);
    std::vector<Matrix> layers;
    std::vector<std::string> names;
    for (const auto& m : raw) layers.push_back(reduce(take_rows(m, rows), cfg.pca_dims, names));
    const auto tmpl = dataset_for(a, t, layers.front(), rows, names);
    FoldPlan folds;
    try {
      folds = stratified_folds(tmpl.video_id, cfg.folds, cfg.seed);
    } catch (const std::invalid_argument& e) {
      throw DataError("target " + t.label + ": " + e.what());
    }
    results[i] = layerwise_scores(layers, tmpl, folds, grid, cfg.top_layers);
    samples[i] = rows.size();
  });

  json result = stamp(ctx, "layers");
  result["layers"] = n_layers;
  json targets = json::array();
  Matrix table(static_cast<Eigen::Index>(results.size()), static_cast<Eigen::Index>(n_layers));
  for (std::size_t i = 0; i < results.size(); ++i) {
    json scores = json::array();
    for (std::size_t k = 0; k < n_layers; ++k) {
      scores.push_back(score_json(results[i].scores[k]));
      table(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = results[i].scores[k].mean;
    }
    targets.push_back({{"label", a.targets[i].label}, {"samples", samples[i]}, {"scores", scores},
                       {"gains", results[i].gains}, {"top", results[i].top}});
  }
  result["targets"] = targets;
  write_json(cfg.output_dir / "layers.json", result);
  std::vector<std::string> header;
  for (std::size_t k = 0; k < n_layers; ++k) header.push_back("layer" + std::to_string(k));
  save_table_csv(cfg.output_dir / "layers.csv", header, table);
}

void cmd_elements(const Context& ctx) {
  const auto a = assemble(ctx, true);
  const Matrix voice = element_features(ctx, a, ElementTag::voice);
  const Matrix soundtrack = element_features(ctx, a, ElementTag::soundtrack);
  const Target& target = a.targets.front();
  const Matrix* designs[] = {&voice, &soundtrack};
  const auto rows = usable_rows(a, target, designs);

  std::vector<AudioSamples> audios(ctx.manifest.stimuli.size());
  for (std::size_t i = 0; i < audios.size(); ++i) audios[i].audio_id = ctx.manifest.stimuli[i].id;
  std::vector<std::vector<std::size_t>> per_audio(audios.size());
  for (auto r : rows) per_audio[static_cast<std::size_t>(a.video[r])].push_back(r);
  for (std::size_t i = 0; i < audios.size(); ++i) {
    audios[i].voice = take_rows(voice, per_audio[i]);
    audios[i].soundtrack = take_rows(soundtrack, per_audio[i]);
    audios[i].y.resize(static_cast<Eigen::Index>(per_audio[i].size()));
    for (std::size_t k = 0; k < per_audio[i].size(); ++k) audios[i].y(static_cast<Eigen::Index>(k)) = target.values[per_audio[i][k]];
  }
  std::vector<ElementEffect> effects;
  try {
    effects = loo_element_effect(audios, ctx.config.lambda_grid(), ctx.config.seed, ctx.config.threads);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("elements: ") + e.what());
  }
  std::map<std::string, json> ratios;
  for (const auto& r : a.features.at("energy_ratios")) ratios[r.at("id").get<std::string>()] = r;

  json out = json::array();
  for (const auto& e : effects) {
    json j = {{"id", e.audio_id}, {"voice_score", e.voice_score}, {"soundtrack_score", e.soundtrack_score},
              {"dominance", to_string(e.dominance)}};
    if (auto it = ratios.find(e.audio_id); it != ratios.end() && it->second.contains("voice"))
      j["energy_ratio"] = {{"voice", it->second.at("voice")}, {"soundtrack", it->second.at("soundtrack")}};
    out.push_back(j);
    log("elements: " + e.audio_id + " " + to_string(e.dominance));
  }
  json result = stamp(ctx, "elements");
  result["target"] = target.label;
  result["audios"] = out;
  write_json(ctx.config.output_dir / "elements.json", result);
}

// ---------------------------------------------------------------------------
// demo fixture

namespace {

// Piecewise-linear interpolation of per-second values at time t (seconds).
double per_second(const std::vector<double>& v, double t) {
  const double x = std::clamp(t, 0.0, static_cast<double>(v.size() - 1));
  const auto i = static_cast<std::size_t>(std::floor(x));
  if (i + 1 >= v.size()) return v.back();
  const double f = x - static_cast<double>(i);
  return v[i] * (1.0 - f) + v[i + 1] * f;
}

std::string clip_name(std::size_t i) {
  std::string n = std::to_string(i + 1);
  return "clip" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n;
}

}  // namespace

void cmd_synth(const SynthOptions& o) {
  if (o.clips < 3 || o.subjects < 4 || o.channels < 1 || o.layers < 1 || o.best_layer >= o.layers || o.layer_width < 1)
    throw ValidationError("synth: need >= 3 clips, >= 4 subjects, >= 1 channel and best_layer < layers");
  if (!(o.duration_s >= 20.0)) throw ValidationError("synth: duration must be at least 20 s");
  if (!(o.snr >= 0.0)) throw ValidationError("synth: snr must be >= 0");
  const fs::path root = o.out;
  for (const char* d : {"audio", "eeg", "annotation", "layers", "visual"}) fs::create_directories(root / d);
  const auto seconds = static_cast<std::size_t>(std::llround(o.duration_s));
  const double rate = o.audio_rate_hz;
  const auto n_audio = static_cast<std::size_t>(seconds * static_cast<std::size_t>(o.audio_rate_hz));

  // Audio stems. Voice: harmonic tone with a per-second loudness and pitch; soundtrack: a chord
  // over noise with its own loudness.
  std::vector<Matrix> llds;
  for (std::size_t c = 0; c < o.clips; ++c) {
    CounterRng rng(o.seed, 100 + c);
    std::vector<double> voice_env(seconds), music_env(seconds), pitch(seconds);
    for (std::size_t s = 0; s < seconds; ++s) {
      voice_env[s] = 0.05 + 0.45 * rng.uniform();
      music_env[s] = 0.05 + 0.3 * rng.uniform();
      pitch[s] = 120.0 + 140.0 * rng.uniform();
    }
    AudioClip voice, music, mix;
    voice.sample_rate_hz = music.sample_rate_hz = mix.sample_rate_hz = rate;
    double phase = 0;
    for (std::size_t t = 0; t < n_audio; ++t) {
      const double sec = static_cast<double>(t) / rate;
      phase += 2.0 * std::numbers::pi * per_second(pitch, sec) / rate;
      const double syllable = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * 4.0 * sec);
      double v = 0;
      for (int h = 1; h <= 4; ++h) v += std::sin(h * phase) / h;
      v *= 0.5 * per_second(voice_env, sec) * syllable;
      double m = 0;
      for (double f : {220.0, 277.18, 329.63}) m += std::sin(2.0 * std::numbers::pi * f * sec) / 3.0;
      m = per_second(music_env, sec) * (0.8 * m + 0.2 * (2.0 * rng.uniform() - 1.0));
      voice.samples.push_back(v);
      music.samples.push_back(m);
      mix.samples.push_back(std::clamp(v + m, -1.0, 1.0));
    }
    const std::string name = clip_name(c);
    save_wav(root / ("audio/" + name + ".wav"), mix);
    save_wav(root / ("audio/" + name + "_voice.wav"), voice);
    save_wav(root / ("audio/" + name + "_soundtrack.wav"), music);
    // Features as the pipeline will see them, i.e. from the quantized file.
    llds.push_back(lld_table(load_wav(root / ("audio/" + name + ".wav"))).values);
  }

  // Annotation: a fixed linear read-out of globally standardized descriptors, unit variance.
  Eigen::Index total = 0;
  for (const auto& m : llds) total += m.rows();
  Matrix all(total, kLldColumns);
  for (Eigen::Index r = 0; const auto& m : llds) {
    all.middleRows(r, m.rows()) = m;
    r += m.rows();
  }
  const Vector mu = all.colwise().mean();
  Vector sd = ((all.rowwise() - mu.transpose()).array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (!(sd(j) > 0)) sd(j) = 1.0;
  const Vector v = gen_normal_matrix(kLldColumns, 1, o.seed, 7).col(0);
  std::vector<std::vector<double>> annotations;
  double ss = 0;
  for (const auto& m : llds) {
    const Vector y = ((m.rowwise() - mu.transpose()).array().rowwise() / sd.transpose().array()).matrix() * v;
    annotations.emplace_back(y.data(), y.data() + y.size());
    ss += y.squaredNorm();
  }
  const double scale = 1.0 / std::sqrt(ss / static_cast<double>(total));
  CounterRng noise(o.seed, 8);
  for (auto& a : annotations)
    for (double& x : a) x = x * scale + (std::isinf(o.snr) ? 0.0 : noise.normal() / std::sqrt(std::max(o.snr, 1e-12)));

  json stimuli = json::array();
  const double eeg_rate = 200.0;
  const auto n_eeg = static_cast<Eigen::Index>(seconds * 200);
  for (std::size_t c = 0; c < o.clips; ++c) {
    const std::string name = clip_name(c);
    const auto& y = annotations[c];
    ResponseSeries ann;
    ann.values = y;
    save_response_csv(root / ("annotation/" + name + ".csv"), ann);

    // EEG: shared white latent per channel whose amplitude follows the annotation on the first
    // half of the channels, plus per-subject noise and 50 Hz line hum.
    double peak = 1e-12;
    for (double x : y) peak = std::max(peak, std::abs(x));
    Matrix latent = gen_normal_matrix(static_cast<Eigen::Index>(o.channels), n_eeg, o.seed, 200 + c);
    for (Eigen::Index ch = 0; ch < latent.rows(); ++ch) {
      const double depth = static_cast<std::size_t>(ch) < (o.channels + 1) / 2 ? 0.9 : 0.0;
      for (Eigen::Index t = 0; t < n_eeg; ++t)
        latent(ch, t) *= std::sqrt(1.0 + depth * per_second(y, static_cast<double>(t) / eeg_rate) / peak);
    }
    json eeg = json::array();
    for (std::size_t s = 0; s < o.subjects; ++s) {
      SignalMatrix m;
      m.sample_rate_hz = eeg_rate;
      m.data = latent + gen_normal_matrix(latent.rows(), n_eeg, o.seed, 10000 + c * 1000 + s);
      CounterRng ph(o.seed, 20000 + c * 1000 + s);
      const double hum_phase = 2.0 * std::numbers::pi * ph.uniform();
      for (Eigen::Index t = 0; t < n_eeg; ++t)
        m.data.col(t).array() += 0.5 * std::sin(2.0 * std::numbers::pi * 50.0 * static_cast<double>(t) / eeg_rate + hum_phase);
      for (std::size_t ch = 0; ch < o.channels; ++ch) m.channel_labels.push_back("E" + std::to_string(ch + 1));
      std::string sub = std::to_string(s + 1);
      sub = "sub" + std::string(sub.size() < 2 ? 2 - sub.size() : 0, '0') + sub;
      const std::string rel = "eeg/" + name + "_" + sub + ".fbin";
      save_matrix(root / rel, MatrixFormat::fbin, m);
      eeg.push_back(rel);
    }

    // Layer tables: the annotation projected onto a random direction with a strength that peaks at
    // best_layer, plus unit noise.
    json layers = json::array();
    for (std::size_t k = 0; k < o.layers; ++k) {
      const double strength = 1.5 / (1.0 + std::abs(static_cast<double>(k) - static_cast<double>(o.best_layer)));
      const Vector dir = gen_normal_matrix(static_cast<Eigen::Index>(o.layer_width), 1, o.seed, 300 + k).col(0).normalized();
      FeatureTable t;
      t.values = gen_normal_matrix(static_cast<Eigen::Index>(seconds), static_cast<Eigen::Index>(o.layer_width), o.seed,
                                   400 + c * 100 + k);
      for (std::size_t s = 0; s < seconds; ++s)
        t.values.row(static_cast<Eigen::Index>(s)) += strength * y[s] * std::sqrt(static_cast<double>(o.layer_width)) * dir.transpose();
      t.frame_rate_hz = 1.0;
      t.level_tag = "layer" + std::to_string(k);
      for (std::size_t j = 0; j < o.layer_width; ++j) t.feature_names.push_back("u" + std::to_string(j + 1));
      const std::string rel = "layers/" + name + "_layer" + std::to_string(k) + ".fbin";
      save_matrix(root / rel, MatrixFormat::fbin, t);
      layers.push_back(rel);
    }

    // Visual covariates: one column partly tracks the annotation.
    FeatureTable vis;
    vis.values = gen_normal_matrix(static_cast<Eigen::Index>(seconds), 3, o.seed, 500 + c);
    for (std::size_t s = 0; s < seconds; ++s) vis.values(static_cast<Eigen::Index>(s), 0) += 0.5 * y[s];
    vis.frame_rate_hz = 1.0;
    vis.element_tag = ElementTag::visual;
    vis.level_tag = "visual";
    vis.feature_names = {"brightness", "motion", "saturation"};
    save_matrix(root / ("visual/" + name + ".fbin"), MatrixFormat::fbin, vis);

    stimuli.push_back({{"id", name},
                       {"audio", "audio/" + name + ".wav"},
                       {"voice", "audio/" + name + "_voice.wav"},
                       {"soundtrack", "audio/" + name + "_soundtrack.wav"},
                       {"eeg", eeg},
                       {"annotation", "annotation/" + name + ".csv"},
                       {"annotation_rate_hz", 1.0},
                       {"layers", layers},
                       {"covariates", "visual/" + name + ".fbin"}});
  }
  write_json(root / "manifest.json", {{"stimuli", stimuli}});
  json config = {{"manifest", "manifest.json"}, {"seed", o.seed}, {"output_dir", "results"}};
  write_json(root / "config.json", config);
  log("synth: fixture with " + std::to_string(o.clips) + " clips written to " + root.string());
}

}  // namespace aenc::cli
