#include "aenc/cli/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace aenc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string(what) + " not found: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(what) + " " + path.string() + " is not valid JSON: " + e.what());
  }
}

template <typename T>
void take(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::vector<double> RunConfig::lambda_grid() const { return log_grid(lambda.min, lambda.max, lambda.count); }

std::string RunConfig::fingerprint() const {
  json j;
  j["manifest"] = fs::absolute(manifest).lexically_normal().string();
  j["window_seconds"] = window_seconds;
  j["step_seconds"] = step_seconds;
  j["lambda"] = {lambda.min, lambda.max, lambda.count};
  j["folds"] = folds;
  j["seed"] = seed;
  j["shuffles"] = shuffles;
  j["shuffle_scheme"] = to_string(shuffle_scheme);
  j["block_length"] = block_length;
  j["splithalf_rounds"] = splithalf_rounds;
  j["stepwise_iterations"] = stepwise_iterations;
  j["cv_repeats"] = cv_repeats;
  j["alpha"] = {alpha_fdr, alpha_fwer};
  j["differentiate"] = differentiate;
  j["feature_element"] = feature_element;
  j["pca_dims"] = pca_dims;
  j["semantic_layer"] = semantic_layer;
  j["top_layers"] = top_layers;
  j["preprocess"] = {preprocess.enabled, preprocess.notch_low_hz, preprocess.notch_high_hz, preprocess.band_low_hz,
                     preprocess.band_high_hz, preprocess.target_rate_hz};
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

RunConfig load_config(const fs::path& path) {
  const json j = read_json(path, "config");
  const fs::path base = path.parent_path();
  const std::string where = "config " + path.string();
  RunConfig c;
  std::string manifest, out, scheme = "uniform";
  take(j, "manifest", manifest, where);
  if (manifest.empty()) throw ValidationError(where + ": 'manifest' is required");
  c.manifest = resolve(base, manifest);
  take(j, "window_seconds", c.window_seconds, where);
  take(j, "step_seconds", c.step_seconds, where);
  if (j.contains("lambda_grid")) {
    const auto& g = j.at("lambda_grid");
    take(g, "min", c.lambda.min, where);
    take(g, "max", c.lambda.max, where);
    take(g, "count", c.lambda.count, where);
  }
  take(j, "folds", c.folds, where);
  take(j, "seed", c.seed, where);
  take(j, "shuffles", c.shuffles, where);
  take(j, "shuffle_scheme", scheme, where);
  try {
    c.shuffle_scheme = parse_shuffle_scheme(scheme);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(where + ": " + e.what());
  }
  take(j, "block_length", c.block_length, where);
  take(j, "splithalf_rounds", c.splithalf_rounds, where);
  take(j, "stepwise_iterations", c.stepwise_iterations, where);
  take(j, "cv_repeats", c.cv_repeats, where);
  take(j, "alpha_fdr", c.alpha_fdr, where);
  take(j, "alpha_fwer", c.alpha_fwer, where);
  take(j, "differentiate", c.differentiate, where);
  take(j, "feature_element", c.feature_element, where);
  take(j, "pca_dims", c.pca_dims, where);
  take(j, "semantic_layer", c.semantic_layer, where);
  take(j, "top_layers", c.top_layers, where);
  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    take(p, "enabled", c.preprocess.enabled, where);
    take(p, "notch_low_hz", c.preprocess.notch_low_hz, where);
    take(p, "notch_high_hz", c.preprocess.notch_high_hz, where);
    take(p, "band_low_hz", c.preprocess.band_low_hz, where);
    take(p, "band_high_hz", c.preprocess.band_high_hz, where);
    take(p, "target_rate_hz", c.preprocess.target_rate_hz, where);
  }
  take(j, "output_dir", out, where);
  c.output_dir = out.empty() ? base / "results" : resolve(base, out);
  take(j, "threads", c.threads, where);
  return c;
}

Manifest load_manifest(const fs::path& path) {
  const json j = read_json(path, "manifest");
  const fs::path base = path.parent_path();
  Manifest m;
  m.path = path;
  if (!j.contains("stimuli") || !j.at("stimuli").is_array())
    throw ValidationError("manifest " + path.string() + ": 'stimuli' array is required");
  std::size_t index = 0;
  for (const auto& s : j.at("stimuli")) {
    const std::string where = "manifest stimuli[" + std::to_string(index++) + "]";
    StimulusEntry e;
    take(s, "id", e.id, where);
    if (e.id.empty()) throw ValidationError(where + ": 'id' is required");
    auto optional_path = [&](const char* key, std::optional<fs::path>& out) {
      std::string p;
      take(s, key, p, where);
      if (!p.empty()) out = resolve(base, p);
    };
    auto path_list = [&](const char* key, std::vector<fs::path>& out) {
      std::vector<std::string> ps;
      take(s, key, ps, where);
      for (const auto& p : ps) out.push_back(resolve(base, p));
    };
    optional_path("audio", e.audio);
    optional_path("voice", e.voice);
    optional_path("soundtrack", e.soundtrack);
    optional_path("annotation", e.annotation);
    optional_path("covariates", e.covariates);
    path_list("eeg", e.eeg);
    path_list("layers", e.layers);
    take(s, "annotation_rate_hz", e.annotation_rate_hz, where);
    m.stimuli.push_back(std::move(e));
  }
  if (m.stimuli.empty()) throw ValidationError("manifest " + path.string() + " lists no stimuli");
  return m;
}

void validate(const RunConfig& c, const Manifest& m) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ValidationError(std::string("config: ") + name + " must be positive");
  };
  positive(c.window_seconds, "window_seconds");
  positive(c.step_seconds, "step_seconds");
  positive(c.lambda.min, "lambda_grid.min");
  if (!(c.lambda.max >= c.lambda.min) || c.lambda.count < 1)
    throw ValidationError("config: lambda_grid needs max >= min and count >= 1");
  if (c.folds < 2) throw ValidationError("config: folds must be at least 2");
  if (c.shuffles == 0 || c.splithalf_rounds == 0 || c.stepwise_iterations == 0 || c.cv_repeats == 0 || c.block_length == 0)
    throw ValidationError("config: shuffles, rounds, iterations, repeats and block_length must be positive");
  if (!(c.alpha_fdr > 0.0 && c.alpha_fdr < 1.0) || !(c.alpha_fwer > 0.0 && c.alpha_fwer < 1.0))
    throw ValidationError("config: alpha levels must lie in (0, 1)");
  if (c.pca_dims < 1) throw ValidationError("config: pca_dims must be positive");
  try {
    const auto tag = parse_element_tag(c.feature_element);
    if (tag == ElementTag::visual) throw std::invalid_argument("visual");
  } catch (const std::invalid_argument&) {
    throw ValidationError("config: feature_element must be original, voice or soundtrack");
  }
  if (c.preprocess.enabled) {
    positive(c.preprocess.target_rate_hz, "preprocess.target_rate_hz");
    if (!(c.preprocess.notch_low_hz > 0 && c.preprocess.notch_low_hz < c.preprocess.notch_high_hz))
      throw ValidationError("config: preprocess notch band must satisfy 0 < low < high");
    if (!(c.preprocess.band_low_hz >= 0 && c.preprocess.band_low_hz < c.preprocess.band_high_hz))
      throw ValidationError("config: preprocess band must satisfy 0 <= low < high");
  }

  for (std::size_t i = 0; i < m.stimuli.size(); ++i) {
    const auto& s = m.stimuli[i];
    const std::string where = "manifest stimuli[" + std::to_string(i) + "] (" + s.id + ")";
    auto exists = [&](const fs::path& p, const std::string& field) {
      if (!fs::is_regular_file(p)) throw ValidationError(where + "." + field + ": file not found: " + p.string());
    };
    if (s.audio) exists(*s.audio, "audio");
    if (s.voice) exists(*s.voice, "voice");
    if (s.soundtrack) exists(*s.soundtrack, "soundtrack");
    if (s.annotation) exists(*s.annotation, "annotation");
    if (s.covariates) exists(*s.covariates, "covariates");
    for (std::size_t k = 0; k < s.eeg.size(); ++k) exists(s.eeg[k], "eeg[" + std::to_string(k) + "]");
    for (std::size_t k = 0; k < s.layers.size(); ++k) exists(s.layers[k], "layers[" + std::to_string(k) + "]");
    if (!(s.annotation_rate_hz > 0.0)) throw ValidationError(where + ": annotation_rate_hz must be positive");
    if (!s.eeg.empty() && s.eeg.size() < 2) throw ValidationError(where + ": eeg needs at least 2 subjects");
    for (std::size_t k = 0; k < i; ++k)
      if (m.stimuli[k].id == s.id) throw ValidationError(where + ": duplicate id");
  }
}

void apply_env_overrides(RunConfig& config) {
  if (const char* out = std::getenv("AENC_OUT"); out && *out) config.output_dir = out;
  if (const char* threads = std::getenv("AENC_THREADS"); threads && *threads) {
    char* end = nullptr;
    const long n = std::strtol(threads, &end, 10);
    if (*end != '\0' || n < 0) throw ValidationError("AENC_THREADS must be a non-negative integer");
    config.threads = static_cast<unsigned>(n);
  }
}

std::string config_schema() {
  return R"schema({
  "manifest": "path to the stimulus manifest (required)",
  "window_seconds": 10, "step_seconds": 1,
  "lambda_grid": {"min": 10, "max": 1e8, "count": 20},
  "folds": 5, "seed": 0,
  "shuffles": 200, "shuffle_scheme": "uniform | circular | block", "block_length": 10,
  "splithalf_rounds": 100, "stepwise_iterations": 100, "cv_repeats": 10,
  "alpha_fdr": 0.05, "alpha_fwer": 0.05,
  "differentiate": true,
  "feature_element": "original | voice | soundtrack",
  "pca_dims": 12, "semantic_layer": -1, "top_layers": 3,
  "preprocess": {"enabled": true, "notch_low_hz": 48, "notch_high_hz": 52,
                 "band_low_hz": 0, "band_high_hz": 75, "target_rate_hz": 200},
  "output_dir": "results", "threads": 0
}
manifest: {"stimuli": [{"id": "clip01", "audio": "a.wav", "voice": "v.wav", "soundtrack": "s.wav",
  "eeg": ["sub01.fbin", ...], "annotation": "arousal.csv", "annotation_rate_hz": 1,
  "layers": ["layer0.fbin", ...], "covariates": "visual.fbin"}]}
)schema";
}

}  // namespace aenc::cli
