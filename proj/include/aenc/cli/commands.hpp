#pragma once

#include "aenc/cli/config.hpp"

#include <filesystem>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace aenc::cli {

/// Unusable data or missing/stale upstream results; maps to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flags shared by every pipeline command. Flags beat environment variables, which beat the config.
struct CommonOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::filesystem::path> out;
};

struct Context {
  RunConfig config;
  Manifest manifest;
};

/// Loads config and manifest, applies overrides, validates. Throws ValidationError.
Context prepare(const CommonOptions& options);

void cmd_features(const Context& ctx);
void cmd_synchrony(const Context& ctx);
void cmd_splithalf(const Context& ctx);
void cmd_encode(const Context& ctx);
void cmd_null(const Context& ctx);
void cmd_stepwise(const Context& ctx);
void cmd_layers(const Context& ctx);
void cmd_elements(const Context& ctx);
/// Renders SVG plots and Markdown from the JSON results in `results_dir` only.
void cmd_report(const std::filesystem::path& results_dir);

struct SynthOptions {
  std::filesystem::path out;
  std::uint64_t seed = 0;
  std::size_t clips = 3;
  double duration_s = 40.0;
  std::size_t subjects = 20;
  std::size_t channels = 8;
  double snr = std::numeric_limits<double>::infinity();  // annotation signal-to-noise
  int audio_rate_hz = 8000;
  std::size_t layers = 4;
  std::size_t layer_width = 32;
  std::size_t best_layer = 2;
};

/// Writes a self-contained demo fixture (audio stems, EEG, annotations, layer and visual tables)
/// plus manifest.json and config.json under options.out.
void cmd_synth(const SynthOptions& options);

}  // namespace aenc::cli
