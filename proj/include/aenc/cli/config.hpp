#pragma once

#include "aenc/analysis.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aenc::cli {

/// Bad configuration or manifest; maps to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LambdaGridSpec {
  double min = 10.0;
  double max = 1e8;
  int count = 20;
};

struct PreprocessSpec {
  bool enabled = true;
  double notch_low_hz = 48.0;
  double notch_high_hz = 52.0;
  double band_low_hz = 0.0;
  double band_high_hz = 75.0;
  double target_rate_hz = 200.0;
};

struct RunConfig {
  std::filesystem::path manifest;
  double window_seconds = 10.0;
  double step_seconds = 1.0;
  LambdaGridSpec lambda;
  int folds = 5;
  std::uint64_t seed = 0;
  std::size_t shuffles = 200;
  ShuffleScheme shuffle_scheme = ShuffleScheme::uniform;
  std::size_t block_length = 10;
  std::size_t splithalf_rounds = 100;
  std::size_t stepwise_iterations = 100;
  std::size_t cv_repeats = 10;
  double alpha_fdr = 0.05;
  double alpha_fwer = 0.05;
  bool differentiate = true;
  std::string feature_element = "original";
  int pca_dims = 12;
  int semantic_layer = -1;  // index into each stimulus' layer list; -1 = last
  std::size_t top_layers = 3;
  PreprocessSpec preprocess;
  std::filesystem::path output_dir = "results";
  unsigned threads = 0;

  std::vector<double> lambda_grid() const;
  /// Hash of every field that influences results (not output_dir, not threads).
  std::string fingerprint() const;
};

struct StimulusEntry {
  std::string id;
  std::optional<std::filesystem::path> audio;
  std::optional<std::filesystem::path> voice;
  std::optional<std::filesystem::path> soundtrack;
  std::vector<std::filesystem::path> eeg;
  std::optional<std::filesystem::path> annotation;
  double annotation_rate_hz = 1.0;
  std::vector<std::filesystem::path> layers;
  std::optional<std::filesystem::path> covariates;
};

struct Manifest {
  std::filesystem::path path;
  std::vector<StimulusEntry> stimuli;
};

/// Parses the JSON run configuration; relative paths resolve against the config file's folder.
RunConfig load_config(const std::filesystem::path& path);

/// Parses the manifest; relative paths resolve against the manifest's folder.
Manifest load_manifest(const std::filesystem::path& path);

/// Range checks plus existence of every referenced file. Throws ValidationError naming the entry.
void validate(const RunConfig& config, const Manifest& manifest);

/// AENC_OUT replaces the output directory and AENC_THREADS the worker count.
void apply_env_overrides(RunConfig& config);

std::string config_schema();

}  // namespace aenc::cli
