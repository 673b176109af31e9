#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace aenc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Raised for malformed or unreadable input files.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when numeric input is degenerate (constant series, all-zero differences, ...).
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Multi-channel signal, channels x samples.
struct SignalMatrix {
  Matrix data;
  double sample_rate_hz = 0.0;
  std::vector<std::string> channel_labels;

  Eigen::Index channels() const { return data.rows(); }
  Eigen::Index samples() const { return data.cols(); }
  void validate() const;
};

/// Mono audio in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  double sample_rate_hz = 16000.0;

  double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
  void validate() const;
};

enum class ElementTag { original, voice, soundtrack, visual };

std::string to_string(ElementTag tag);
ElementTag parse_element_tag(const std::string& text);

/// Per-frame features, frames x features.
struct FeatureTable {
  Matrix values;
  double frame_rate_hz = 1.0;
  std::vector<std::string> feature_names;
  ElementTag element_tag = ElementTag::original;
  std::string level_tag;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index features() const { return values.cols(); }
  void validate() const;
};

enum class ResponseSource { annotation, synchrony };

// Missing samples in a ResponseSeries are stored as quiet NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// One per-second (or per-window) response sequence.
struct ResponseSeries {
  std::vector<double> values;
  ResponseSource source = ResponseSource::annotation;
  std::string channel_or_region_id;

  void validate() const;
};

}  // namespace aenc
