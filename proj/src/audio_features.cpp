#include "aenc/audio_features.hpp"

#include <cmath>
#include <stdexcept>

namespace aenc {

namespace {

double sum_squares(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double rms(std::span<const double> x) { return std::sqrt(sum_squares(x) / static_cast<double>(x.size())); }

void require_nonempty(std::span<const double> frame, const char* what) {
  if (frame.empty()) throw std::invalid_argument(std::string(what) + ": empty frame");
}

}  // namespace

std::vector<std::span<const double>> frame_audio(const AudioClip& clip, double frame_seconds) {
  if (!(frame_seconds > 0.0)) throw std::invalid_argument("frame_audio: frame length must be positive");
  const auto frame_len = static_cast<std::size_t>(std::llround(frame_seconds * clip.sample_rate_hz));
  if (frame_len == 0 || clip.samples.size() < frame_len)
    throw std::invalid_argument("frame_audio: clip is shorter than one frame");
  std::vector<std::span<const double>> frames;
  const std::span<const double> all(clip.samples);
  for (std::size_t start = 0; start + frame_len <= all.size(); start += frame_len)
    frames.push_back(all.subspan(start, frame_len));
  return frames;
}

double short_time_energy(std::span<const double> frame) {
  require_nonempty(frame, "short_time_energy");
  return sum_squares(frame) / static_cast<double>(frame.size());
}

double zero_crossing_rate(std::span<const double> frame) {
  if (frame.size() < 2) throw std::invalid_argument("zero_crossing_rate: need at least 2 samples");
  int previous = 0;
  std::size_t crossings = 0;
  for (double v : frame) {
    const int sign = v > 0.0 ? 1 : (v < 0.0 ? -1 : previous);
    if (previous != 0 && sign != 0 && sign != previous) ++crossings;
    if (sign != 0) previous = sign;
  }
  return static_cast<double>(crossings) / static_cast<double>(frame.size() - 1);
}

double sound_pressure_level(std::span<const double> frame) {
  require_nonempty(frame, "sound_pressure_level");
  return 20.0 * std::log10(std::max(rms(frame), kSplFloor));
}

double log_energy_spectrum(std::span<const double> frame) {
  require_nonempty(frame, "log_energy_spectrum");
  // Parseval: sum_k |X[k]|^2 = N * sum_n x[n]^2 for the unnormalized DFT.
  const double spectral_energy = static_cast<double>(frame.size()) * sum_squares(frame);
  return std::log(spectral_energy + kLesEpsilon);
}

std::vector<std::string> lld_feature_names() {
  const char* base[] = {"les", "ste", "zcr", "spl"};
  std::vector<std::string> names;
  for (const char* prefix : {"", "d_", "dd_"})
    for (const char* b : base) names.push_back(std::string(prefix) + b);
  return names;
}

FeatureTable lld_table(const AudioClip& clip, ElementTag element) {
  const auto frames = frame_audio(clip, 1.0);
  if (frames.size() < 3) throw std::invalid_argument("lld_table: need at least 3 one-second frames");
  const auto n = static_cast<Eigen::Index>(frames.size());
  FeatureTable table;
  table.values = Matrix::Zero(n, kLldColumns);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto f = frames[static_cast<std::size_t>(t)];
    table.values(t, 0) = log_energy_spectrum(f);
    table.values(t, 1) = short_time_energy(f);
    table.values(t, 2) = zero_crossing_rate(f);
    table.values(t, 3) = sound_pressure_level(f);
  }
  for (Eigen::Index c = 0; c < 4; ++c) {
    for (Eigen::Index t = 1; t < n; ++t) table.values(t, 4 + c) = table.values(t, c) - table.values(t - 1, c);
    for (Eigen::Index t = 2; t < n; ++t)
      table.values(t, 8 + c) = table.values(t, c) - 2.0 * table.values(t - 1, c) + table.values(t - 2, c);
  }
  table.frame_rate_hz = 1.0;
  table.feature_names = lld_feature_names();
  table.element_tag = element;
  table.level_tag = "lld";
  return table;
}

std::pair<double, double> rms_energy_ratio(const AudioClip& voice, const AudioClip& soundtrack) {
  voice.validate();
  soundtrack.validate();
  if (std::abs(voice.duration_seconds() - soundtrack.duration_seconds()) > 1.0)
    throw std::invalid_argument("rms_energy_ratio: stem durations differ by more than one frame");
  const double rv = rms(voice.samples);
  const double rs = rms(soundtrack.samples);
  if (rv + rs <= 0.0) return {0.5, 0.5};
  return {rv / (rv + rs), rs / (rv + rs)};
}

}  // namespace aenc
