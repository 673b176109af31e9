#pragma once

#include "aenc/types.hpp"

#include <span>
#include <utility>
#include <vector>

namespace aenc {

// Low-level descriptor definitions used throughout the pipeline:
//   STE  mean of squared samples
//   ZCR  strict sign changes between consecutive samples / (N - 1); zeros keep the previous sign
//   SPL  20 log10(max(rms, 1e-6)) relative to full scale 1.0
//   LES  ln(sum_k |DFT(x)[k]|^2 + 1e-12)

inline constexpr double kLesEpsilon = 1e-12;
inline constexpr double kSplFloor = 1e-6;
inline constexpr int kLldColumns = 12;

/// Non-overlapping frames of round(frame_seconds * rate) samples; the trailing partial frame is dropped.
std::vector<std::span<const double>> frame_audio(const AudioClip& clip, double frame_seconds = 1.0);

double short_time_energy(std::span<const double> frame);
double zero_crossing_rate(std::span<const double> frame);
double sound_pressure_level(std::span<const double> frame);
double log_energy_spectrum(std::span<const double> frame);

/// Columns: les ste zcr spl, then d_* and dd_* of each. Difference rows that do not exist yet
/// (row 0 for d_*, rows 0-1 for dd_*) are 0. Frame rate 1 Hz, level tag "lld".
FeatureTable lld_table(const AudioClip& clip, ElementTag element = ElementTag::original);

std::vector<std::string> lld_feature_names();

/// Whole-clip RMS of each stem, normalized to sum to one; (0.5, 0.5) when both are silent.
std::pair<double, double> rms_energy_ratio(const AudioClip& voice, const AudioClip& soundtrack);

}  // namespace aenc
