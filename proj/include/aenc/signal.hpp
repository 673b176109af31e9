#pragma once

#include "aenc/types.hpp"

#include <span>
#include <vector>

namespace aenc {

/// One biquad: b0 b1 b2 / 1 a1 a2.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

using Sos = std::vector<Biquad>;

// Butterworth designs via analog prototype, bilinear transform and pole pairing.
// Every section is normalized to unit gain at its passband reference (DC or Nyquist).
Sos butter_lowpass(int order, double cutoff_hz, double rate_hz);
Sos butter_highpass(int order, double cutoff_hz, double rate_hz);
Sos butter_bandstop(int order, double low_hz, double high_hz, double rate_hz);

/// Causal single pass.
std::vector<double> sos_filter(const Sos& sos, std::span<const double> x);

/// Forward-backward (zero-phase) filtering with odd-reflection padding and steady-state initial
/// conditions. The padding length covers the slowest pole's decay.
std::vector<double> sos_filtfilt(const Sos& sos, std::span<const double> x);

/// Order of the Butterworth low-pass used by band_and_resample.
inline constexpr int kBandLimitOrder = 10;
/// Order of the notch (band-stop prototype order).
inline constexpr int kNotchOrder = 4;

/// Zero-phase band-stop between low_hz and high_hz on every channel.
SignalMatrix notch_filter(const SignalMatrix& sig, double low_hz = 48.0, double high_hz = 52.0);

/// Band-limit to [low_hz, high_hz] (low_hz = 0 means low-pass only) and resample to target_rate.
/// Output length is round(samples * target / original).
SignalMatrix band_and_resample(const SignalMatrix& sig, double low_hz = 0.0, double high_hz = 75.0,
                               double target_rate = 200.0);

/// Polyphase rational resampling with a Kaiser-windowed sinc anti-aliasing filter.
std::vector<double> resample_poly(std::span<const double> x, int up, int down);

std::vector<double> first_difference(std::span<const double> series);
SignalMatrix first_difference(const SignalMatrix& sig);

}  // namespace aenc
