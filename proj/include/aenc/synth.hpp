#pragma once

#include "aenc/encode.hpp"
#include "aenc/synchrony.hpp"

#include <cstdint>
#include <limits>

namespace aenc {

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

/// Parameters of the synthetic generators. `snr` is signal variance over noise variance;
/// kNoiseless switches the noise off.
struct SynthSpec {
  std::size_t n_samples = 1000;
  std::size_t n_features = 12;
  double snr = 1.0;
  std::size_t n_videos = 5;
  std::size_t n_subjects = 20;
  std::size_t n_channels = 4;
  double duration_s = 210.0;
  double sample_rate_hz = 200.0;
  // Amplitude modulation of the shared latent: a(t)^2 = 1 + depth * sin(2 pi t / period + phase_c),
  // so E[a^2] = 1 over whole periods. 0 keeps the latent stationary.
  double modulation_depth = 0.0;
  double modulation_period_s = 40.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LinearDataset {
  AlignedDataset data;
  Vector true_weights;  // unit norm
};

/// X standard normal, y = X v* sqrt(snr) + e with e standard normal. Samples are split into
/// n_videos contiguous videos.
LinearDataset gen_linear_dataset(const SynthSpec& spec);

/// Subject s, channel c: x = sqrt(snr) a_c(t) z_c(t) + e_{s,c}(t); z_c is white, shared by all
/// subjects, independent across channels. Noiseless stacks are z_c itself for every subject.
SubjectStack gen_subject_stack(const SynthSpec& spec);

/// Standard normal matrix from a seed, row-major draw order.
Matrix gen_normal_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace aenc
