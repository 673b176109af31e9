#include "aenc/synth.hpp"

#include "aenc/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace aenc {

void SynthSpec::validate() const {
  if (!(snr >= 0.0)) throw std::invalid_argument("SynthSpec: snr must be >= 0");
  if (n_samples == 0 || n_features == 0 || n_videos == 0 || n_subjects == 0 || n_channels == 0)
    throw std::invalid_argument("SynthSpec: counts must be positive");
  if (!(duration_s > 0.0) || !(sample_rate_hz > 0.0)) throw std::invalid_argument("SynthSpec: duration and rate must be positive");
  if (!(modulation_depth >= 0.0 && modulation_depth <= 1.0))
    throw std::invalid_argument("SynthSpec: modulation depth must lie in [0, 1]");
  if (!(modulation_period_s > 0.0)) throw std::invalid_argument("SynthSpec: modulation period must be positive");
}

Matrix gen_normal_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, std::uint64_t stream) {
  CounterRng rng(seed, stream);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

LinearDataset gen_linear_dataset(const SynthSpec& spec) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.n_samples);
  const auto d = static_cast<Eigen::Index>(spec.n_features);
  LinearDataset out;
  out.data.X = gen_normal_matrix(n, d, spec.seed, 1);
  out.true_weights = gen_normal_matrix(d, 1, spec.seed, 2).col(0);
  out.true_weights.normalize();
  const Vector signal = out.data.X * out.true_weights;
  if (std::isinf(spec.snr)) {
    out.data.y = signal;
  } else {
    out.data.y = std::sqrt(spec.snr) * signal + gen_normal_matrix(n, 1, spec.seed, 3).col(0);
  }
  out.data.C = Matrix(n, 0);
  out.data.video_id.resize(spec.n_samples);
  for (std::size_t i = 0; i < spec.n_samples; ++i)
    out.data.video_id[i] = static_cast<int>(i * spec.n_videos / spec.n_samples);
  for (Eigen::Index j = 0; j < d; ++j) out.data.feature_tags.push_back("x" + std::to_string(j));
  return out;
}

SubjectStack gen_subject_stack(const SynthSpec& spec) {
  spec.validate();
  const auto T = static_cast<Eigen::Index>(std::llround(spec.duration_s * spec.sample_rate_hz));
  const auto C = static_cast<Eigen::Index>(spec.n_channels);
  SubjectStack stack;
  stack.sample_rate_hz = spec.sample_rate_hz;
  Matrix latent = gen_normal_matrix(C, T, spec.seed, 0x6c6174656e74ULL);
  if (spec.modulation_depth > 0.0) {
    CounterRng phases(spec.seed, 0x7068617365ULL);
    for (Eigen::Index c = 0; c < C; ++c) {
      const double phase = 2.0 * std::numbers::pi * phases.uniform();
      for (Eigen::Index t = 0; t < T; ++t) {
        const double seconds = static_cast<double>(t) / spec.sample_rate_hz;
        const double a2 =
            1.0 + spec.modulation_depth * std::sin(2.0 * std::numbers::pi * seconds / spec.modulation_period_s + phase);
        latent(c, t) *= std::sqrt(a2);
      }
    }
  }
  for (std::size_t s = 0; s < spec.n_subjects; ++s) {
    if (std::isinf(spec.snr)) {
      stack.subjects.push_back(latent);
    } else {
      stack.subjects.push_back(std::sqrt(spec.snr) * latent + gen_normal_matrix(C, T, spec.seed, 0x1000 + s));
    }
    stack.subject_ids.push_back("sub" + std::to_string(s + 1));
  }
  for (Eigen::Index c = 0; c < C; ++c) stack.channel_labels.push_back("ch" + std::to_string(c + 1));
  return stack;
}

}  // namespace aenc
