#include "aenc/audio_features.hpp"
#include "aenc/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace aenc;

namespace {

AudioClip clip_of(std::size_t n, double rate, double amp = 0.0) {
  AudioClip c;
  c.samples.assign(n, amp);
  c.sample_rate_hz = rate;
  return c;
}

std::vector<double> random_frame(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = u(gen);
  return x;
}

}  // namespace

TEST_CASE("framing drops the partial tail") {
  CHECK(frame_audio(clip_of(168000, 16000)).size() == 10);
  const auto three = frame_audio(clip_of(48000, 16000));
  CHECK(three.size() == 3);
  for (const auto& f : three) CHECK(f.size() == 16000);
  CHECK_THROWS_AS(frame_audio(clip_of(8000, 16000)), std::invalid_argument);
}

TEST_CASE("short-time energy") {
  CHECK(short_time_energy(std::vector<double>(8, 0.0)) == 0.0);
  CHECK(short_time_energy(std::vector<double>(8, 1.0)) == 1.0);
  CHECK(short_time_energy(std::vector<double>{3, 4}) == 12.5);
}

TEST_CASE("zero-crossing rate") {
  CHECK(zero_crossing_rate(std::vector<double>{1, 1, 1, 1}) == 0.0);
  CHECK(zero_crossing_rate(std::vector<double>{1, -1, 1, -1}) == 1.0);
  CHECK(zero_crossing_rate(std::vector<double>{1, 2, -3, 4, 5, -6}) == doctest::Approx(0.6));
  // zeros carry the previous sign
  CHECK(zero_crossing_rate(std::vector<double>{1, 0, 0, 1}) == 0.0);
  CHECK(zero_crossing_rate(std::vector<double>{1, 0, -1, 0}) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(zero_crossing_rate(std::vector<double>{1}), std::invalid_argument);
}

TEST_CASE("sound pressure level") {
  CHECK(sound_pressure_level(std::vector<double>{1, -1, 1, -1}) == doctest::Approx(0.0));
  CHECK(sound_pressure_level(std::vector<double>{0.1, -0.1}) == doctest::Approx(-20.0));
  CHECK(sound_pressure_level(std::vector<double>(10, 0.0)) == doctest::Approx(-120.0));
}

TEST_CASE("log energy spectrum") {
  CHECK(log_energy_spectrum(std::vector<double>(16, 0.0)) == doctest::Approx(std::log(1e-12)));
  CHECK(log_energy_spectrum(std::vector<double>(16, 0.0)) == doctest::Approx(-27.631).epsilon(1e-4));
  CHECK(log_energy_spectrum(std::vector<double>(4, 1.0)) == doctest::Approx(2.7726).epsilon(1e-4));
}

TEST_CASE("LES matches the brute-force DFT on random frames") {
  for (std::size_t n : {1u, 2u, 7u, 64u, 255u, 512u}) {
    const auto x = random_frame(n, n);
    const double energy = oracle::dft_energy(x);
    double time_energy = 0.0;
    for (double v : x) time_energy += v * v;
    // Parseval
    CHECK(std::abs(energy - static_cast<double>(n) * time_energy) <= 1e-9 * std::max(1.0, energy));
    CHECK(std::abs(log_energy_spectrum(x) - std::log(energy + kLesEpsilon)) <= 1e-9);
  }
}

TEST_CASE("scaling behaviour of the descriptors") {
  const auto x = random_frame(400, 11);
  std::vector<double> scaled(x);
  const double a = 0.3;
  for (auto& v : scaled) v *= a;
  CHECK(zero_crossing_rate(scaled) == zero_crossing_rate(x));
  CHECK(short_time_energy(scaled) == doctest::Approx(a * a * short_time_energy(x)).epsilon(1e-12));
  CHECK(sound_pressure_level(scaled) == doctest::Approx(sound_pressure_level(x) + 20.0 * std::log10(a)).epsilon(1e-12));
}

TEST_CASE("lld table shape and difference columns") {
  AudioClip clip;
  clip.sample_rate_hz = 1000;
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int f = 0; f < 10; ++f)
    for (int i = 0; i < 1000; ++i) clip.samples.push_back(u(gen) * (0.1 + 0.08 * f));
  const FeatureTable t = lld_table(clip, ElementTag::voice);
  REQUIRE(t.frames() == 10);
  REQUIRE(t.features() == 12);
  CHECK(t.feature_names == lld_feature_names());
  CHECK(t.element_tag == ElementTag::voice);
  CHECK(t.level_tag == "lld");
  CHECK(t.frame_rate_hz == 1.0);
  for (int c = 0; c < 4; ++c) {
    CHECK(t.values(0, 4 + c) == 0.0);
    CHECK(t.values(0, 8 + c) == 0.0);
    CHECK(t.values(1, 8 + c) == 0.0);
    for (int r = 1; r < 10; ++r) CHECK(t.values(r, 4 + c) == t.values(r, c) - t.values(r - 1, c));
    for (int r = 2; r < 10; ++r)
      CHECK(std::abs(t.values(r, 8 + c) - (t.values(r, 4 + c) - t.values(r - 1, 4 + c))) <= 1e-12);
  }
  const auto frames = frame_audio(clip);
  CHECK(t.values(3, 1) == short_time_energy(frames[3]));
  CHECK(t.values(3, 2) == zero_crossing_rate(frames[3]));
  for (int r = 0; r < 10; ++r) {
    CHECK(t.values(r, 2) >= 0.0);
    CHECK(t.values(r, 2) <= 1.0);
    CHECK(t.values(r, 1) >= 0.0);
  }
}

TEST_CASE("constant-amplitude clip has flat differences") {
  AudioClip clip;
  clip.sample_rate_hz = 800;
  for (int i = 0; i < 800 * 6; ++i) clip.samples.push_back((i / 4) % 2 ? -0.5 : 0.5);
  const FeatureTable t = lld_table(clip);
  CHECK(t.values.rightCols(8).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("lld table needs three frames") {
  CHECK_THROWS_AS(lld_table(clip_of(2 * 1000, 1000, 0.1)), std::invalid_argument);
}

TEST_CASE("concatenated clips keep base columns") {
  AudioClip a, b, ab;
  a.sample_rate_hz = b.sample_rate_hz = ab.sample_rate_hz = 500;
  a.samples = random_frame(1500, 1);
  b.samples = random_frame(2000, 2);
  for (auto& v : b.samples) v *= 0.5;
  ab.samples = a.samples;
  ab.samples.insert(ab.samples.end(), b.samples.begin(), b.samples.end());
  const auto ta = lld_table(a), tb = lld_table(b), tab = lld_table(ab);
  CHECK(tab.values.topLeftCorner(3, 4) == ta.values.leftCols(4));
  CHECK(tab.values.bottomLeftCorner(4, 4) == tb.values.leftCols(4));
  // difference columns agree away from the junction
  CHECK(tab.values.block(5, 4, 2, 8) == tb.values.block(2, 4, 2, 8));
}

TEST_CASE("rms energy ratio") {
  AudioClip silent = clip_of(1000, 1000, 0.0);
  AudioClip loud = clip_of(1000, 1000, 0.3);
  AudioClip quiet = clip_of(1000, 1000, 0.1);
  auto [v, s] = rms_energy_ratio(silent, loud);
  CHECK(v == 0.0);
  CHECK(s == 1.0);
  std::tie(v, s) = rms_energy_ratio(loud, loud);
  CHECK(v == 0.5);
  CHECK(s == 0.5);
  std::tie(v, s) = rms_energy_ratio(loud, quiet);
  CHECK(v == doctest::Approx(0.75));
  CHECK(s == doctest::Approx(0.25));
  std::tie(v, s) = rms_energy_ratio(silent, silent);
  CHECK(v == 0.5);
  CHECK_THROWS_AS(rms_energy_ratio(clip_of(1000, 1000, 0.1), clip_of(3500, 1000, 0.1)), std::invalid_argument);
}
