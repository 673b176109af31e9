#include "aenc/signal.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

using namespace aenc;

namespace {

// |H(e^{jw})| of the cascade, straight from the coefficients.
double gain_at(const Sos& sos, double hz, double rate) {
  const std::complex<double> z = std::polar(1.0, -2.0 * std::numbers::pi * hz / rate);
  std::complex<double> h = 1.0;
  for (const auto& s : sos) h *= (s.b0 + s.b1 * z + s.b2 * z * z) / (1.0 + s.a1 * z + s.a2 * z * z);
  return std::abs(h);
}

std::vector<double> sine(double hz, double rate, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  return x;
}

// RMS over the middle half, away from edge transients.
double mid_rms(std::span<const double> x) {
  const std::size_t a = x.size() / 4, b = 3 * x.size() / 4;
  double s = 0.0;
  for (std::size_t i = a; i < b; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(b - a));
}

double db(double ratio) { return 20.0 * std::log10(ratio); }

SignalMatrix one_channel(std::vector<double> x, double rate) {
  SignalMatrix m;
  m.data = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  m.sample_rate_hz = rate;
  return m;
}

std::vector<double> row(const SignalMatrix& m) {
  return {m.data.row(0).data(), m.data.row(0).data() + m.data.cols()};
}

}  // namespace

TEST_CASE("notch removes 50 Hz by at least 40 dB") {
  const double rate = 200.0;
  const Sos design = butter_bandstop(kNotchOrder, 48.0, 52.0, rate);
  // forward-backward squares the single-pass gain
  const double predicted = std::pow(gain_at(design, 50.0, rate), 2);
  CHECK(db(predicted) <= -40.0);

  const auto x = sine(50.0, rate, 4000);
  const auto y = row(notch_filter(one_channel(x, rate), 48.0, 52.0));
  REQUIRE(y.size() == x.size());
  const double measured = mid_rms(y) / mid_rms(x);
  CHECK(db(measured) <= -40.0);
}

TEST_CASE("notch passband ripple at 10 Hz stays within 1 dB") {
  const double rate = 200.0;
  const Sos design = butter_bandstop(kNotchOrder, 48.0, 52.0, rate);
  CHECK(std::abs(db(std::pow(gain_at(design, 10.0, rate), 2))) <= 1.0);
  const auto x = sine(10.0, rate, 4000);
  const auto y = row(notch_filter(one_channel(x, rate)));
  CHECK(std::abs(db(mid_rms(y) / mid_rms(x))) <= 1.0);
  // measured response tracks the coefficient-derived one
  CHECK(mid_rms(y) / mid_rms(x) == doctest::Approx(std::pow(gain_at(design, 10.0, rate), 2)).epsilon(1e-3));
}

TEST_CASE("notch of zeros is zeros") {
  const auto y = row(notch_filter(one_channel(std::vector<double>(1000, 0.0), 200.0)));
  CHECK(std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("notch band outside Nyquist is rejected") {
  CHECK_THROWS_AS(notch_filter(one_channel(std::vector<double>(100, 1.0), 200.0), 98.0, 102.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(notch_filter(one_channel(std::vector<double>(100, 1.0), 200.0), 52.0, 48.0),
                  std::invalid_argument);
}

TEST_CASE("resample 1000 Hz to 200 Hz gives 2000 samples for 10 s") {
  const auto out = band_and_resample(one_channel(std::vector<double>(10000, 0.0), 1000.0));
  CHECK(out.samples() == 2000);
  CHECK(out.sample_rate_hz == 200.0);
}

TEST_CASE("DC survives band limit and resampling") {
  const auto out = row(band_and_resample(one_channel(std::vector<double>(10000, 3.0), 1000.0)));
  for (double v : out) CHECK(std::abs(v - 3.0) <= 1e-6);
}

TEST_CASE("90 Hz is attenuated at least 30 dB by the 0-75 Hz limit") {
  const double rate = 1000.0;
  const Sos design = butter_lowpass(kBandLimitOrder, 75.0, rate);
  CHECK(db(std::pow(gain_at(design, 90.0, rate), 2)) <= -30.0);
  const auto x = sine(90.0, rate, 20000);
  const auto y = row(band_and_resample(one_channel(x, rate)));
  CHECK(db(mid_rms(y) / mid_rms(x)) <= -30.0);
}

TEST_CASE("upsampling and cutoffs above the target Nyquist are rejected") {
  const auto sig = one_channel(std::vector<double>(1000, 0.0), 100.0);
  CHECK_THROWS_AS(band_and_resample(sig, 0.0, 40.0, 200.0), std::invalid_argument);
  const auto fast = one_channel(std::vector<double>(1000, 0.0), 1000.0);
  CHECK_THROWS_AS(band_and_resample(fast, 0.0, 120.0, 200.0), std::invalid_argument);
}

TEST_CASE("filters are linear") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal;
  std::vector<double> x(3000), y(3000), mix(3000);
  const double a = 1.7, b = -0.4;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = normal(gen);
    y[i] = normal(gen);
    mix[i] = a * x[i] + b * y[i];
  }
  const auto fx = row(notch_filter(one_channel(x, 200.0)));
  const auto fy = row(notch_filter(one_channel(y, 200.0)));
  const auto fm = row(notch_filter(one_channel(mix, 200.0)));
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(fm[i] - (a * fx[i] + b * fy[i])));
  CHECK(worst <= 1e-9);

  const auto rx = row(band_and_resample(one_channel(x, 1000.0)));
  const auto ry = row(band_and_resample(one_channel(y, 1000.0)));
  const auto rm = row(band_and_resample(one_channel(mix, 1000.0)));
  worst = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) worst = std::max(worst, std::abs(rm[i] - (a * rx[i] + b * ry[i])));
  CHECK(worst <= 1e-9);
}

TEST_CASE("filtfilt is zero phase") {
  // a zero-phase filter keeps the peak of a passband sine where it was
  const double rate = 200.0;
  const auto x = sine(5.0, rate, 2000);
  const Sos lp = butter_lowpass(4, 30.0, rate);
  const auto y = sos_filtfilt(lp, x);
  double worst = 0.0;
  for (std::size_t i = 500; i < 1500; ++i) worst = std::max(worst, std::abs(y[i] - x[i]));
  CHECK(worst < 1e-3);
}

TEST_CASE("first difference") {
  CHECK(first_difference(std::vector<double>{5, 5, 5}) == std::vector<double>{0, 0});
  CHECK(first_difference(std::vector<double>{1, 3, 6}) == std::vector<double>{2, 3});
  CHECK(first_difference(std::vector<double>(2000, 1.0)).size() == 1999);
  CHECK_THROWS_AS(first_difference(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("first difference of a cumulative sum recovers the tail") {
  std::vector<double> x{0.5, -1, 2, 8, -3, 0.25};
  std::vector<double> c(x.size());
  std::partial_sum(x.begin(), x.end(), c.begin());
  const auto d = first_difference(c);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == doctest::Approx(x[i + 1]).epsilon(1e-15));
}

TEST_CASE("first difference on a matrix works per channel") {
  SignalMatrix m;
  m.data = Matrix{{1, 2, 4}, {0, -1, -1}};
  m.sample_rate_hz = 10;
  m.channel_labels = {"a", "b"};
  const auto d = first_difference(m);
  CHECK(d.data == Matrix{{1, 2}, {-1, 0}});
  CHECK(d.channel_labels == m.channel_labels);
}
