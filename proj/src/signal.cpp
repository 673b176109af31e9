#include "aenc/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace aenc {

namespace {

using cplx = std::complex<double>;

std::vector<cplx> butter_prototype_poles(int order) {
  std::vector<cplx> poles;
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    poles.emplace_back(std::cos(theta), std::sin(theta));
  }
  return poles;
}

double prewarp(double hz, double rate) { return 2.0 * rate * std::tan(std::numbers::pi * hz / rate); }

cplx bilinear(cplx s, double rate) { return (2.0 * rate + s) / (2.0 * rate - s); }

// Groups digital poles into conjugate pairs (real poles paired with each other) and builds one
// section per group with the given zero pair. Gain is normalized at z = ref.
Sos assemble(const std::vector<cplx>& poles, const std::vector<std::pair<cplx, cplx>>& zero_pairs,
             cplx ref) {
  std::vector<cplx> upper, real;
  for (const auto& p : poles) {
    if (p.imag() > 1e-12) upper.push_back(p);
    else if (std::abs(p.imag()) <= 1e-12) real.push_back(p);
  }
  std::vector<std::pair<cplx, cplx>> pole_pairs;
  for (const auto& p : upper) pole_pairs.emplace_back(p, std::conj(p));
  std::sort(real.begin(), real.end(), [](cplx a, cplx b) { return a.real() < b.real(); });
  for (std::size_t i = 0; i + 1 < real.size(); i += 2) pole_pairs.emplace_back(real[i], real[i + 1]);
  const bool lone_real = real.size() % 2 == 1;
  if (zero_pairs.size() < pole_pairs.size()) throw std::logic_error("filter design: too few zeros");

  // Poles closest to the unit circle go last (they carry the most gain).
  std::sort(pole_pairs.begin(), pole_pairs.end(),
            [](const auto& a, const auto& b) { return std::abs(a.first) < std::abs(b.first); });

  Sos sos;
  auto normalize = [&](Biquad q) {
    const cplx zi = 1.0 / ref;
    const cplx num = q.b0 + q.b1 * zi + q.b2 * zi * zi;
    const cplx den = 1.0 + q.a1 * zi + q.a2 * zi * zi;
    const double g = std::abs(den / num);
    q.b0 *= g;
    q.b1 *= g;
    q.b2 *= g;
    return q;
  };
  for (std::size_t i = 0; i < pole_pairs.size(); ++i) {
    const auto [p1, p2] = pole_pairs[i];
    const auto [z1, z2] = zero_pairs[i];
    Biquad q;
    q.b0 = 1.0;
    q.b1 = -(z1 + z2).real();
    q.b2 = (z1 * z2).real();
    q.a1 = -(p1 + p2).real();
    q.a2 = (p1 * p2).real();
    sos.push_back(normalize(q));
  }
  if (lone_real) {
    const cplx p = real.back();
    const cplx z = zero_pairs.size() > pole_pairs.size() ? zero_pairs[pole_pairs.size()].first : cplx(-1.0, 0.0);
    Biquad q;
    q.b0 = 1.0;
    q.b1 = -z.real();
    q.b2 = 0.0;
    q.a1 = -p.real();
    q.a2 = 0.0;
    sos.push_back(normalize(q));
  }
  return sos;
}

void check_order(int order) {
  if (order < 1 || order > 24) throw std::invalid_argument("filter order must be in [1, 24]");
}

// Steady-state initial conditions of each DF2T section for a unit step at the cascade input.
std::vector<std::array<double, 2>> step_initial_conditions(const Sos& sos) {
  std::vector<std::array<double, 2>> zi(sos.size());
  double scale = 1.0;
  for (std::size_t i = 0; i < sos.size(); ++i) {
    const auto& q = sos[i];
    const double gain = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    const double z1 = q.b2 - q.a2 * gain;
    const double z0 = q.b1 - q.a1 * gain + z1;
    zi[i] = {z0 * scale, z1 * scale};
    scale *= gain;
  }
  return zi;
}

void run_sos(const Sos& sos, std::vector<double>& x, std::vector<std::array<double, 2>> state) {
  for (std::size_t s = 0; s < sos.size(); ++s) {
    const auto& q = sos[s];
    double z0 = state[s][0], z1 = state[s][1];
    for (double& v : x) {
      const double in = v;
      const double out = q.b0 * in + z0;
      z0 = q.b1 * in - q.a1 * out + z1;
      z1 = q.b2 * in - q.a2 * out;
      v = out;
    }
  }
}

std::size_t pad_length(const Sos& sos, std::size_t n) {
  double rmax = 0.0;
  for (const auto& q : sos) {
    // |p|^2 = a2 for a conjugate pair; otherwise use the larger real root.
    const double disc = q.a1 * q.a1 - 4.0 * q.a2;
    double r = 0.0;
    if (disc < 0) r = std::sqrt(q.a2);
    else r = std::max(std::abs((-q.a1 + std::sqrt(disc)) / 2.0), std::abs((-q.a1 - std::sqrt(disc)) / 2.0));
    rmax = std::max(rmax, r);
  }
  std::size_t decay = 0;
  if (rmax > 0.0 && rmax < 1.0) decay = static_cast<std::size_t>(std::ceil(std::log(1e-9) / std::log(rmax)));
  const std::size_t base = 3 * (2 * sos.size() + 1);
  return std::min(n > 0 ? n - 1 : 0, std::max(base, decay));
}

}  // namespace

Sos butter_lowpass(int order, double cutoff_hz, double rate_hz) {
  check_order(order);
  if (!(cutoff_hz > 0.0 && cutoff_hz < rate_hz / 2.0))
    throw std::invalid_argument("low-pass cutoff must lie in (0, Nyquist)");
  const double wc = prewarp(cutoff_hz, rate_hz);
  std::vector<cplx> poles;
  for (auto p : butter_prototype_poles(order)) poles.push_back(bilinear(p * wc, rate_hz));
  std::vector<std::pair<cplx, cplx>> zeros(static_cast<std::size_t>(order / 2), {cplx(-1, 0), cplx(-1, 0)});
  if (order % 2) zeros.emplace_back(cplx(-1, 0), cplx(-1, 0));
  return assemble(poles, zeros, cplx(1.0, 0.0));
}

Sos butter_highpass(int order, double cutoff_hz, double rate_hz) {
  check_order(order);
  if (!(cutoff_hz > 0.0 && cutoff_hz < rate_hz / 2.0))
    throw std::invalid_argument("high-pass cutoff must lie in (0, Nyquist)");
  const double wc = prewarp(cutoff_hz, rate_hz);
  std::vector<cplx> poles;
  for (auto p : butter_prototype_poles(order)) poles.push_back(bilinear(wc / p, rate_hz));
  std::vector<std::pair<cplx, cplx>> zeros(static_cast<std::size_t>(order / 2), {cplx(1, 0), cplx(1, 0)});
  if (order % 2) zeros.emplace_back(cplx(1, 0), cplx(1, 0));
  return assemble(poles, zeros, cplx(-1.0, 0.0));
}

Sos butter_bandstop(int order, double low_hz, double high_hz, double rate_hz) {
  check_order(order);
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < rate_hz / 2.0))
    throw std::invalid_argument("band-stop edges must satisfy 0 < low < high < Nyquist");
  const double w1 = prewarp(low_hz, rate_hz);
  const double w2 = prewarp(high_hz, rate_hz);
  const double bw = w2 - w1;
  const double w0 = std::sqrt(w1 * w2);
  std::vector<cplx> poles;
  for (auto p : butter_prototype_poles(order)) {
    const cplx half = (bw / 2.0) / p;
    const cplx root = std::sqrt(half * half - w0 * w0);
    poles.push_back(bilinear(half + root, rate_hz));
    poles.push_back(bilinear(half - root, rate_hz));
  }
  const cplx z = bilinear(cplx(0.0, w0), rate_hz);
  std::vector<std::pair<cplx, cplx>> zeros(static_cast<std::size_t>(order), {z, std::conj(z)});
  return assemble(poles, zeros, cplx(1.0, 0.0));
}

std::vector<double> sos_filter(const Sos& sos, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  run_sos(sos, y, std::vector<std::array<double, 2>>(sos.size(), {0.0, 0.0}));
  return y;
}

std::vector<double> sos_filtfilt(const Sos& sos, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (n == 1) return {x[0]};
  const std::size_t pad = pad_length(sos, n);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto zi = step_initial_conditions(sos);
  auto scaled = [&](double v) {
    auto s = zi;
    for (auto& z : s) {
      z[0] *= v;
      z[1] *= v;
    }
    return s;
  };
  run_sos(sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  run_sos(sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

namespace {

SignalMatrix apply_rows(const SignalMatrix& sig, const Sos& sos) {
  SignalMatrix out = sig;
  std::vector<double> row(static_cast<std::size_t>(sig.samples()));
  for (Eigen::Index c = 0; c < sig.channels(); ++c) {
    for (Eigen::Index t = 0; t < sig.samples(); ++t) row[static_cast<std::size_t>(t)] = sig.data(c, t);
    const auto y = sos_filtfilt(sos, row);
    for (Eigen::Index t = 0; t < sig.samples(); ++t) out.data(c, t) = y[static_cast<std::size_t>(t)];
  }
  return out;
}

long as_integral_rate(double rate) {
  const double r = std::round(rate);
  if (std::abs(rate - r) > 1e-9 || r < 1) throw std::invalid_argument("resampling requires integral sample rates");
  return static_cast<long>(r);
}

}  // namespace

SignalMatrix notch_filter(const SignalMatrix& sig, double low_hz, double high_hz) {
  sig.validate();
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < sig.sample_rate_hz / 2.0))
    throw std::invalid_argument("notch band must satisfy 0 < low < high < Nyquist");
  return apply_rows(sig, butter_bandstop(kNotchOrder, low_hz, high_hz, sig.sample_rate_hz));
}

SignalMatrix band_and_resample(const SignalMatrix& sig, double low_hz, double high_hz, double target_rate) {
  sig.validate();
  if (target_rate > sig.sample_rate_hz)
    throw std::invalid_argument("band_and_resample: upsampling is not supported");
  if (!(high_hz > 0.0 && high_hz < target_rate / 2.0))
    throw std::invalid_argument("band_and_resample: high cutoff must lie below the target Nyquist");
  if (low_hz < 0.0 || low_hz >= high_hz) throw std::invalid_argument("band_and_resample: need 0 <= low < high");

  SignalMatrix band = apply_rows(sig, butter_lowpass(kBandLimitOrder, high_hz, sig.sample_rate_hz));
  if (low_hz > 0.0) band = apply_rows(band, butter_highpass(4, low_hz, sig.sample_rate_hz));

  const long from = as_integral_rate(sig.sample_rate_hz);
  const long to = as_integral_rate(target_rate);
  const long g = std::gcd(from, to);
  const int up = static_cast<int>(to / g), down = static_cast<int>(from / g);
  SignalMatrix out;
  out.sample_rate_hz = target_rate;
  out.channel_labels = sig.channel_labels;
  std::vector<double> row(static_cast<std::size_t>(sig.samples()));
  for (Eigen::Index c = 0; c < sig.channels(); ++c) {
    for (Eigen::Index t = 0; t < sig.samples(); ++t) row[static_cast<std::size_t>(t)] = band.data(c, t);
    const auto y = resample_poly(row, up, down);
    if (c == 0) out.data.resize(sig.channels(), static_cast<Eigen::Index>(y.size()));
    for (std::size_t t = 0; t < y.size(); ++t) out.data(c, static_cast<Eigen::Index>(t)) = y[t];
  }
  return out;
}

std::vector<double> resample_poly(std::span<const double> x, int up, int down) {
  if (up < 1 || down < 1) throw std::invalid_argument("resample_poly: up/down must be positive");
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  const std::size_t n = x.size();
  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(n) * up / down));
  if (up == 1 && down == 1) return {x.begin(), x.end()};
  if (n == 0) return {};

  const int max_rate = std::max(up, down);
  const int half_len = 10 * max_rate;
  const int taps = 2 * half_len + 1;
  const double cutoff = 1.0 / max_rate;  // relative to the upsampled Nyquist
  constexpr double beta = 5.0;
  std::vector<double> h(static_cast<std::size_t>(taps));
  const double i0_beta = std::cyl_bessel_i(0.0, beta);
  for (int k = 0; k < taps; ++k) {
    const double m = k - half_len;
    const double arg = std::numbers::pi * cutoff * m;
    const double sinc = m == 0 ? 1.0 : std::sin(arg) / arg;
    const double r = m / half_len;
    const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    h[static_cast<std::size_t>(k)] = cutoff * sinc * w;
  }
  // Each polyphase branch sums to exactly one so constant signals pass unchanged.
  std::vector<double> branch_sum(static_cast<std::size_t>(up), 0.0);
  for (int k = 0; k < taps; ++k) branch_sum[static_cast<std::size_t>(k % up)] += h[static_cast<std::size_t>(k)];

  // Odd-reflection extension so edges see a continued signal.
  auto sample = [&](long i) -> double {
    const long last = static_cast<long>(n) - 1;
    if (i < 0) {
      const long j = std::min(-i, last);
      return 2.0 * x[0] - x[static_cast<std::size_t>(j)];
    }
    if (i > last) {
      const long j = std::max(last - (i - last), 0L);
      return 2.0 * x[static_cast<std::size_t>(last)] - x[static_cast<std::size_t>(j)];
    }
    return x[static_cast<std::size_t>(i)];
  };

  std::vector<double> y(out_len, 0.0);
  for (std::size_t m = 0; m < out_len; ++m) {
    const long centre = static_cast<long>(m) * down + half_len;  // upsampled index aligned with tap 0
    const long phase = ((centre % up) + up) % up;
    double acc = 0.0;
    for (long k = phase; k < taps; k += up) {
      const long j = centre - k;  // multiple of up
      acc += h[static_cast<std::size_t>(k)] * sample(j / up);
    }
    y[m] = acc / branch_sum[static_cast<std::size_t>(phase)];
  }
  return y;
}

std::vector<double> first_difference(std::span<const double> series) {
  if (series.size() < 2) throw std::invalid_argument("first_difference: need at least 2 samples");
  std::vector<double> out(series.size() - 1);
  for (std::size_t i = 0; i + 1 < series.size(); ++i) out[i] = series[i + 1] - series[i];
  return out;
}

SignalMatrix first_difference(const SignalMatrix& sig) {
  if (sig.samples() < 2) throw std::invalid_argument("first_difference: need at least 2 samples");
  SignalMatrix out;
  out.sample_rate_hz = sig.sample_rate_hz;
  out.channel_labels = sig.channel_labels;
  out.data = sig.data.rightCols(sig.samples() - 1) - sig.data.leftCols(sig.samples() - 1);
  return out;
}

}  // namespace aenc
