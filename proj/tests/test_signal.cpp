#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "kinesynth/errors.hpp"
#include "kinesynth/signal.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace kinesynth;
using namespace kinesynth::signal;
using kinesynth::testing::naive_dft;
using kinesynth::testing::sine;

namespace {

double rms(std::span<const double> x, std::size_t first = 0, std::size_t last = 0) {
  if (last == 0) last = x.size();
  double s = 0.0;
  for (std::size_t i = first; i < last; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(last - first));
}

}  // namespace

TEST_CASE("fft_real examples") {
  const std::vector<double> zeros(300, 0.0);
  for (const Complex& c : fft_real(zeros)) CHECK(std::abs(c) == 0.0);

  std::vector<double> impulse(8, 0.0);
  impulse[0] = 1.0;
  const auto bins = fft_real(impulse, 8);
  REQUIRE(bins.size() == 5);
  for (const Complex& c : bins) CHECK(std::abs(c) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(fft_real(std::vector<double>{}), ParameterError);
  CHECK(fft_real(zeros).size() == 257);
}

TEST_CASE("fft_real agrees with the direct DFT") {
  SeededRng rng(21);
  std::vector<double> x(300);
  for (double& v : x) v = rng.uniform(-10.0, 10.0);
  const auto fast = fft_real(x, 512);
  const auto slow = naive_dft(x, 512);
  double worst = 0.0;
  for (std::size_t k = 0; k < fast.size(); ++k) worst = std::max(worst, std::abs(fast[k] - slow[k]));
  CHECK(worst <= 1e-9);
}

TEST_CASE("fft_real is linear") {
  SeededRng rng(22);
  std::vector<double> a(300), b(300), mix(300);
  for (std::size_t i = 0; i < 300; ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
    mix[i] = 2.5 * a[i] - 0.75 * b[i];
  }
  const auto fa = fft_real(a), fb = fft_real(b), fm = fft_real(mix);
  for (std::size_t k = 0; k < fm.size(); ++k) CHECK(std::abs(fm[k] - (2.5 * fa[k] - 0.75 * fb[k])) <= 1e-9);
}

TEST_CASE("one-sided Parseval identity") {
  SeededRng rng(23);
  std::vector<double> x(300);
  for (double& v : x) v = rng.normal();
  const std::size_t n = 512;
  const Spectrum s = magnitude_spectrum(x, 60.0, n);
  double energy = 0.0;
  for (double v : x) energy += v * v;
  double spectral = s.magnitudes.front() * s.magnitudes.front() + s.magnitudes.back() * s.magnitudes.back();
  for (std::size_t k = 1; k + 1 < s.magnitudes.size(); ++k) spectral += 2.0 * s.magnitudes[k] * s.magnitudes[k];
  spectral /= static_cast<double>(n);
  CHECK(std::abs(spectral - energy) <= 1e-9 * energy);
  CHECK(s.bin_freqs[256] == doctest::Approx(30.0));
  CHECK(s.bin_freqs[1] == doctest::Approx(60.0 / 512.0));
}

TEST_CASE("1 Hz sine spectrum peaks near 1 Hz") {
  const auto x = sine(1.0, 60.0, 300);
  const Spectrum s = magnitude_spectrum(x, 60.0, 512);
  std::size_t peak = 0;
  for (std::size_t k = 0; k < s.magnitudes.size(); ++k) {
    if (s.magnitudes[k] > s.magnitudes[peak]) peak = k;
  }
  CHECK(std::abs(s.bin_freqs[peak] - 1.0) <= 60.0 / 512.0);
  for (std::size_t k = 0; k < s.magnitudes.size(); ++k) {
    if (s.bin_freqs[k] > 2.0) CHECK(s.magnitudes[peak] >= 10.0 * s.magnitudes[k]);
  }
  for (double m : magnitude_spectrum(std::vector<double>(300, 0.0), 60.0).magnitudes) CHECK(m == 0.0);
}

TEST_CASE("fft_real reverse pass matches central differences") {
  SeededRng rng(24);
  Tensor x = kinesynth::testing::random_tensor({20}, rng);
  const std::size_t n = 32;
  std::vector<Complex> weights(n / 2 + 1);
  for (auto& w : weights) w = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
  // L = sum_k wr_k Re X_k + wi_k Im X_k
  auto f = [&] {
    const auto bins = fft_real(x.values(), n);
    double s = 0.0;
    for (std::size_t k = 0; k < bins.size(); ++k) s += weights[k].real() * bins[k].real() + weights[k].imag() * bins[k].imag();
    return s;
  };
  const auto analytic = fft_real_backward(weights, 20, n);
  const Tensor numeric = kinesynth::testing::numeric_gradient(f, x);
  CHECK(kinesynth::testing::relative_error(Tensor({20}, analytic), numeric) < 1e-8);
}

TEST_CASE("butterworth coefficients") {
  const Biquad f = butterworth_lowpass(2.0, 60.0);
  CHECK((f.b0 + f.b1 + f.b2) / (1.0 + f.a1 + f.a2) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(butterworth_magnitude(2.0, 2.0, 60.0) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(butterworth_lowpass(30.0, 60.0), ParameterError);
  CHECK_THROWS_AS(butterworth_lowpass(0.0, 60.0), ParameterError);
  CHECK_THROWS_AS(lowpass(Tensor({1, 10}), 60.0, 31.0), ParameterError);
}

TEST_CASE("zero-phase lowpass examples") {
  SUBCASE("constant signal passes unchanged") {
    const std::vector<double> flat(300, 3.7);
    for (double v : filtfilt(flat, 2.0, 60.0)) CHECK(std::abs(v - 3.7) <= 1e-9);
  }
  SUBCASE("preserves length") {
    const auto x = sine(0.7, 60.0, 123);
    CHECK(filtfilt(x, 2.0, 60.0).size() == 123);
    CHECK(lowpass(Tensor({9, 300}, 1.0), 60.0).shape() == Shape{9, 300});
  }
  // Steady-state retention measured away from the edges of a 60 s signal.
  const std::size_t n = 3600, lo = 600, hi = 3000;
  SUBCASE("0.5 Hz passes") {
    const auto x = sine(0.5, 60.0, n);
    const double ratio = rms(filtfilt(x, 2.0, 60.0), lo, hi) / rms(x, lo, hi);
    CHECK(ratio >= 0.99);
    const double analytic = std::pow(butterworth_magnitude(0.5, 2.0, 60.0), 2.0);
    CHECK(std::abs(ratio - analytic) <= 0.05 * analytic);
  }
  SUBCASE("10 Hz is attenuated") {
    const auto x = sine(10.0, 60.0, n);
    const double ratio = rms(filtfilt(x, 2.0, 60.0), lo, hi) / rms(x, lo, hi);
    CHECK(ratio <= 0.01);
    const double analytic = std::pow(butterworth_magnitude(10.0, 2.0, 60.0), 2.0);
    CHECK(std::abs(ratio - analytic) <= 0.05 * analytic);
  }
  SUBCASE("filtering a band-limited trial twice barely changes it") {
    std::vector<double> x(300);
    for (std::size_t t = 0; t < 300; ++t) {
      const double s = static_cast<double>(t) / 60.0;
      x[t] = 2.0 * std::sin(2 * std::numbers::pi * 0.4 * s) + std::cos(2 * std::numbers::pi * 0.9 * s + 0.3);
    }
    const auto once = filtfilt(x, 2.0, 60.0);
    const auto twice = filtfilt(once, 2.0, 60.0);
    CHECK(std::abs(rms(twice) - rms(once)) < 0.01 * rms(once));
  }
}

TEST_CASE("high frequency power ratio") {
  Tensor low({1, 300}, sine(1.0, 60.0, 300));
  Tensor high({1, 300}, sine(10.0, 60.0, 300));
  CHECK(high_frequency_power_ratio(low, 60.0) < 0.02);
  CHECK(high_frequency_power_ratio(high, 60.0) > 0.98);
  CHECK(high_frequency_power_ratio(Tensor({9, 300}), 60.0) == 0.0);

  // Oracle: the same ratio from the direct DFT.
  const auto bins = naive_dft(low.values(), 512);
  double total = 0.0, above = 0.0;
  for (std::size_t k = 1; k < bins.size(); ++k) {
    total += std::norm(bins[k]);
    if (static_cast<double>(k) * 60.0 / 512.0 > 2.0) above += std::norm(bins[k]);
  }
  CHECK(high_frequency_power_ratio(low, 60.0) == doctest::Approx(above / total).epsilon(1e-9));
}
