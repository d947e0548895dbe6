#include "kinesynth/signal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "kinesynth/errors.hpp"

namespace kinesynth::signal {

namespace {

constexpr std::size_t kFilterOrder = 2;

}  // namespace

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace {

struct FftPlan {
  std::vector<std::size_t> bit_reverse;
  std::vector<Complex> twiddles;  // exp(-2 pi i k / n), k < n / 2, each from its exact angle
};

const FftPlan& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, FftPlan> cache;
  FftPlan& plan = cache[n];
  if (plan.bit_reverse.empty()) {
    plan.bit_reverse.resize(n);
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      plan.bit_reverse[i] = j;
    }
    plan.twiddles.resize(std::max<std::size_t>(n / 2, 1));
    for (std::size_t k = 0; k < plan.twiddles.size(); ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      plan.twiddles[k] = Complex(std::cos(angle), std::sin(angle));
    }
  }
  return plan;
}

}  // namespace

void fft_inplace(std::vector<Complex>& data, bool inverse) {
  const std::size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw ParameterError("fft: size " + std::to_string(n) + " is not a power of two");
  }
  const FftPlan& plan = plan_for(n);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t j = plan.bit_reverse[i];
    if (i < j) std::swap(data[i], data[j]);
  }
  const double sign = inverse ? -1.0 : 1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex w = plan.twiddles[k * stride];
        const double wr = w.real(), wi = sign * w.imag();
        const Complex u = data[start + k];
        const Complex d = data[start + k + half];
        const double vr = d.real() * wr - d.imag() * wi;
        const double vi = d.real() * wi + d.imag() * wr;
        data[start + k] = Complex(u.real() + vr, u.imag() + vi);
        data[start + k + half] = Complex(u.real() - vr, u.imag() - vi);
      }
    }
  }
}

std::vector<Complex> fft_real(std::span<const double> x, std::size_t n_fft) {
  if (x.empty()) throw ParameterError("fft_real: empty input");
  if (n_fft == 0) n_fft = next_power_of_two(x.size());
  if (n_fft < x.size()) {
    throw ParameterError("fft_real: n_fft " + std::to_string(n_fft) + " shorter than input " +
                         std::to_string(x.size()));
  }
  std::vector<Complex> buffer(n_fft);
  std::copy(x.begin(), x.end(), buffer.begin());
  fft_inplace(buffer, false);
  buffer.resize(n_fft / 2 + 1);
  return buffer;
}

std::vector<double> fft_real_backward(std::span<const Complex> grad_bins, std::size_t length,
                                      std::size_t n_fft) {
  if (grad_bins.size() != n_fft / 2 + 1) {
    throw DimensionError("fft_real_backward: expected " + std::to_string(n_fft / 2 + 1) +
                         " bins, got " + std::to_string(grad_bins.size()));
  }
  // dL/dx_t = Re( sum_k G_k exp(+2 pi i k t / N) ) with G_k = dRe + i dIm.
  std::vector<Complex> buffer(n_fft);
  std::copy(grad_bins.begin(), grad_bins.end(), buffer.begin());
  fft_inplace(buffer, true);
  std::vector<double> grad(length);
  for (std::size_t t = 0; t < length; ++t) grad[t] = buffer[t].real();
  return grad;
}

Spectrum magnitude_spectrum(std::span<const double> x, double sample_rate, std::size_t n_fft) {
  if (!(sample_rate > 0.0)) throw ParameterError("magnitude_spectrum: sample rate must be positive");
  if (n_fft == 0) n_fft = next_power_of_two(x.size());
  const auto bins = fft_real(x, n_fft);
  Spectrum s;
  s.sample_rate = sample_rate;
  s.bin_freqs.resize(bins.size());
  s.magnitudes.resize(bins.size());
  for (std::size_t k = 0; k < bins.size(); ++k) {
    s.bin_freqs[k] = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
    s.magnitudes[k] = std::abs(bins[k]);
  }
  return s;
}

Biquad butterworth_lowpass(double cutoff_hz, double sample_rate) {
  if (!(sample_rate > 0.0)) throw ParameterError("butterworth: sample rate must be positive");
  if (!(cutoff_hz > 0.0) || cutoff_hz >= sample_rate / 2.0) {
    throw ParameterError("butterworth: cutoff " + std::to_string(cutoff_hz) +
                         " Hz must lie in (0, Nyquist=" + std::to_string(sample_rate / 2.0) + ")");
  }
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  const double k2 = k * k;
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
  Biquad f{};
  f.b0 = k2 * norm;
  f.b1 = 2.0 * f.b0;
  f.b2 = f.b0;
  f.a1 = 2.0 * (k2 - 1.0) * norm;
  f.a2 = (1.0 - std::numbers::sqrt2 * k + k2) * norm;
  return f;
}

double butterworth_magnitude(double freq_hz, double cutoff_hz, double sample_rate) {
  const double ratio = std::tan(std::numbers::pi * freq_hz / sample_rate) /
                       std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  return 1.0 / std::sqrt(1.0 + std::pow(ratio, 4.0));
}

std::vector<double> biquad_filter(const Biquad& f, std::span<const double> x) {
  std::vector<double> y(x.size());
  if (x.empty()) return y;
  double z1 = (1.0 - f.b0) * x[0];
  double z2 = (f.b2 - f.a2) * x[0];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double out = f.b0 * x[i] + z1;
    z1 = f.b1 * x[i] - f.a1 * out + z2;
    z2 = f.b2 * x[i] - f.a2 * out;
    y[i] = out;
  }
  return y;
}

std::vector<double> filtfilt(std::span<const double> x, double cutoff_hz, double sample_rate) {
  const Biquad f = butterworth_lowpass(cutoff_hz, sample_rate);
  if (x.empty()) return {};
  const std::size_t pad = 3 * kFilterOrder;
  std::vector<double> extended;
  extended.reserve(x.size() + 2 * pad);
  extended.insert(extended.end(), pad, x.front());
  extended.insert(extended.end(), x.begin(), x.end());
  extended.insert(extended.end(), pad, x.back());

  std::vector<double> forward = biquad_filter(f, extended);
  std::reverse(forward.begin(), forward.end());
  std::vector<double> backward = biquad_filter(f, forward);
  std::reverse(backward.begin(), backward.end());
  return std::vector<double>(backward.begin() + static_cast<std::ptrdiff_t>(pad),
                             backward.begin() + static_cast<std::ptrdiff_t>(pad + x.size()));
}

Tensor lowpass(const Tensor& channels, double sample_rate, double cutoff_hz) {
  require_rank(channels, 2, "lowpass input");
  butterworth_lowpass(cutoff_hz, sample_rate);  // validates before touching data
  const std::size_t rows = channels.dim(0), length = channels.dim(1);
  Tensor out(channels.shape());
  for (std::size_t c = 0; c < rows; ++c) {
    const std::span<const double> row(channels.data() + c * length, length);
    const auto filtered = filtfilt(row, cutoff_hz, sample_rate);
    std::copy(filtered.begin(), filtered.end(), out.data() + c * length);
  }
  return out;
}

double high_frequency_power_ratio(const Tensor& channels, double sample_rate, double cutoff_hz) {
  require_rank(channels, 2, "high_frequency_power_ratio input");
  const std::size_t rows = channels.dim(0), length = channels.dim(1);
  const std::size_t n_fft = next_power_of_two(length);
  double total = 0.0;
  double high = 0.0;
  for (std::size_t c = 0; c < rows; ++c) {
    const auto bins = fft_real(std::span<const double>(channels.data() + c * length, length), n_fft);
    for (std::size_t k = 1; k < bins.size(); ++k) {
      const double power = std::norm(bins[k]);
      total += power;
      if (static_cast<double>(k) * sample_rate / static_cast<double>(n_fft) > cutoff_hz) high += power;
    }
  }
  return total > 0.0 ? high / total : 0.0;
}

}  // namespace kinesynth::signal
