#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "kinesynth/tensor.hpp"

namespace kinesynth::signal {

using Complex = std::complex<double>;

// Smallest power of two >= n (n >= 1).
std::size_t next_power_of_two(std::size_t n);

// In-place iterative radix-2 FFT; size must be a power of two.
// inverse == true applies the conjugate kernel without 1/N scaling.
void fft_inplace(std::vector<Complex>& data, bool inverse = false);

// One-sided DFT of x zero-padded to n_fft (0 selects the next power of two):
// X_k = sum_t x_t exp(-2 pi i k t / n_fft), k = 0..n_fft/2.
std::vector<Complex> fft_real(std::span<const double> x, std::size_t n_fft = 0);

// Reverse pass of fft_real. Given dL/dRe(X_k) and dL/dIm(X_k) for the
// n_fft/2 + 1 bins, returns dL/dx for the `length` original samples.
std::vector<double> fft_real_backward(std::span<const Complex> grad_bins, std::size_t length,
                                      std::size_t n_fft);

struct Spectrum {
  std::vector<double> bin_freqs;   // k * sample_rate / n_fft
  std::vector<double> magnitudes;  // |X_k|
  double sample_rate = 0.0;
};

Spectrum magnitude_spectrum(std::span<const double> x, double sample_rate, std::size_t n_fft = 0);

// Second-order Butterworth lowpass designed with the bilinear transform.
// With K = tan(pi fc / fs) and norm = 1 / (1 + sqrt(2) K + K^2):
//   b0 = K^2 norm, b1 = 2 b0, b2 = b0,
//   a1 = 2 (K^2 - 1) norm, a2 = (1 - sqrt(2) K + K^2) norm.
// Its magnitude response is |H(f)|^2 = 1 / (1 + (tan(pi f/fs) / K)^4).
struct Biquad {
  double b0, b1, b2, a1, a2;
};

Biquad butterworth_lowpass(double cutoff_hz, double sample_rate);
double butterworth_magnitude(double freq_hz, double cutoff_hz, double sample_rate);

// Direct form II transposed pass. The state starts at the steady state for a
// constant input equal to x[0].
std::vector<double> biquad_filter(const Biquad& filter, std::span<const double> x);

// Forward-backward (zero-phase) Butterworth pass over one channel. The input
// is extended by 3 * order copies of its first and last sample before
// filtering and trimmed back afterwards; the net magnitude response is
// |H(f)|^2.
std::vector<double> filtfilt(std::span<const double> x, double cutoff_hz, double sample_rate);

// Zero-phase lowpass of every row of a [C x T] matrix.
Tensor lowpass(const Tensor& channels, double sample_rate, double cutoff_hz = 2.0);

// Share of spectral power, summed over rows of a [C x T] matrix and excluding
// the DC bin, that lies in bins strictly above cutoff. Zero input gives 0.
double high_frequency_power_ratio(const Tensor& channels, double sample_rate,
                                  double cutoff_hz = 2.0);

}  // namespace kinesynth::signal
