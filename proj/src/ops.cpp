#include "kinesynth/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "kinesynth/errors.hpp"

namespace kinesynth {

namespace {

// y[0..n) += a * x[0..n)
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Four partial sums so the compiler can vectorise without reassociating.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline bool all_zero(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] != 0.0) return false;
  }
  return true;
}

// dst[0..n) = zeros with src[0..len) placed at offset `left`.
inline void pad_copy(const double* src, std::size_t len, std::size_t left, double* dst, std::size_t n) {
  std::fill(dst, dst + n, 0.0);
  std::copy_n(src, std::min(len, n - left), dst + left);
}

using Lane4 = double __attribute__((vector_size(32)));

inline Lane4 load4(const double* p) {
  Lane4 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

// out[t] += sum_k w[k] * in[t + k] for t in [0, n); `in` holds n + K - 1 values.
template <std::size_t K>
void correlate_fixed(const double* w, const double* in, double* out, std::size_t n) {
  double wk[K];
  std::copy_n(w, K, wk);
  std::size_t t = 0;
  for (; t + 4 <= n; t += 4) {
    Lane4 acc = load4(out + t);
    for (std::size_t k = 0; k < K; ++k) acc += wk[k] * load4(in + t + k);
    std::memcpy(out + t, &acc, sizeof acc);
  }
  for (; t < n; ++t) {
    double acc = out[t];
    for (std::size_t k = 0; k < K; ++k) acc += wk[k] * in[t + k];
    out[t] = acc;
  }
}

void correlate(const double* w, std::size_t width, const double* in, double* out, std::size_t n) {
  switch (width) {
    case 1: return correlate_fixed<1>(w, in, out, n);
    case 2: return correlate_fixed<2>(w, in, out, n);
    case 3: return correlate_fixed<3>(w, in, out, n);
    case 4: return correlate_fixed<4>(w, in, out, n);
    case 5: return correlate_fixed<5>(w, in, out, n);
    case 6: return correlate_fixed<6>(w, in, out, n);
    case 7: return correlate_fixed<7>(w, in, out, n);
    case 9: return correlate_fixed<9>(w, in, out, n);
    default:
      for (std::size_t k = 0; k < width; ++k) axpy(w[k], in + k, out, n);
  }
}

// gw[k] += sum_t g[t] * in[t + k] for k < K, t < n, four time steps per
// vector accumulator.
template <std::size_t K>
void kernel_grad_fixed(const double* g, const double* in, double* gw, std::size_t n) {
  Lane4 acc[K] = {};
  std::size_t t = 0;
  for (; t + 4 <= n; t += 4) {
    const Lane4 gv = load4(g + t);
    for (std::size_t k = 0; k < K; ++k) acc[k] += gv * load4(in + t + k);
  }
  for (std::size_t k = 0; k < K; ++k) {
    double s = (acc[k][0] + acc[k][1]) + (acc[k][2] + acc[k][3]);
    for (std::size_t u = t; u < n; ++u) s += g[u] * in[u + k];
    gw[k] += s;
  }
}

void kernel_grad(const double* g, const double* in, double* gw, std::size_t width, std::size_t n) {
  switch (width) {
    case 1: return kernel_grad_fixed<1>(g, in, gw, n);
    case 2: return kernel_grad_fixed<2>(g, in, gw, n);
    case 3: return kernel_grad_fixed<3>(g, in, gw, n);
    case 4: return kernel_grad_fixed<4>(g, in, gw, n);
    case 5: return kernel_grad_fixed<5>(g, in, gw, n);
    case 6: return kernel_grad_fixed<6>(g, in, gw, n);
    case 7: return kernel_grad_fixed<7>(g, in, gw, n);
    case 9: return kernel_grad_fixed<9>(g, in, gw, n);
    default:
      for (std::size_t k = 0; k < width; ++k) gw[k] += dot(g, in + k, n);
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape " + shape_to_string(a.shape()) +
                         " does not match " + shape_to_string(b.shape()));
  }
}

std::size_t left_pad(std::size_t kernel, Padding padding) {
  return padding == Padding::Same ? (kernel - 1) / 2 : 0;
}

}  // namespace

Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "dense input");
  require_rank(weight, 2, "dense weights");
  require_rank(bias, 1, "dense bias");
  const std::size_t batch = x.dim(0), in = x.dim(1), out = weight.dim(1);
  if (weight.dim(0) != in) {
    throw DimensionError("dense: input axis 1 has " + std::to_string(in) +
                         " features but weights axis 0 has " + std::to_string(weight.dim(0)));
  }
  if (bias.dim(0) != out) {
    throw DimensionError("dense: weights axis 1 has " + std::to_string(out) +
                         " outputs but bias axis 0 has " + std::to_string(bias.dim(0)));
  }
  Tensor y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = y.data() + b * out;
    std::copy(bias.data(), bias.data() + out, row);
    const double* xb = x.data() + b * in;
    for (std::size_t i = 0; i < in; ++i) {
      if (xb[i] != 0.0) axpy(xb[i], weight.data() + i * out, row, out);
    }
  }
  return y;
}

Tensor dense_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                      Tensor& grad_weight, Tensor& grad_bias) {
  const std::size_t batch = x.dim(0), in = x.dim(1), out = weight.dim(1);
  if (grad_out.rank() != 2 || grad_out.dim(0) != batch || grad_out.dim(1) != out) {
    throw DimensionError("dense backward: gradient shape " + shape_to_string(grad_out.shape()) +
                         " does not match output [" + std::to_string(batch) + "x" +
                         std::to_string(out) + "]");
  }
  require_same_shape(grad_weight, weight, "dense weight gradient");
  Tensor grad_x({batch, in});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* g = grad_out.data() + b * out;
    axpy(1.0, g, grad_bias.data(), out);
    const double* xb = x.data() + b * in;
    double* gx = grad_x.data() + b * in;
    for (std::size_t i = 0; i < in; ++i) {
      if (xb[i] != 0.0) axpy(xb[i], g, grad_weight.data() + i * out, out);
      gx[i] = dot(weight.data() + i * out, g, out);
    }
  }
  return grad_x;
}

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, Padding padding) {
  if (padding == Padding::Same) return length;
  if (kernel > length) {
    throw DimensionError("conv1d: kernel length " + std::to_string(kernel) +
                         " exceeds input time axis " + std::to_string(length));
  }
  return length - kernel + 1;
}

Tensor conv1d_forward(const Tensor& x, const Tensor& kernels, const Tensor& bias, Padding padding) {
  require_rank(x, 3, "conv1d input");
  require_rank(kernels, 3, "conv1d kernels");
  require_rank(bias, 1, "conv1d bias");
  const std::size_t batch = x.dim(0), channels = x.dim(1), length = x.dim(2);
  const std::size_t filters = kernels.dim(0), width = kernels.dim(2);
  if (kernels.dim(1) != channels) {
    throw DimensionError("conv1d: input axis 1 has " + std::to_string(channels) +
                         " channels but kernels axis 1 has " + std::to_string(kernels.dim(1)));
  }
  if (bias.dim(0) != filters) {
    throw DimensionError("conv1d: kernels axis 0 has " + std::to_string(filters) +
                         " filters but bias axis 0 has " + std::to_string(bias.dim(0)));
  }
  const std::size_t out_len = conv1d_output_length(length, width, padding);
  const std::size_t pad = left_pad(width, padding);
  const std::size_t padded = out_len + width - 1;
  Tensor y({batch, filters, out_len});
  std::vector<char> live(channels);
  std::vector<double> xpad(channels * padded);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double* in = x.data() + (b * channels + c) * length;
      live[c] = !all_zero(in, length);
      if (live[c]) pad_copy(in, length, pad, xpad.data() + c * padded, padded);
    }
    for (std::size_t f = 0; f < filters; ++f) {
      double* row = y.data() + (b * filters + f) * out_len;
      std::fill(row, row + out_len, bias[f]);
      for (std::size_t c = 0; c < channels; ++c) {
        if (!live[c]) continue;
        correlate(kernels.data() + (f * channels + c) * width, width, xpad.data() + c * padded, row, out_len);
      }
    }
  }
  return y;
}

Tensor conv1d_backward(const Tensor& x, const Tensor& kernels, const Tensor& grad_out,
                       Padding padding, Tensor& grad_kernels, Tensor& grad_bias,
                       bool need_input_grad) {
  const std::size_t batch = x.dim(0), channels = x.dim(1), length = x.dim(2);
  const std::size_t filters = kernels.dim(0), width = kernels.dim(2);
  const std::size_t out_len = conv1d_output_length(length, width, padding);
  if (grad_out.shape() != Shape{batch, filters, out_len}) {
    throw DimensionError("conv1d backward: gradient shape " + shape_to_string(grad_out.shape()) +
                         " does not match output");
  }
  require_same_shape(grad_kernels, kernels, "conv1d kernel gradient");
  const std::size_t pad = left_pad(width, padding);
  const std::size_t padded = out_len + width - 1;
  Tensor grad_x;
  if (need_input_grad) grad_x = Tensor(x.shape());

  // Kernels reversed along time: the input gradient is a correlation of the
  // zero-extended output gradient with the flipped kernel.
  std::vector<double> flipped;
  if (need_input_grad) {
    flipped.resize(kernels.size());
    for (std::size_t fc = 0; fc < filters * channels; ++fc) {
      for (std::size_t k = 0; k < width; ++k) flipped[fc * width + k] = kernels[fc * width + width - 1 - k];
    }
  }
  std::vector<char> live(channels);
  std::vector<double> xpad(channels * padded);
  std::vector<double> gext(out_len + 2 * (width - 1));
  std::vector<double> gxpad(need_input_grad ? channels * padded : 0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double* in = x.data() + (b * channels + c) * length;
      live[c] = !all_zero(in, length);
      if (live[c]) pad_copy(in, length, pad, xpad.data() + c * padded, padded);
    }
    std::fill(gxpad.begin(), gxpad.end(), 0.0);
    for (std::size_t f = 0; f < filters; ++f) {
      const double* g = grad_out.data() + (b * filters + f) * out_len;
      double gsum = 0.0;
      for (std::size_t t = 0; t < out_len; ++t) gsum += g[t];
      grad_bias[f] += gsum;
      for (std::size_t c = 0; c < channels; ++c) {
        if (!live[c]) continue;
        kernel_grad(g, xpad.data() + c * padded, grad_kernels.data() + (f * channels + c) * width, width, out_len);
      }
      if (!need_input_grad) continue;
      pad_copy(g, out_len, width - 1, gext.data(), gext.size());
      for (std::size_t c = 0; c < channels; ++c) {
        correlate(flipped.data() + (f * channels + c) * width, width, gext.data(), gxpad.data() + c * padded, padded);
      }
    }
    if (!need_input_grad) continue;
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(gxpad.data() + c * padded + pad, length, grad_x.data() + (b * channels + c) * length);
    }
  }
  return grad_x;
}

PoolResult maxpool1d_forward(const Tensor& x, std::size_t window) {
  if (window == 0) throw ParameterError("maxpool1d: window must be positive");
  require_rank(x, 3, "maxpool1d input");
  const std::size_t batch = x.dim(0), channels = x.dim(1), length = x.dim(2);
  const std::size_t out_len = length / window;
  if (out_len == 0) {
    throw DimensionError("maxpool1d: window " + std::to_string(window) +
                         " longer than time axis " + std::to_string(length));
  }
  PoolResult result{Tensor({batch, channels, out_len}), {}};
  result.argmax.resize(result.output.size());
  for (std::size_t row = 0; row < batch * channels; ++row) {
    const std::size_t base = row * length;
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = base + t * window;
      for (std::size_t w = 1; w < window; ++w) {
        const std::size_t idx = base + t * window + w;
        if (x[idx] > x[best]) best = idx;
      }
      result.output[row * out_len + t] = x[best];
      result.argmax[row * out_len + t] = best;
    }
  }
  return result;
}

Tensor maxpool1d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const Shape& input_shape) {
  if (grad_out.size() != argmax.size()) {
    throw DimensionError("maxpool1d backward: gradient has " + std::to_string(grad_out.size()) +
                         " elements but " + std::to_string(argmax.size()) + " were pooled");
  }
  Tensor grad_x(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) grad_x[argmax[i]] += grad_out[i];
  return grad_x;
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  return leaky_relu_backward(x, grad_out, 0.0);
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : slope * v;
  return y;
}

Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out, double slope) {
  require_same_shape(x, grad_out, "leaky_relu backward");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(x[i] > 0.0)) g[i] *= slope;
  }
  return g;
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
  require_same_shape(y, grad_out, "sigmoid backward");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
  return g;
}

Tensor softmax(const Tensor& x) {
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  Tensor y = x;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = y.data() + r * width;
    const double peak = *std::max_element(row, row + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      row[j] = std::exp(row[j] - peak);
      total += row[j];
    }
    for (std::size_t j = 0; j < width; ++j) row[j] /= total;
  }
  return y;
}

Tensor softmax_backward(const Tensor& y, const Tensor& grad_out) {
  require_same_shape(y, grad_out, "softmax backward");
  const std::size_t width = y.shape().back();
  const std::size_t rows = y.size() / width;
  Tensor g(y.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* yr = y.data() + r * width;
    const double* gr = grad_out.data() + r * width;
    const double inner = dot(yr, gr, width);
    double* out = g.data() + r * width;
    for (std::size_t j = 0; j < width; ++j) out[j] = yr[j] * (gr[j] - inner);
  }
  return g;
}

DropoutResult dropout_forward(const Tensor& x, double rate, SeededRng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout: rate " + std::to_string(rate) + " outside [0, 1)");
  }
  DropoutResult result{x, Tensor(x.shape(), 1.0)};
  if (!training || rate == 0.0) return result;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = rng.uniform() < rate ? 0.0 : keep_scale;
    result.mask[i] = m;
    result.output[i] = x[i] * m;
  }
  return result;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& grad_out) {
  require_same_shape(mask, grad_out, "dropout backward");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
  return g;
}

Tensor upsample1d_forward(const Tensor& x, std::size_t factor) {
  if (factor == 0) throw ParameterError("upsample1d: factor must be positive");
  require_rank(x, 3, "upsample1d input");
  const std::size_t rows = x.dim(0) * x.dim(1), length = x.dim(2);
  Tensor y({x.dim(0), x.dim(1), length * factor});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * length;
    double* out = y.data() + r * length * factor;
    for (std::size_t t = 0; t < length; ++t) {
      std::fill(out + t * factor, out + (t + 1) * factor, in[t]);
    }
  }
  return y;
}

Tensor upsample1d_backward(const Tensor& grad_out, std::size_t factor) {
  require_rank(grad_out, 3, "upsample1d gradient");
  const std::size_t rows = grad_out.dim(0) * grad_out.dim(1);
  const std::size_t length = grad_out.dim(2) / factor;
  Tensor g({grad_out.dim(0), grad_out.dim(1), length});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = grad_out.data() + r * length * factor;
    for (std::size_t t = 0; t < length; ++t) {
      double s = 0.0;
      for (std::size_t k = 0; k < factor; ++k) s += in[t * factor + k];
      g[r * length + t] = s;
    }
  }
  return g;
}

MinibatchResult minibatch_discrimination_forward(const Tensor& features, const Tensor& projection,
                                                 std::size_t kernels, std::size_t kernel_dim) {
  require_rank(features, 2, "minibatch features");
  require_rank(projection, 2, "minibatch projection");
  const std::size_t batch = features.dim(0), width = features.dim(1);
  if (batch < 2) {
    throw DimensionError("minibatch discrimination needs at least 2 samples, got " +
                         std::to_string(batch));
  }
  if (projection.dim(0) != width || projection.dim(1) != kernels * kernel_dim) {
    throw DimensionError("minibatch projection shape " + shape_to_string(projection.shape()) +
                         " does not match [" + std::to_string(width) + "x" +
                         std::to_string(kernels * kernel_dim) + "]");
  }
  const Tensor zero_bias({kernels * kernel_dim});
  MinibatchResult result;
  result.projected = dense_forward(features, projection, zero_bias);
  result.projected.reshape({batch, kernels, kernel_dim});
  result.output = Tensor({batch, width + kernels});
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy(features.data() + i * width, features.data() + (i + 1) * width,
              result.output.data() + i * (width + kernels));
  }
  const double* m = result.projected.data();
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = i + 1; j < batch; ++j) {
      for (std::size_t b = 0; b < kernels; ++b) {
        const double* mi = m + (i * kernels + b) * kernel_dim;
        const double* mj = m + (j * kernels + b) * kernel_dim;
        double l1 = 0.0;
        for (std::size_t c = 0; c < kernel_dim; ++c) l1 += std::abs(mi[c] - mj[c]);
        const double e = std::exp(-l1);
        result.output.at(i, width + b) += e;
        result.output.at(j, width + b) += e;
      }
    }
  }
  return result;
}

Tensor minibatch_discrimination_backward(const Tensor& features, const Tensor& projection,
                                         const MinibatchResult& forward, const Tensor& grad_out,
                                         Tensor& grad_projection) {
  const std::size_t batch = features.dim(0), width = features.dim(1);
  const std::size_t kernels = forward.projected.dim(1), kernel_dim = forward.projected.dim(2);
  if (grad_out.shape() != Shape{batch, width + kernels}) {
    throw DimensionError("minibatch backward: gradient shape " +
                         shape_to_string(grad_out.shape()) + " does not match output");
  }
  Tensor grad_m({batch, kernels * kernel_dim});
  const double* m = forward.projected.data();
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = i + 1; j < batch; ++j) {
      for (std::size_t b = 0; b < kernels; ++b) {
        const double* mi = m + (i * kernels + b) * kernel_dim;
        const double* mj = m + (j * kernels + b) * kernel_dim;
        double l1 = 0.0;
        for (std::size_t c = 0; c < kernel_dim; ++c) l1 += std::abs(mi[c] - mj[c]);
        // e_ij appears in both o_i and o_j.
        const double coeff =
            std::exp(-l1) * (grad_out.at(i, width + b) + grad_out.at(j, width + b));
        double* gi = grad_m.data() + i * kernels * kernel_dim + b * kernel_dim;
        double* gj = grad_m.data() + j * kernels * kernel_dim + b * kernel_dim;
        for (std::size_t c = 0; c < kernel_dim; ++c) {
          const double diff = mi[c] - mj[c];
          const double sign = (diff > 0.0) - (diff < 0.0);
          gi[c] -= coeff * sign;
          gj[c] += coeff * sign;
        }
      }
    }
  }
  Tensor unused_bias({kernels * kernel_dim});
  Tensor grad_features = dense_backward(features, projection, grad_m, grad_projection, unused_bias);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t a = 0; a < width; ++a) grad_features.at(i, a) += grad_out.at(i, a);
  }
  return grad_features;
}

}  // namespace kinesynth
