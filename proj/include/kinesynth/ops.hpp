#pragma once

// Differentiable primitives as free functions. Each *_forward computes the
// output; each *_backward takes the cached forward operands plus the upstream
// gradient, accumulates parameter gradients into the given buffers and
// returns the gradient with respect to the input.

#include <cstddef>
#include <vector>

#include "kinesynth/rng.hpp"
#include "kinesynth/tensor.hpp"

namespace kinesynth {

enum class Padding { Same, Valid };

// x[B x I] . W[I x O] + b[O]
Tensor dense_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor dense_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                      Tensor& grad_weight, Tensor& grad_bias);

// Cross-correlation of x[B x C x T] with kernels[F x C x K]. "Same" pads
// (K-1)/2 zeros on the left and the remainder on the right.
Tensor conv1d_forward(const Tensor& x, const Tensor& kernels, const Tensor& bias, Padding padding);
// Returns an empty tensor when need_input_grad is false.
Tensor conv1d_backward(const Tensor& x, const Tensor& kernels, const Tensor& grad_out,
                       Padding padding, Tensor& grad_kernels, Tensor& grad_bias,
                       bool need_input_grad = true);
std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, Padding padding);

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};
// Non-overlapping max over windows of the last axis of x[B x C x T];
// T mod window trailing samples are dropped. Ties go to the earliest sample.
PoolResult maxpool1d_forward(const Tensor& x, std::size_t window);
Tensor maxpool1d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const Shape& input_shape);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor leaky_relu_backward(const Tensor& x, const Tensor& grad_out, double slope);
Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out);

// Softmax over the last axis with max subtraction.
Tensor softmax(const Tensor& x);
Tensor softmax_backward(const Tensor& y, const Tensor& grad_out);

struct DropoutResult {
  Tensor output;
  Tensor mask;  // 0 or 1/(1-p) per element
};
// Inverted dropout. In inference mode (training == false) the mask is all ones.
DropoutResult dropout_forward(const Tensor& x, double rate, SeededRng& rng, bool training);
Tensor dropout_backward(const Tensor& mask, const Tensor& grad_out);

// Nearest-neighbour repeat of each time step of x[B x C x T] `factor` times.
Tensor upsample1d_forward(const Tensor& x, std::size_t factor);
Tensor upsample1d_backward(const Tensor& grad_out, std::size_t factor);

// Minibatch discrimination over features[B x A] with projection
// T[A x (kernels * kernel_dim)]. Output is [B x (A + kernels)]: the input
// features followed by o_b(x_i) = sum_{j != i} exp(-|M_{i,b} - M_{j,b}|_1).
struct MinibatchResult {
  Tensor output;
  Tensor projected;  // M, [B x kernels x kernel_dim]
};
MinibatchResult minibatch_discrimination_forward(const Tensor& features, const Tensor& projection,
                                                 std::size_t kernels, std::size_t kernel_dim);
Tensor minibatch_discrimination_backward(const Tensor& features, const Tensor& projection,
                                         const MinibatchResult& forward, const Tensor& grad_out,
                                         Tensor& grad_projection);

}  // namespace kinesynth
