#include "kinesynth/layers.hpp"

#include <cmath>

#include "kinesynth/errors.hpp"

namespace kinesynth {

Parameter::Parameter(std::string name_, Tensor init)
    : name(std::move(name_)),
      value(std::move(init)),
      grad(value.shape()),
      moment1(value.shape()),
      moment2(value.shape()) {}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t total = 0;
  for (const Parameter* p : params) total += p->value.size();
  return total;
}

void zero_grads(const ParameterList& params) {
  for (Parameter* p : params) p->zero_grad();
}

Tensor init_uniform(const Shape& shape, std::size_t fan_in, SeededRng& rng) {
  Tensor t(shape);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Dense::Dense(const std::string& name, std::size_t in, std::size_t out, SeededRng& rng)
    : weight(name + ".weight", init_uniform({in, out}, in, rng)),
      bias(name + ".bias", Tensor({out})) {}

Tensor Dense::forward(const Tensor& x) {
  input_ = x;
  return dense_forward(x, weight.value, bias.value);
}

Tensor Dense::backward(const Tensor& grad_out) {
  return dense_backward(input_, weight.value, grad_out, weight.grad, bias.grad);
}

Conv1d::Conv1d(const std::string& name, std::size_t in_channels, std::size_t filters,
               std::size_t kernel, Padding padding_, SeededRng& rng)
    : kernels(name + ".kernels",
              init_uniform({filters, in_channels, kernel}, in_channels * kernel, rng)),
      bias(name + ".bias", Tensor({filters})),
      padding(padding_) {}

Tensor Conv1d::forward(const Tensor& x) {
  input_ = x;
  return conv1d_forward(x, kernels.value, bias.value, padding);
}

Tensor Conv1d::backward(const Tensor& grad_out, bool need_input_grad) {
  return conv1d_backward(input_, kernels.value, grad_out, padding, kernels.grad, bias.grad,
                         need_input_grad);
}

Tensor MaxPool1d::forward(const Tensor& x) {
  input_shape_ = x.shape();
  PoolResult r = maxpool1d_forward(x, window_);
  argmax_ = std::move(r.argmax);
  return std::move(r.output);
}

Tensor MaxPool1d::backward(const Tensor& grad_out) const {
  return maxpool1d_backward(grad_out, argmax_, input_shape_);
}

Tensor LeakyRelu::forward(const Tensor& x) {
  input_ = x;
  return leaky_relu(x, slope_);
}

Tensor LeakyRelu::backward(const Tensor& grad_out) const {
  return leaky_relu_backward(input_, grad_out, slope_);
}

Tensor Softmax::forward(const Tensor& x) {
  output_ = softmax(x);
  return output_;
}

Tensor Softmax::backward(const Tensor& grad_out) const { return softmax_backward(output_, grad_out); }

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout: rate " + std::to_string(rate) + " outside [0, 1)");
  }
}

Tensor Dropout::forward(const Tensor& x, SeededRng& rng, bool training) {
  DropoutResult r = dropout_forward(x, rate_, rng, training);
  mask_ = std::move(r.mask);
  return std::move(r.output);
}

Tensor Dropout::backward(const Tensor& grad_out) const { return dropout_backward(mask_, grad_out); }

MinibatchDiscrimination::MinibatchDiscrimination(const std::string& name, std::size_t in_features,
                                                 std::size_t kernels, std::size_t kernel_dim,
                                                 SeededRng& rng)
    : projection(name + ".projection",
                 init_uniform({in_features, kernels * kernel_dim}, in_features, rng)),
      in_features_(in_features),
      kernels_(kernels),
      kernel_dim_(kernel_dim) {}

Tensor MinibatchDiscrimination::forward(const Tensor& features) {
  input_ = features;
  cache_ = minibatch_discrimination_forward(features, projection.value, kernels_, kernel_dim_);
  return cache_.output;
}

Tensor MinibatchDiscrimination::backward(const Tensor& grad_out) {
  return minibatch_discrimination_backward(input_, projection.value, cache_, grad_out,
                                           projection.grad);
}

}  // namespace kinesynth
