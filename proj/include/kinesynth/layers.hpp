#pragma once

// Stateful layer wrappers over the primitives in ops.hpp. Every layer caches
// what its backward pass needs during forward(); calling backward() consumes
// the most recent forward() on that layer instance.

#include <cstddef>
#include <string>
#include <vector>

#include "kinesynth/ops.hpp"
#include "kinesynth/rng.hpp"
#include "kinesynth/tensor.hpp"

namespace kinesynth {

// A learnable tensor with its gradient buffer and Adam moments.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor moment1;
  Tensor moment2;

  Parameter() = default;
  Parameter(std::string name, Tensor init);

  void zero_grad() { grad.zero(); }
};

using ParameterList = std::vector<Parameter*>;

std::size_t parameter_count(const ParameterList& params);
void zero_grads(const ParameterList& params);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_uniform(const Shape& shape, std::size_t fan_in, SeededRng& rng);

class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::size_t in, std::size_t out, SeededRng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void append_parameters(ParameterList& out) { out.push_back(&weight); out.push_back(&bias); }

  Parameter weight;
  Parameter bias;

 private:
  Tensor input_;
};

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, std::size_t in_channels, std::size_t filters,
         std::size_t kernel, Padding padding, SeededRng& rng);

  Tensor forward(const Tensor& x);
  // Skips the input gradient (returns an empty tensor) for leading layers.
  Tensor backward(const Tensor& grad_out, bool need_input_grad = true);
  void append_parameters(ParameterList& out) { out.push_back(&kernels); out.push_back(&bias); }

  Parameter kernels;
  Parameter bias;
  Padding padding = Padding::Same;

 private:
  Tensor input_;
};

class MaxPool1d {
 public:
  explicit MaxPool1d(std::size_t window = 2) : window_(window) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::size_t window_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

// slope 0 gives a plain ReLU.
class LeakyRelu {
 public:
  explicit LeakyRelu(double slope = 0.0) : slope_(slope) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  double slope_;
  Tensor input_;
};

class Softmax {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Tensor output_;
};

class Dropout {
 public:
  explicit Dropout(double rate = 0.5);
  Tensor forward(const Tensor& x, SeededRng& rng, bool training);
  Tensor backward(const Tensor& grad_out) const;
  double rate() const noexcept { return rate_; }

 private:
  double rate_;
  Tensor mask_;
};

class Upsample1d {
 public:
  explicit Upsample1d(std::size_t factor = 1) : factor_(factor) {}
  Tensor forward(const Tensor& x) const { return upsample1d_forward(x, factor_); }
  Tensor backward(const Tensor& grad_out) const { return upsample1d_backward(grad_out, factor_); }

 private:
  std::size_t factor_;
};

class MinibatchDiscrimination {
 public:
  MinibatchDiscrimination() = default;
  MinibatchDiscrimination(const std::string& name, std::size_t in_features, std::size_t kernels,
                          std::size_t kernel_dim, SeededRng& rng);

  Tensor forward(const Tensor& features);
  Tensor backward(const Tensor& grad_out);
  void append_parameters(ParameterList& out) { out.push_back(&projection); }
  std::size_t output_width() const noexcept { return in_features_ + kernels_; }

  Parameter projection;

 private:
  std::size_t in_features_ = 0;
  std::size_t kernels_ = 0;
  std::size_t kernel_dim_ = 0;
  Tensor input_;
  MinibatchResult cache_;
};

}  // namespace kinesynth
