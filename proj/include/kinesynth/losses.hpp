#pragma once

#include <span>

#include "kinesynth/tensor.hpp"

namespace kinesynth {

inline constexpr double kProbabilityClamp = 1e-7;

struct Loss {
  double value = 0.0;
  Tensor grad;  // d value / d input, same shape as the input
};

// Mean over the batch of -log p[b, label_b]; probabilities are clamped to
// [1e-7, 1 - 1e-7] and the gradient is zero where the clamp is active.
Loss sparse_categorical_cross_entropy(const Tensor& probs, std::span<const int> labels);

// Mean of -[t log p + (1 - t) log(1 - p)] with the same clamp.
Loss binary_cross_entropy(const Tensor& probs, const Tensor& targets);

// Same objective evaluated from logits, p = sigmoid(logit), without the clamp:
// softplus form, gradient sigmoid(logit) - t. Used for adversarial training
// where saturated probabilities would otherwise zero the gradient.
Loss binary_cross_entropy_with_logits(const Tensor& logits, const Tensor& targets);

}  // namespace kinesynth
