#include "kinesynth/losses.hpp"

#include <cmath>
#include <string>

#include "kinesynth/errors.hpp"

namespace kinesynth {

namespace {

double clamp_probability(double p, bool& clamped) {
  clamped = true;
  if (p < kProbabilityClamp) return kProbabilityClamp;
  if (p > 1.0 - kProbabilityClamp) return 1.0 - kProbabilityClamp;
  clamped = false;
  return p;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

Loss sparse_categorical_cross_entropy(const Tensor& probs, std::span<const int> labels) {
  require_rank(probs, 2, "cross-entropy probabilities");
  const std::size_t batch = probs.dim(0), classes = probs.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("cross-entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
  }
  Loss loss{0.0, Tensor(probs.shape())};
  const double scale = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw IndexError("cross-entropy: label " + std::to_string(label) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    bool clamped = false;
    const double p = clamp_probability(probs.at(b, static_cast<std::size_t>(label)), clamped);
    loss.value -= std::log(p) * scale;
    if (!clamped) loss.grad.at(b, static_cast<std::size_t>(label)) = -scale / p;
  }
  return loss;
}

Loss binary_cross_entropy(const Tensor& probs, const Tensor& targets) {
  if (!probs.same_shape(targets)) {
    throw DimensionError("binary cross-entropy: " + shape_to_string(probs.shape()) + " vs " +
                         shape_to_string(targets.shape()));
  }
  Loss loss{0.0, Tensor(probs.shape())};
  const double scale = 1.0 / static_cast<double>(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    bool clamped = false;
    const double p = clamp_probability(probs[i], clamped);
    const double t = targets[i];
    loss.value -= (t * std::log(p) + (1.0 - t) * std::log(1.0 - p)) * scale;
    if (!clamped) loss.grad[i] = (-t / p + (1.0 - t) / (1.0 - p)) * scale;
  }
  return loss;
}

Loss binary_cross_entropy_with_logits(const Tensor& logits, const Tensor& targets) {
  if (!logits.same_shape(targets)) {
    throw DimensionError("binary cross-entropy: " + shape_to_string(logits.shape()) + " vs " +
                         shape_to_string(targets.shape()));
  }
  Loss loss{0.0, Tensor(logits.shape())};
  const double scale = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double t = targets[i];
    // -t log s(z) - (1-t) log(1 - s(z)) = t softplus(-z) + (1-t) softplus(z)
    loss.value += (t * softplus(-z) + (1.0 - t) * softplus(z)) * scale;
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    loss.grad[i] = (s - t) * scale;
  }
  return loss;
}

}  // namespace kinesynth
