#pragma once

#include <cstddef>

#include "kinesynth/layers.hpp"

namespace kinesynth {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void validate(const AdamConfig& config);

// One bias-corrected Adam update at step t (1-based); zeroes the gradients.
void adam_step(const ParameterList& params, const AdamConfig& config, std::size_t step);

// Keeps the step counter for a fixed parameter set.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) { validate(config_); }

  void step(const ParameterList& params) { adam_step(params, config_, ++step_); }
  std::size_t steps_taken() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  AdamConfig config_;
  std::size_t step_ = 0;
};

}  // namespace kinesynth
