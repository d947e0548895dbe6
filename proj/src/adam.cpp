#include "kinesynth/adam.hpp"

#include <cmath>
#include <string>

#include "kinesynth/errors.hpp"

namespace kinesynth {

void validate(const AdamConfig& config) {
  if (!(config.learning_rate > 0.0)) throw ParameterError("adam: learning rate must be positive");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0)) throw ParameterError("adam: beta1 outside [0, 1)");
  if (!(config.beta2 >= 0.0 && config.beta2 < 1.0)) throw ParameterError("adam: beta2 outside [0, 1)");
  if (!(config.epsilon > 0.0)) throw ParameterError("adam: epsilon must be positive");
}

void adam_step(const ParameterList& params, const AdamConfig& config, std::size_t step) {
  if (step == 0) throw ParameterError("adam: step index is 1-based");
  validate(config);
  const double t = static_cast<double>(step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (Parameter* p : params) {
    double* value = p->value.data();
    double* grad = p->grad.data();
    double* m = p->moment1.data();
    double* v = p->moment2.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = grad[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
      grad[i] = 0.0;
    }
  }
}

}  // namespace kinesynth
