#include <cmath>

#include "cogload/error.hpp"
#include "cogload/trainer.hpp"

namespace cogload::cnn {

void adam_step(std::span<float> weights, std::span<const float> grad, AdamState& state,
               double learning_rate, const AdamConfig& config) {
  if (grad.size() != weights.size() || state.m.size() != weights.size() ||
      state.v.size() != weights.size()) {
    throw ShapeError("adam_step: weights, gradient and moments differ in size");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NonFiniteError("non-finite gradient at parameter " + std::to_string(i));
    }
  }

  const auto t = static_cast<double>(++state.step);
  const double b1 = config.beta1, b2 = config.beta2;
  const double alpha = learning_rate * std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double g = grad[i];
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    weights[i] = static_cast<float>(weights[i] - alpha * m / (std::sqrt(v) + config.epsilon));
  }
}

}  // namespace cogload::cnn
