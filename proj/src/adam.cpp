#include "hypermask/adam.hpp"

#include <cmath>

namespace hypermask {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state,
               const AdamHyper& hp) {
  if (!param.same_shape(grad) || !param.same_shape(state.m))
    throw ShapeError("adam_step: shape mismatch");
  state.step++;
  double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < param.size(); ++i) {
    double g = grad.data[i];
    double m = state.m.data[i] = hp.beta1 * state.m.data[i] + (1.0 - hp.beta1) * g;
    double v = state.v.data[i] = hp.beta2 * state.v.data[i] + (1.0 - hp.beta2) * g * g;
    param.data[i] -= hp.lr * (m / c1) / (std::sqrt(v / c2) + hp.eps);
  }
}

}  // namespace hypermask
