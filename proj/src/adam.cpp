#include "spikeforge/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace spikeforge {

void adam_step(AdamState& state, Tensor& param, const Tensor& grad) {
  if (!param.same_shape(grad))
    throw std::invalid_argument("adam_step: param/grad shape mismatch " + param.shape_str() +
                                " vs " + grad.shape_str());
  if (state.m.data.empty()) {
    state.m = Tensor::zeros(param.shape);
    state.v = Tensor::zeros(param.shape);
  } else if (!state.m.same_shape(param)) {
    throw std::invalid_argument("adam_step: moment/param shape mismatch");
  }
  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (int64_t i = 0; i < param.numel(); ++i) {
    double g = grad[i];
    double m = b1 * state.m[i] + (1.0 - b1) * g;
    double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    double update = state.lr * (m / c1) / (std::sqrt(v / c2) + state.epsilon);
    param[i] = static_cast<float>(param[i] - update);
  }
}

}  // namespace spikeforge
