#pragma once

#include <cstdint>

#include "spikeforge/tensor.hpp"

namespace spikeforge {

struct AdamState {
  int64_t step = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Tensor m;  // first moment, sized to the parameter on first use
  Tensor v;  // second moment
};

// Standard bias-corrected Adam update, applied in place.
void adam_step(AdamState& state, Tensor& param, const Tensor& grad);

}  // namespace spikeforge
