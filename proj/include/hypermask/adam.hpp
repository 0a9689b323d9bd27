#pragma once

#include <vector>

#include "hypermask/tensor.hpp"

namespace hypermask {

// Bias-corrected Adam over one flat tensor. Moments are zero-initialized;
// the step counter is per-state.
struct AdamState {
  Tensor m;  // first moment
  Tensor v;  // second moment
  size_t step = 0;

  static AdamState for_shape(const std::vector<size_t>& shape) {
    return AdamState{Tensor::zeros(shape), Tensor::zeros(shape), 0};
  }
};

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(Tensor& param, const Tensor& grad, AdamState& state,
               const AdamHyper& hp);

}  // namespace hypermask
