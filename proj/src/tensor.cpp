#include "hypermask/tensor.hpp"

#include <cmath>

namespace hypermask {

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace hypermask
