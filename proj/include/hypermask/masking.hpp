#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hypermask/tensor.hpp"

namespace hypermask {

struct ParameterSet;

// Per-layer mask tensors matching the target parameter layout. Retained
// entries are signed tanh outputs in (-1,1); pruned entries are exactly 0.
struct SemiBinaryMask {
  std::vector<std::pair<std::string, Tensor>> layers;
  double sparsity_applied = 0.0;  // percent actually used

  Tensor flat() const;  // concatenation in layer order
};

// Ramp-up schedule for the sparsity ratio: the first task anneals from 0 to
// p over its n iterations; later tasks use p throughout.
struct SparsitySchedule {
  double p = 0.0;        // target ratio, percent
  size_t iterations = 1;  // iterations per task
  size_t task = 1;        // 1-based task index
  size_t iteration = 1;   // 1-based iteration within the task

  double effective_ratio() const {
    if (p < 0.0 || p > 100.0) throw ConfigError("sparsity p outside [0,100]");
    if (task > 1) return p;
    double r = p * static_cast<double>(iteration) /
               static_cast<double>(iterations);
    if (r < 0.0) r = 0.0;
    if (r > p) r = p;
    return r;
  }
};

// ratio-th percentile (linear interpolation between order statistics) of the
// absolute values of one mask layer. ratio == 0 means keep everything and is
// signalled by an empty optional.
std::optional<double> percentile_threshold(const Tensor& values, double ratio);

// Zero every entry with |w| <= threshold; ties at the threshold all go.
Tensor apply_threshold(const Tensor& raw, double threshold);

// Sparsify one tanh-activated mask layer at the schedule's effective ratio.
Tensor apply_sigma_p(const Tensor& raw, const SparsitySchedule& schedule);

// Elementwise product of target parameters with the mask; layouts must match.
ParameterSet modulate(const ParameterSet& target, const SemiBinaryMask& mask);

}  // namespace hypermask
