#include "hypermask/masking.hpp"

#include <algorithm>
#include <cmath>

#include "hypermask/networks.hpp"

namespace hypermask {

Tensor SemiBinaryMask::flat() const {
  size_t total = 0;
  for (const auto& [name, t] : layers) total += t.size();
  Tensor out = Tensor::zeros({total});
  size_t off = 0;
  for (const auto& [name, t] : layers) {
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + off);
    off += t.size();
  }
  return out;
}

std::optional<double> percentile_threshold(const Tensor& values, double ratio) {
  if (values.empty()) throw ContractError("percentile_threshold: empty layer");
  if (ratio < 0.0 || ratio > 100.0)
    throw ContractError("percentile_threshold: ratio outside [0,100]");
  if (ratio == 0.0) return std::nullopt;  // KEEP_ALL
  std::vector<double> mags(values.data.size());
  for (size_t i = 0; i < mags.size(); ++i) mags[i] = std::fabs(values.data[i]);
  std::sort(mags.begin(), mags.end());
  size_t n = mags.size();
  if (n == 1) return mags[0];
  double rank = ratio / 100.0 * static_cast<double>(n - 1);
  size_t lo = static_cast<size_t>(rank);
  if (lo >= n - 1) return mags[n - 1];
  double frac = rank - static_cast<double>(lo);
  return mags[lo] + frac * (mags[lo + 1] - mags[lo]);
}

Tensor apply_threshold(const Tensor& raw, double threshold) {
  Tensor out = raw;
  for (double& v : out.data)
    if (std::fabs(v) <= threshold) v = 0.0;
  return out;
}

Tensor apply_sigma_p(const Tensor& raw, const SparsitySchedule& schedule) {
  auto c = percentile_threshold(raw, schedule.effective_ratio());
  if (!c) return raw;
  return apply_threshold(raw, *c);
}

ParameterSet modulate(const ParameterSet& target, const SemiBinaryMask& mask) {
  if (target.items.size() != mask.layers.size())
    throw ShapeError("modulate: layer count mismatch");
  ParameterSet out;
  out.items.reserve(target.items.size());
  for (size_t i = 0; i < target.items.size(); ++i) {
    const auto& [tname, tv] = target.items[i];
    const auto& [mname, mv] = mask.layers[i];
    if (tname != mname || !tv.same_shape(mv))
      throw ShapeError("modulate: layout mismatch at " + tname);
    Tensor prod = tv;
    for (size_t j = 0; j < prod.size(); ++j) prod.data[j] *= mv.data[j];
    out.items.emplace_back(tname, std::move(prod));
  }
  return out;
}

}  // namespace hypermask
