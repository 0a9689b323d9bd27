#include "hypermask/metrics.hpp"

#include <cmath>
#include <sstream>

namespace hypermask {

std::string AccuracyMatrix::to_csv() const {
  std::ostringstream out;
  out << "after_task";
  for (size_t i = 0; i < tasks(); ++i) out << ", task_" << (i + 1);
  out << "\n";
  out.precision(17);
  for (size_t j = 0; j < tasks(); ++j) {
    out << (j + 1);
    for (size_t i = 0; i < tasks(); ++i) {
      out << ", ";
      if (i < rows[j].size()) out << rows[j][i];
    }
    out << "\n";
  }
  return out.str();
}

double backward_transfer(const AccuracyMatrix& a) {
  size_t T = a.tasks();
  if (T < 2) throw ContractError("backward_transfer: needs at least 2 tasks");
  double s = 0.0;
  for (size_t i = 0; i + 1 < T; ++i) s += a.at(T - 1, i) - a.at(i, i);
  return s / static_cast<double>(T - 1);
}

double mean_final_accuracy(const AccuracyMatrix& a) {
  size_t T = a.tasks();
  if (T == 0) throw ContractError("mean_final_accuracy: empty matrix");
  double s = 0.0;
  for (size_t i = 0; i < T; ++i) s += a.at(T - 1, i);
  return s / static_cast<double>(T);
}

std::pair<double, double> fecam_protocol_accuracy(
    const std::vector<double>& stage_accuracies) {
  if (stage_accuracies.empty())
    throw ContractError("fecam_protocol_accuracy: empty stage list");
  double s = 0.0;
  for (double v : stage_accuracies) s += v;
  return {stage_accuracies.back(),
          s / static_cast<double>(stage_accuracies.size())};
}

std::vector<std::vector<double>> target_weight_drift(
    const std::vector<ParameterSet>& snapshots, const std::string& layer) {
  size_t n = snapshots.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i) {
    const Tensor& wi = snapshots[i].at(layer);
    for (size_t j = i + 1; j < n; ++j) {
      const Tensor& wj = snapshots[j].at(layer);
      if (!wi.same_shape(wj))
        throw ShapeError("target_weight_drift: layout mismatch");
      double s = 0.0;
      for (size_t k = 0; k < wi.size(); ++k)
        s += std::fabs(wi.data[k] - wj.data[k]);
      d[i][j] = d[j][i] = s;
    }
  }
  return d;
}

}  // namespace hypermask
