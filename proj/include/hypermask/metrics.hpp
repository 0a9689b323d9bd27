#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hypermask/networks.hpp"
#include "hypermask/tensor.hpp"

namespace hypermask {

// Lower-triangular grid: row j holds accuracy on tasks 0..j after training
// task j (percent).
struct AccuracyMatrix {
  std::vector<std::vector<double>> rows;

  size_t tasks() const { return rows.size(); }
  double at(size_t after_task, size_t task) const {
    return rows.at(after_task).at(task);
  }
  std::string to_csv() const;
  bool operator==(const AccuracyMatrix& o) const { return rows == o.rows; }
};

// (1/(T-1)) sum_{i<T} (A[T-1][i] - A[i][i]); signed, percent points.
double backward_transfer(const AccuracyMatrix& a);

// Mean over tasks of final-row accuracies.
double mean_final_accuracy(const AccuracyMatrix& a);

// (last, average) of per-stage accuracies Acc_1..Acc_T.
std::pair<double, double> fecam_protocol_accuracy(
    const std::vector<double>& stage_accuracies);

// Symmetric drift matrix for one layer across task snapshots:
// D[i][j] = sum of |w_i - w_j| over the layer's entries.
std::vector<std::vector<double>> target_weight_drift(
    const std::vector<ParameterSet>& snapshots, const std::string& layer);

}  // namespace hypermask
