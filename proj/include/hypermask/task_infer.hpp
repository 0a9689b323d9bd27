#pragma once

#include <vector>

#include "hypermask/datasets.hpp"
#include "hypermask/trainer.hpp"

namespace hypermask {

// Per-class mean feature plus the inverse of its normalized, twice-shrunk
// covariance, in last-hidden feature space.
struct ClassPrototype {
  int cls = 0;  // global class id (task offset * classes_per_task + local)
  Tensor mu;          // [d]
  Tensor sigma_inv;   // [d x d]
  size_t sample_count = 0;
};

struct InferenceResult {
  int predicted_class = 0;  // global class id
  size_t selected_task = 0;  // 1-based
  std::vector<double> scores;  // per-task entropies, or per-candidate minima
};

// Shannon entropy (natural log) of a softmax vector; 0*log 0 contributes 0.
double entropy_of(const std::vector<double>& probs);

// Task-identity-free prediction by entropy minimization over heads 1..upto.
// Ties pick the lowest task index.
InferenceResult infer_entropy(const TrainedState& state,
                              const std::vector<double>& x);
std::vector<InferenceResult> infer_entropy_batch(const TrainedState& state,
                                                 const DataSplit& split,
                                                 size_t upto_task);

// Sigma + D1*I + D2*(1-I) with D1/D2 the diagonal / off-diagonal means.
Tensor shrink_covariance(const Tensor& sigma);

// Correlation-style normalization; requires a strictly positive diagonal.
Tensor normalize_covariance(const Tensor& sigma);

// Prototypes for every class of tasks 1..upto_task, features taken under
// each training sample's own task mask.
std::vector<ClassPrototype> build_prototypes(
    const TrainedState& state, const std::vector<TaskDataset>& tasks,
    size_t upto_task);

// Streaming variant: fetches one task's training split at a time.
std::vector<ClassPrototype> build_prototypes(const TrainedState& state,
                                             const TaskProvider& provider,
                                             size_t upto_task);

// Squared Mahalanobis distance between L2-normalized feature and prototype.
double mahalanobis_sq(const Tensor& feature, const ClassPrototype& proto);

// Nearest-prototype classification over every (class, task-mask) pair.
// Ties pick the lowest class id, then the lowest task index.
InferenceResult classify_fecam(const TrainedState& state,
                               const std::vector<ClassPrototype>& protos,
                               const std::vector<double>& x);
std::vector<InferenceResult> classify_fecam_batch(
    const TrainedState& state, const std::vector<ClassPrototype>& protos,
    const DataSplit& split, size_t upto_task);

// Squared Mahalanobis distance of every sample to every (prototype,
// candidate-task-mask) pair; row r is prototype-major, task-minor
// (protos.size() * upto_task entries). Lets callers evaluate every stage
// prefix from one pass.
std::vector<std::vector<double>> fecam_distance_matrix(
    const TrainedState& state, const std::vector<ClassPrototype>& protos,
    const DataSplit& split, size_t upto_task);

}  // namespace hypermask
