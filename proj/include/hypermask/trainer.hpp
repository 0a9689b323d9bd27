#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hypermask/datasets.hpp"
#include "hypermask/losses.hpp"
#include "hypermask/metrics.hpp"
#include "hypermask/networks.hpp"

namespace hypermask {

enum class SelectionRule { kLastIterate, kBestValidationLoss };

struct TrainConfig {
  std::string dataset = "split";  // "split" | "permuted"
  size_t num_tasks = 5;
  size_t classes_per_task = 2;
  size_t iterations = 2000;
  size_t batch_size = 128;
  double learning_rate = 0.001;
  double beta = 0.001;
  double lambda = 0.001;
  double p = 30.0;
  bool masked_l1 = true;
  bool masked_l1_abs = false;  // use |m| instead of the signed mask values
  bool target_trainable = true;
  uint64_t seed = 1;
  size_t embedding_dim = 128;
  std::vector<size_t> hyper_hidden = {25, 25};
  std::vector<size_t> target_hidden = {400, 400};
  size_t input_dim = kPaddedDim;
  size_t val_size = 1000;
  SelectionRule selection = SelectionRule::kLastIterate;
  size_t val_every = 100;

  void validate() const;
  TargetSpec target_spec() const;
  HypernetworkSpec hyper_spec() const;
};

// Per-iteration and per-task reporting hooks; default implementation drops
// everything.
struct ReportSink {
  virtual ~ReportSink() = default;
  virtual void on_iteration(size_t /*task*/, size_t /*iter*/,
                            double /*loss*/) {}
  virtual void on_task_accuracy(size_t /*task*/,
                                const std::vector<double>& /*row*/) {}
};

struct TrainedState {
  TrainConfig cfg;
  HypernetworkSpec hspec;
  TargetSpec tspec;
  ParameterSet phi;
  ParameterSet theta;
  std::vector<TaskEmbedding> embeddings;  // all tasks, allocated up front
  std::vector<Tensor> stored_masks;       // flat p=0 masks for tasks 1..t
  size_t tasks_trained = 0;
  std::mt19937_64 rng;
  AccuracyMatrix acc;
  std::vector<ParameterSet> theta_snapshots;  // after each finished task
};

TrainedState init_state(const TrainConfig& cfg);

// One pass of the sequential training loop for task t (1-based): snapshot,
// n optimizer iterations, embedding freeze. Tasks must arrive in order.
void train_task(TrainedState& state, size_t t, const TaskDataset& data,
                ReportSink* sink = nullptr);

// Folds train_task over the task list and records an accuracy-matrix row
// after each task.
TrainedState train_sequence(const std::vector<TaskDataset>& tasks,
                            const TrainConfig& cfg,
                            ReportSink* sink = nullptr);

// Produces task t (1-based) on demand; used to stream long task sequences
// without holding every training split in memory at once.
using TaskProvider = std::function<TaskDataset(size_t)>;

// Streaming variant: trains cfg.num_tasks tasks from the provider, keeping
// only the test splits seen so far for the accuracy matrix.
TrainedState train_sequence(const TaskProvider& provider,
                            const TrainConfig& cfg,
                            ReportSink* sink = nullptr);

// Accuracy (percent) of head t (1-based) under mask m_t on the given split.
double evaluate(const TrainedState& state, size_t t, const DataSplit& split);

// Mean cross-entropy of head t on a split; used by validation selection.
double validation_loss(const TrainedState& state, size_t t,
                       const DataSplit& split);

// The task-t mask at the evaluation-time ratio (constant p).
SemiBinaryMask task_mask(const TrainedState& state, size_t t);

}  // namespace hypermask
