#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hypermask/tensor.hpp"

namespace hypermask {

// Raw 28x28 dataset as loaded from an IDX pair, pixels normalized to [0,1].
struct RawMnist {
  size_t count = 0;
  std::vector<double> pixels;  // count * 784, row-major
  std::vector<uint8_t> labels;
};

struct DataSplit {
  size_t count = 0;
  size_t dim = 0;
  std::vector<double> x;  // count * dim
  std::vector<int> y;     // local labels

  Tensor batch(const std::vector<size_t>& indices) const;
  Tensor all_inputs() const;
};

struct TaskDataset {
  size_t task_id = 0;  // 1-based
  DataSplit train, validation, test;
  std::vector<int> global_classes;  // local label -> global class id
};

// IDX container loading; gzip-compressed files are detected by magic bytes.
RawMnist load_idx(const std::string& images_path,
                  const std::string& labels_path);

// Zero-pad each 28x28 image by 2 pixels on every side and flatten to 1024.
std::vector<double> pad_and_flatten(const std::vector<double>& pixels,
                                    size_t count);

constexpr size_t kPaddedDim = 32 * 32;

std::vector<TaskDataset> build_permuted_tasks(const RawMnist& train,
                                              const RawMnist& test, size_t T,
                                              uint64_t seed, size_t val_size);

// Task t (1-based) of the permuted stream on its own; identical to entry
// t-1 of build_permuted_tasks. Lets long streams avoid holding every
// permuted copy of the corpus at once.
TaskDataset build_permuted_task(const RawMnist& train, const RawMnist& test,
                                size_t t, uint64_t seed, size_t val_size);

std::vector<TaskDataset> build_split_tasks(const RawMnist& train,
                                           const RawMnist& test,
                                           size_t val_size, uint64_t seed);

}  // namespace hypermask
