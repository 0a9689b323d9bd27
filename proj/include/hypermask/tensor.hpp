#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypermask {

// Error taxonomy shared across the library.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedOpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IndexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateCovarianceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& msg, size_t iter)
      : std::runtime_error(msg), iteration(iter) {}
  size_t iteration;
};

// Dense row-major tensor of 64-bit floats.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != data.size())
      throw ShapeError("tensor data length does not match shape");
  }

  static size_t numel(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<size_t> s) {
    size_t n = numel(s);
    return Tensor{std::move(s), std::vector<double>(n, 0.0)};
  }

  static Tensor full(std::vector<size_t> s, double v) {
    size_t n = numel(s);
    return Tensor{std::move(s), std::vector<double>(n, v)};
  }

  static Tensor scalar(double v) { return Tensor{{1}, {v}}; }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  // 2-D accessors; a rank-1 tensor counts as a single row.
  size_t rows() const {
    if (shape.empty()) throw ShapeError("rank-0 tensor");
    return shape.size() == 1 ? 1 : shape[0];
  }
  size_t cols() const {
    if (shape.empty()) throw ShapeError("rank-0 tensor");
    return shape.size() == 1 ? shape[0] : shape[shape.size() - 1];
  }

  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const;
};

}  // namespace hypermask
