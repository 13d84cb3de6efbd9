#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace sdqc::nn {

// Row-major dense array. Every op in this library works on rank-2 tensors;
// vectors are 1×n.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0) : shape{rows, cols}, values(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> v) : shape{rows, cols}, values(std::move(v)) {}

  std::size_t rows() const { return shape.size() > 0 ? shape[0] : 0; }
  std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }
  std::size_t numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

  std::string shape_string() const;
};

}  // namespace sdqc::nn
