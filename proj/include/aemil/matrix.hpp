#ifndef AEMIL_MATRIX_HPP
#define AEMIL_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"

namespace aemil {

// Row-major dense matrix of 64-bit floats. Bags are small enough that this
// is the only storage layout in the engine.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double value = 0.0)
      : rows(r), cols(c), data(r * c, value) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }

  void fill(double value) { std::fill(data.begin(), data.end(), value); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }

  bool operator==(const Matrix& other) const = default;
};

// A learnable tensor paired with its gradient accumulator. Gradients
// accumulate across backward calls; zero_grad begins each optimizer step.
struct ParamTensor {
  Matrix value;
  Matrix grad;

  ParamTensor() = default;
  explicit ParamTensor(std::size_t r, std::size_t c)
      : value(r, c), grad(r, c) {}

  void zero_grad() { grad.fill(0.0); }
};

} // namespace aemil

#endif
