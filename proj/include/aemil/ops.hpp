#ifndef AEMIL_OPS_HPP
#define AEMIL_OPS_HPP

#include <cfloat>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"

namespace aemil {

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
}

// out = a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw DimensionError("matmul: inner dims differ, " + a.shape_str() + " * " +
                         b.shape_str());
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

// out = a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw DimensionError("matmul_tn: row counts differ, " + a.shape_str() +
                         " vs " + b.shape_str());
  Matrix out(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k)
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aki * b(k, j);
    }
  return out;
}

// out = a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw DimensionError("matmul_nt: col counts differ, " + a.shape_str() +
                         " vs " + b.shape_str());
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  return out;
}

// out[n,e] = sum_d x[n,d] W[d,e] + b[e]
inline Matrix affine_forward(const Matrix& x, const Matrix& w,
                             const std::vector<double>& b) {
  if (x.cols != w.rows)
    throw DimensionError("affine_forward: x " + x.shape_str() +
                         " does not conform with W " + w.shape_str());
  if (b.size() != w.cols)
    throw DimensionError("affine_forward: bias length " +
                         std::to_string(b.size()) + " vs W " + w.shape_str());
  Matrix out = matmul(x, w);
  for (std::size_t n = 0; n < out.rows; ++n)
    for (std::size_t e = 0; e < out.cols; ++e) out(n, e) += b[e];
  return out;
}

// grad_W = x^T upstream, grad_b = column sums, returns grad_x = upstream W^T.
// Parameter grads accumulate into the ParamTensor buffers with a single add
// per entry per call, so repeated backward passes scale exactly.
inline Matrix affine_backward(const Matrix& upstream, const Matrix& x,
                              ParamTensor& w, ParamTensor& b) {
  if (upstream.rows != x.rows || upstream.cols != w.value.cols ||
      x.cols != w.value.rows)
    throw DimensionError("affine_backward: upstream " + upstream.shape_str() +
                         ", x " + x.shape_str() + ", W " + w.value.shape_str());
  const Matrix gw = matmul_tn(x, upstream);
  for (std::size_t i = 0; i < gw.size(); ++i) w.grad.data[i] += gw.data[i];
  std::vector<double> col_sums(upstream.cols, 0.0);
  for (std::size_t n = 0; n < upstream.rows; ++n)
    for (std::size_t e = 0; e < upstream.cols; ++e)
      col_sums[e] += upstream(n, e);
  for (std::size_t e = 0; e < upstream.cols; ++e) b.grad(0, e) += col_sums[e];
  return matmul_nt(upstream, w.value);
}

enum class Activation { Relu, Tanh, Sigmoid };

// Numerically stable sigmoid: never evaluates exp of a large positive value.
inline double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Matrix elementwise_forward(Activation kind, const Matrix& x) {
  Matrix out(x.rows, x.cols);
  switch (kind) {
    case Activation::Relu:
      for (std::size_t i = 0; i < x.size(); ++i)
        out.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
      break;
    case Activation::Tanh:
      for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = std::tanh(x.data[i]);
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i)
        out.data[i] = sigmoid_scalar(x.data[i]);
      break;
  }
  return out;
}

// Derivatives expressed through the forward output: relu' = 1[out > 0]
// (subgradient 0 at the kink), tanh' = 1 - out^2, sigmoid' = out(1 - out).
inline Matrix elementwise_backward(Activation kind, const Matrix& upstream,
                                   const Matrix& out) {
  require_same_shape(upstream, out, "elementwise_backward");
  Matrix grad(out.rows, out.cols);
  switch (kind) {
    case Activation::Relu:
      for (std::size_t i = 0; i < out.size(); ++i)
        grad.data[i] = out.data[i] > 0.0 ? upstream.data[i] : 0.0;
      break;
    case Activation::Tanh:
      for (std::size_t i = 0; i < out.size(); ++i)
        grad.data[i] = upstream.data[i] * (1.0 - out.data[i] * out.data[i]);
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < out.size(); ++i)
        grad.data[i] = upstream.data[i] * out.data[i] * (1.0 - out.data[i]);
      break;
  }
  return grad;
}

// Shifted softmax. Entries that underflow are floored at DBL_MIN so the
// output is strictly positive for any finite input; the floor perturbs the
// unit sum by at most N * DBL_MIN.
inline std::vector<double> softmax_stable(const std::vector<double>& v) {
  if (v.empty()) throw DomainError("softmax_stable: empty input");
  double max = v[0];
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainError("softmax_stable: non-finite input");
    if (x > max) max = x;
  }
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - max);
    sum += out[i];
  }
  for (double& x : out) {
    x /= sum;
    if (x < DBL_MIN) x = DBL_MIN;
  }
  return out;
}

// Jacobian-vector product of softmax: grad_n = out_n (up_n - sum_m up_m out_m).
inline std::vector<double> softmax_backward(const std::vector<double>& upstream,
                                            const std::vector<double>& out) {
  if (upstream.size() != out.size())
    throw DimensionError("softmax_backward: upstream size " +
                         std::to_string(upstream.size()) + " vs out size " +
                         std::to_string(out.size()));
  double weighted = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) weighted += upstream[i] * out[i];
  std::vector<double> grad(out.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    grad[i] = out[i] * (upstream[i] - weighted);
  return grad;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw DimensionError("dot: size " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

} // namespace aemil

#endif
