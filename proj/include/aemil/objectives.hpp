#ifndef AEMIL_OBJECTIVES_HPP
#define AEMIL_OBJECTIVES_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "ops.hpp"

namespace aemil {

enum class RegKind { None, Aem, Kl };

inline std::string reg_kind_name(RegKind k) {
  switch (k) {
    case RegKind::None: return "none";
    case RegKind::Aem: return "aem";
    case RegKind::Kl: return "kl";
  }
  return "?";
}

struct LossBreakdown {
  double ce = 0.0;
  double reg = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

// Softmax cross entropy with a hard label. The loss is evaluated in log
// space, -(v_y - max - ln sum exp(v - max)), so it stays finite for any
// finite logits; the gradient is p - onehot(label).
inline std::pair<double, std::vector<double>> cross_entropy(
    const std::vector<double>& logits, std::size_t label) {
  if (label >= logits.size())
    throw DomainError("cross_entropy: label " + std::to_string(label) +
                      " out of range for " + std::to_string(logits.size()) +
                      " classes");
  double max = logits[0];
  for (double v : logits) max = std::max(max, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - max);
  const double loss = std::log(sum) - (logits[label] - max);
  std::vector<double> grad = softmax_stable(logits);
  grad[label] -= 1.0;
  return {loss, std::move(grad)};
}

inline void require_simplex(const std::vector<double>& a, const char* op) {
  if (a.empty()) throw DomainError(std::string(op) + ": empty distribution");
  double sum = 0.0;
  for (double v : a) {
    if (v < 0.0) throw DomainError(std::string(op) + ": negative attention value");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-6)
    throw DomainError(std::string(op) + ": attention sums to " +
                      std::to_string(sum) + ", not 1");
}

// Shannon entropy in nats with the 0 ln 0 = 0 convention. Range [0, ln N].
inline double attention_entropy(const std::vector<double>& a) {
  require_simplex(a, "attention_entropy");
  double h = 0.0;
  for (double v : a)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

// Negative attention entropy, loss = sum_n a_n ln a_n in [-ln N, 0], with
// grad_n = ln a_n + 1. Entries at exactly 0 contribute nothing and get
// gradient 0 (the one-sided limit of the 0 ln 0 convention); softmax output
// never reaches 0 so that path only serves synthetic inputs.
inline std::pair<double, std::vector<double>> aem_loss(
    const std::vector<double>& a) {
  require_simplex(a, "aem_loss");
  double loss = 0.0;
  std::vector<double> grad(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0) {
      const double lg = std::log(a[i]);
      loss += a[i] * lg;
      grad[i] = lg + 1.0;
    }
  }
  return {loss, std::move(grad)};
}

// KL(U || A) = -ln N - (1/N) sum_n ln a_n with grad_n = -1/(N a_n).
// This is the reverse direction on purpose: KL(A || U) = ln N - H(A) has the
// same gradient as the negative-entropy loss, so only the reverse direction
// gives the ablation a distinct optimizer trajectory.
inline std::pair<double, std::vector<double>> kl_uniform_loss(
    const std::vector<double>& a) {
  require_simplex(a, "kl_uniform_loss");
  const double n = static_cast<double>(a.size());
  double mean_log = 0.0;
  std::vector<double> grad(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0)
      throw DomainError("kl_uniform_loss: zero attention value, divergence infinite");
    mean_log += std::log(a[i]);
    grad[i] = -1.0 / (n * a[i]);
  }
  mean_log /= n;
  return {-std::log(n) - mean_log, std::move(grad)};
}

inline LossBreakdown total_loss(double ce, double reg, double lambda,
                                RegKind kind) {
  if (lambda < 0.0) throw ConfigError("total_loss: lambda must be >= 0");
  LossBreakdown out;
  out.ce = ce;
  out.reg = reg;
  out.lambda = kind == RegKind::None ? 0.0 : lambda;
  out.total = ce + out.lambda * reg;
  return out;
}

struct RegResult {
  double value = 0.0;
  std::vector<std::vector<double>> grad_heads; // aligned with head_weights
};

// Applies the regularizer to each attention map and averages: a single map
// for Gated/DualStream, the per-head maps for MultiHead (each head's grad
// scaled by 1/n_heads).
inline RegResult regularizer_for_variant(const AttentionOutput& out,
                                         RegKind kind) {
  RegResult res;
  const std::size_t maps = out.head_weights.size();
  res.grad_heads.resize(maps);
  if (kind == RegKind::None) {
    for (std::size_t k = 0; k < maps; ++k)
      res.grad_heads[k].assign(out.head_weights[k].size(), 0.0);
    return res;
  }
  const double inv = 1.0 / static_cast<double>(maps);
  for (std::size_t k = 0; k < maps; ++k) {
    auto [value, grad] = kind == RegKind::Aem ? aem_loss(out.head_weights[k])
                                              : kl_uniform_loss(out.head_weights[k]);
    res.value += value * inv;
    for (double& g : grad) g *= inv;
    res.grad_heads[k] = std::move(grad);
  }
  return res;
}

} // namespace aemil

#endif
