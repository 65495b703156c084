#ifndef AEMIL_MODEL_HPP
#define AEMIL_MODEL_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "ops.hpp"
#include "rng.hpp"

namespace aemil {

enum class AttentionVariant { Gated, DualStream, MultiHead };

inline std::string variant_name(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::Gated: return "gated";
    case AttentionVariant::DualStream: return "dualstream";
    case AttentionVariant::MultiHead: return "multihead";
  }
  return "?";
}

struct ArchitectureSpec {
  std::size_t input_dim = 0;    // D, resolved from the data source
  std::size_t embed_dim = 256;  // E, reduced embedding width
  std::size_t attn_hidden = 128; // L, attention hidden width
  std::size_t n_classes = 2;    // C
  AttentionVariant variant = AttentionVariant::Gated;
  std::size_t n_heads = 1;      // MultiHead only

  void validate() const {
    if (input_dim < 1 || embed_dim < 1 || attn_hidden < 1 || n_classes < 1)
      throw ConfigError("architecture dims must all be >= 1");
    if (variant == AttentionVariant::MultiHead && n_heads < 1)
      throw ConfigError("multihead requires n_heads >= 1");
  }

  std::size_t head_count() const {
    return variant == AttentionVariant::MultiHead ? n_heads : 1;
  }

  bool operator==(const ArchitectureSpec&) const = default;
};

// All learnable tensors for one attention variant plus the classifier.
//
// Attention tensor layout by variant (the fixed traversal order used for
// initialization, flattening and checkpoints):
//   Gated:      tanh_proj [ExL], gate_proj [ExL], score_w [1xL]
//   DualStream: score_vec [1xE], query_proj [ExL]
//   MultiHead:  per head k: tanh_proj_k, gate_proj_k, score_w_k
struct ModelParams {
  ArchitectureSpec spec;
  ParamTensor reduce_w; // DxE
  ParamTensor reduce_b; // 1xE
  std::vector<ParamTensor> attn;
  ParamTensor cls_w; // ExC
  ParamTensor cls_b; // 1xC

  template <typename Fn>
  void visit(Fn&& fn) {
    fn(reduce_w);
    fn(reduce_b);
    for (auto& p : attn) fn(p);
    fn(cls_w);
    fn(cls_b);
  }

  template <typename Fn>
  void visit(Fn&& fn) const {
    fn(reduce_w);
    fn(reduce_b);
    for (const auto& p : attn) fn(p);
    fn(cls_w);
    fn(cls_b);
  }

  void zero_grad() {
    visit([](ParamTensor& p) { p.zero_grad(); });
  }

  std::size_t n_values() const {
    std::size_t n = 0;
    visit([&](const ParamTensor& p) { n += p.value.size(); });
    return n;
  }

  std::vector<double> flatten_values() const {
    std::vector<double> out;
    out.reserve(n_values());
    visit([&](const ParamTensor& p) {
      out.insert(out.end(), p.value.data.begin(), p.value.data.end());
    });
    return out;
  }

  std::vector<double> flatten_grads() const {
    std::vector<double> out;
    out.reserve(n_values());
    visit([&](const ParamTensor& p) {
      out.insert(out.end(), p.grad.data.begin(), p.grad.data.end());
    });
    return out;
  }

  void load_values(const std::vector<double>& flat) {
    if (flat.size() != n_values())
      throw DimensionError("load_values: got " + std::to_string(flat.size()) +
                           " values, expected " + std::to_string(n_values()));
    std::size_t pos = 0;
    visit([&](ParamTensor& p) {
      for (double& v : p.value.data) v = flat[pos++];
    });
  }
};

// Glorot uniform for weights, zeros for biases, drawn in traversal order
// from a single seeded stream so that (spec, seed) fixes every value.
inline ModelParams init_params(const ArchitectureSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParams p;
  p.spec = spec;
  const std::size_t d = spec.input_dim, e = spec.embed_dim,
                    l = spec.attn_hidden, c = spec.n_classes;
  p.reduce_w = ParamTensor(d, e);
  p.reduce_b = ParamTensor(1, e);
  switch (spec.variant) {
    case AttentionVariant::Gated:
      p.attn = {ParamTensor(e, l), ParamTensor(e, l), ParamTensor(1, l)};
      break;
    case AttentionVariant::DualStream:
      p.attn = {ParamTensor(1, e), ParamTensor(e, l)};
      break;
    case AttentionVariant::MultiHead:
      for (std::size_t k = 0; k < spec.n_heads; ++k) {
        p.attn.emplace_back(e, l);
        p.attn.emplace_back(e, l);
        p.attn.emplace_back(1, l);
      }
      break;
  }
  p.cls_w = ParamTensor(e, c);
  p.cls_b = ParamTensor(1, c);

  Rng rng(seed);
  auto glorot = [&](ParamTensor& t, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.value.data) v = rng.uniform_range(-a, a);
  };
  p.visit([&](ParamTensor& t) {
    if (&t == &p.reduce_b || &t == &p.cls_b) return; // biases stay zero
    if (t.value.rows == 1)
      glorot(t, t.value.cols, 1); // score/instance vectors
    else
      glorot(t, t.value.rows, t.value.cols);
  });
  return p;
}

// Attention tensor offsets within ModelParams::attn.
namespace attn_idx {
constexpr std::size_t gated_tanh = 0, gated_gate = 1, gated_score = 2;
constexpr std::size_t dual_score_vec = 0, dual_query = 1;
inline std::size_t head_base(std::size_t k) { return 3 * k; }
} // namespace attn_idx

// Forward result plus the caches model_backward needs.
struct AttentionOutput {
  std::vector<double> weights;  // reported attention map (mean over heads)
  std::vector<std::vector<double>> head_weights; // one map per head
  std::vector<double> bag_embedding; // z
  std::vector<double> logits;

  // caches
  Matrix features; // bag input X (model_forward only)
  Matrix hidden;   // H after the reduction relu
  std::vector<Matrix> head_tanh; // gated/multihead, NxL per head
  std::vector<Matrix> head_gate; // gated/multihead, NxL per head
  std::vector<std::vector<double>> head_embeddings; // per-head z
  Matrix queries;            // dualstream NxL
  std::size_t critical = 0;  // dualstream argmax instance
  bool has_caches = false;
};

namespace detail {

inline std::vector<double> classifier_logits(const std::vector<double>& z,
                                             const ModelParams& params) {
  const std::size_t e = params.spec.embed_dim, c = params.spec.n_classes;
  std::vector<double> logits(c);
  for (std::size_t j = 0; j < c; ++j) {
    double acc = params.cls_b.value(0, j);
    for (std::size_t i = 0; i < e; ++i) acc += z[i] * params.cls_w.value(i, j);
    logits[j] = acc;
  }
  return logits;
}

inline std::vector<double> weighted_row_sum(const Matrix& h,
                                            const std::vector<double>& a) {
  std::vector<double> z(h.cols, 0.0);
  for (std::size_t n = 0; n < h.rows; ++n) {
    const double an = a[n];
    for (std::size_t e = 0; e < h.cols; ++e) z[e] += an * h(n, e);
  }
  return z;
}

// One gated head: score_n = w^T (tanh(H V) . sigmoid(H U)), softmax over n.
inline void gated_head_forward(const Matrix& h, const ModelParams& params,
                               std::size_t base, std::vector<double>& a,
                               Matrix& tanh_cache, Matrix& gate_cache) {
  const Matrix pre_t = matmul(h, params.attn[base].value);
  const Matrix pre_g = matmul(h, params.attn[base + 1].value);
  tanh_cache = elementwise_forward(Activation::Tanh, pre_t);
  gate_cache = elementwise_forward(Activation::Sigmoid, pre_g);
  const Matrix& score_w = params.attn[base + 2].value;
  std::vector<double> scores(h.rows);
  for (std::size_t n = 0; n < h.rows; ++n) {
    double acc = 0.0;
    for (std::size_t l = 0; l < score_w.cols; ++l)
      acc += score_w(0, l) * tanh_cache(n, l) * gate_cache(n, l);
    scores[n] = acc;
  }
  a = softmax_stable(scores);
}

} // namespace detail

inline void require_nonempty(const Matrix& h) {
  if (h.rows == 0) throw DomainError("empty bag: attention needs N >= 1 instances");
}

inline AttentionOutput gated_attention_forward(const Matrix& h,
                                               const ModelParams& params) {
  require_nonempty(h);
  AttentionOutput out;
  out.head_tanh.resize(1);
  out.head_gate.resize(1);
  std::vector<double> a;
  detail::gated_head_forward(h, params, attn_idx::gated_tanh, a,
                             out.head_tanh[0], out.head_gate[0]);
  out.weights = a;
  out.head_weights = {a};
  out.bag_embedding = detail::weighted_row_sum(h, a);
  out.head_embeddings = {out.bag_embedding};
  out.logits = detail::classifier_logits(out.bag_embedding, params);
  return out;
}

// Attention from similarity to the highest-scoring ("critical") instance:
// u_n = s^T h_n picks c = argmax u (smallest index on ties), queries q = H Q,
// raw_n = <q_n, q_c> / sqrt(L). Classifier runs on the bag embedding only.
inline AttentionOutput dual_stream_forward(const Matrix& h,
                                           const ModelParams& params) {
  require_nonempty(h);
  AttentionOutput out;
  const Matrix& score_vec = params.attn[attn_idx::dual_score_vec].value;
  std::size_t critical = 0;
  double best = -HUGE_VAL;
  for (std::size_t n = 0; n < h.rows; ++n) {
    double u = 0.0;
    for (std::size_t e = 0; e < h.cols; ++e) u += score_vec(0, e) * h(n, e);
    if (u > best) {
      best = u;
      critical = n;
    }
  }
  out.critical = critical;
  out.queries = matmul(h, params.attn[attn_idx::dual_query].value);
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(out.queries.cols));
  std::vector<double> raw(h.rows);
  for (std::size_t n = 0; n < h.rows; ++n) {
    double acc = 0.0;
    for (std::size_t l = 0; l < out.queries.cols; ++l)
      acc += out.queries(n, l) * out.queries(critical, l);
    raw[n] = acc * inv_scale;
  }
  std::vector<double> a = softmax_stable(raw);
  out.weights = a;
  out.head_weights = {a};
  out.bag_embedding = detail::weighted_row_sum(h, a);
  out.head_embeddings = {out.bag_embedding};
  out.logits = detail::classifier_logits(out.bag_embedding, params);
  return out;
}

// Each head runs the gated formula with its own tensors; the bag embedding
// and the reported attention map are arithmetic means over heads.
inline AttentionOutput multi_head_forward(const Matrix& h,
                                          const ModelParams& params) {
  require_nonempty(h);
  const std::size_t heads = params.spec.n_heads;
  AttentionOutput out;
  out.head_tanh.resize(heads);
  out.head_gate.resize(heads);
  out.head_weights.resize(heads);
  out.head_embeddings.resize(heads);
  out.weights.assign(h.rows, 0.0);
  out.bag_embedding.assign(h.cols, 0.0);
  for (std::size_t k = 0; k < heads; ++k) {
    detail::gated_head_forward(h, params, attn_idx::head_base(k),
                               out.head_weights[k], out.head_tanh[k],
                               out.head_gate[k]);
    out.head_embeddings[k] = detail::weighted_row_sum(h, out.head_weights[k]);
    for (std::size_t n = 0; n < h.rows; ++n)
      out.weights[n] += out.head_weights[k][n];
    for (std::size_t e = 0; e < h.cols; ++e)
      out.bag_embedding[e] += out.head_embeddings[k][e];
  }
  const double inv = 1.0 / static_cast<double>(heads);
  for (double& w : out.weights) w *= inv;
  for (double& z : out.bag_embedding) z *= inv;
  out.logits = detail::classifier_logits(out.bag_embedding, params);
  return out;
}

// Full pipeline: reduce -> relu -> variant attention -> classifier.
inline AttentionOutput model_forward(const Matrix& features,
                                     const ModelParams& params) {
  const ArchitectureSpec& spec = params.spec;
  if (features.cols != spec.input_dim)
    throw ConfigError("model_forward: bag has " + std::to_string(features.cols) +
                      " feature dims, model expects " +
                      std::to_string(spec.input_dim));
  require_nonempty(features);
  std::vector<double> bias(params.reduce_b.value.data);
  Matrix hidden = elementwise_forward(
      Activation::Relu, affine_forward(features, params.reduce_w.value, bias));
  AttentionOutput out;
  switch (spec.variant) {
    case AttentionVariant::Gated:
      out = gated_attention_forward(hidden, params);
      break;
    case AttentionVariant::DualStream:
      out = dual_stream_forward(hidden, params);
      break;
    case AttentionVariant::MultiHead:
      out = multi_head_forward(hidden, params);
      break;
  }
  out.features = features;
  out.hidden = std::move(hidden);
  out.has_caches = true;
  return out;
}

namespace detail {

// Backward through one gated head into parameter grads and grad_hidden.
inline void gated_head_backward(const AttentionOutput& out, std::size_t k,
                                std::size_t base,
                                const std::vector<double>& grad_z_head,
                                const std::vector<double>& grad_a_head,
                                ModelParams& params, Matrix& grad_hidden) {
  const Matrix& h = out.hidden;
  const std::vector<double>& a = out.head_weights[k];
  const Matrix& tanh_c = out.head_tanh[k];
  const Matrix& gate_c = out.head_gate[k];
  const std::size_t n_inst = h.rows, l_dim = tanh_c.cols;

  // z = sum_n a_n h_n: weights pick up h . grad_z, rows pick up a_n grad_z.
  std::vector<double> grad_a_total(n_inst);
  for (std::size_t n = 0; n < n_inst; ++n) {
    double acc = grad_a_head[n];
    for (std::size_t e = 0; e < h.cols; ++e) acc += h(n, e) * grad_z_head[e];
    grad_a_total[n] = acc;
    for (std::size_t e = 0; e < h.cols; ++e)
      grad_hidden(n, e) += a[n] * grad_z_head[e];
  }
  const std::vector<double> grad_scores = softmax_backward(grad_a_total, a);

  ParamTensor& tanh_proj = params.attn[base];
  ParamTensor& gate_proj = params.attn[base + 1];
  ParamTensor& score_w = params.attn[base + 2];

  Matrix grad_pre_t(n_inst, l_dim), grad_pre_g(n_inst, l_dim);
  std::vector<double> grad_score_w(l_dim, 0.0);
  for (std::size_t n = 0; n < n_inst; ++n) {
    const double gs = grad_scores[n];
    for (std::size_t l = 0; l < l_dim; ++l) {
      const double t = tanh_c(n, l), g = gate_c(n, l);
      grad_score_w[l] += gs * t * g;
      const double grad_gated = gs * score_w.value(0, l);
      grad_pre_t(n, l) = grad_gated * g * (1.0 - t * t);
      grad_pre_g(n, l) = grad_gated * t * g * (1.0 - g);
    }
  }
  for (std::size_t l = 0; l < l_dim; ++l) score_w.grad(0, l) += grad_score_w[l];
  const Matrix gt = matmul_tn(h, grad_pre_t);
  for (std::size_t i = 0; i < gt.size(); ++i) tanh_proj.grad.data[i] += gt.data[i];
  const Matrix gg = matmul_tn(h, grad_pre_g);
  for (std::size_t i = 0; i < gg.size(); ++i) gate_proj.grad.data[i] += gg.data[i];
  const Matrix gh_t = matmul_nt(grad_pre_t, tanh_proj.value);
  const Matrix gh_g = matmul_nt(grad_pre_g, gate_proj.value);
  for (std::size_t i = 0; i < grad_hidden.size(); ++i)
    grad_hidden.data[i] += gh_t.data[i] + gh_g.data[i];
}

} // namespace detail

// Accumulates the analytic gradient of grad_logits . logits plus the
// attention-path terms grad_attention[k] . A^(k) into every ParamTensor.
// grad_attention carries one vector per attention map: a single entry for
// Gated/DualStream, one per head for MultiHead.
inline void model_backward(const AttentionOutput& out,
                           const std::vector<double>& grad_logits,
                           const std::vector<std::vector<double>>& grad_attention,
                           ModelParams& params) {
  if (!out.has_caches)
    throw StateError("model_backward: no forward caches (call model_forward first)");
  const ArchitectureSpec& spec = params.spec;
  const std::size_t n_inst = out.hidden.rows, e_dim = spec.embed_dim;
  const std::size_t maps = spec.head_count();
  if (grad_logits.size() != spec.n_classes)
    throw DimensionError("model_backward: grad_logits size " +
                         std::to_string(grad_logits.size()) + " vs n_classes " +
                         std::to_string(spec.n_classes));
  if (grad_attention.size() != maps)
    throw DimensionError("model_backward: expected " + std::to_string(maps) +
                         " attention grad maps, got " +
                         std::to_string(grad_attention.size()));
  for (const auto& g : grad_attention)
    if (g.size() != n_inst)
      throw DimensionError("model_backward: attention grad length " +
                           std::to_string(g.size()) + " vs bag size " +
                           std::to_string(n_inst));

  // classifier: logits = z^T W_c + b_c
  std::vector<double> grad_z(e_dim, 0.0);
  for (std::size_t j = 0; j < spec.n_classes; ++j) {
    const double gl = grad_logits[j];
    params.cls_b.grad(0, j) += gl;
    for (std::size_t i = 0; i < e_dim; ++i) {
      params.cls_w.grad(i, j) += out.bag_embedding[i] * gl;
      grad_z[i] += params.cls_w.value(i, j) * gl;
    }
  }

  Matrix grad_hidden(n_inst, e_dim);
  switch (spec.variant) {
    case AttentionVariant::Gated:
      detail::gated_head_backward(out, 0, attn_idx::gated_tanh, grad_z,
                                  grad_attention[0], params, grad_hidden);
      break;
    case AttentionVariant::MultiHead: {
      const double inv = 1.0 / static_cast<double>(spec.n_heads);
      std::vector<double> grad_z_head(e_dim);
      for (std::size_t k = 0; k < spec.n_heads; ++k) {
        for (std::size_t i = 0; i < e_dim; ++i) grad_z_head[i] = grad_z[i] * inv;
        detail::gated_head_backward(out, k, attn_idx::head_base(k), grad_z_head,
                                    grad_attention[k], params, grad_hidden);
      }
      break;
    }
    case AttentionVariant::DualStream: {
      const Matrix& h = out.hidden;
      const std::vector<double>& a = out.head_weights[0];
      const Matrix& q = out.queries;
      const std::size_t c = out.critical, l_dim = q.cols;
      std::vector<double> grad_a_total(n_inst);
      for (std::size_t n = 0; n < n_inst; ++n) {
        double acc = grad_attention[0][n];
        for (std::size_t e = 0; e < e_dim; ++e) acc += h(n, e) * grad_z[e];
        grad_a_total[n] = acc;
        for (std::size_t e = 0; e < e_dim; ++e)
          grad_hidden(n, e) += a[n] * grad_z[e];
      }
      const std::vector<double> grad_raw = softmax_backward(grad_a_total, a);
      const double inv_scale = 1.0 / std::sqrt(static_cast<double>(l_dim));
      // raw_n = <q_n, q_c>/sqrt(L); the critical index is piecewise constant,
      // so the instance-score vector receives no gradient here.
      Matrix grad_q(n_inst, l_dim);
      for (std::size_t n = 0; n < n_inst; ++n) {
        const double gr = grad_raw[n] * inv_scale;
        for (std::size_t l = 0; l < l_dim; ++l) {
          grad_q(n, l) += gr * q(c, l);
          grad_q(c, l) += gr * q(n, l);
        }
      }
      ParamTensor& query_proj = params.attn[attn_idx::dual_query];
      const Matrix gq = matmul_tn(h, grad_q);
      for (std::size_t i = 0; i < gq.size(); ++i)
        query_proj.grad.data[i] += gq.data[i];
      const Matrix gh = matmul_nt(grad_q, query_proj.value);
      for (std::size_t i = 0; i < grad_hidden.size(); ++i)
        grad_hidden.data[i] += gh.data[i];
      break;
    }
  }

  // reduction layer: H = relu(X W_r + b_r)
  const Matrix grad_pre =
      elementwise_backward(Activation::Relu, grad_hidden, out.hidden);
  affine_backward(grad_pre, out.features, params.reduce_w, params.reduce_b);
}

} // namespace aemil

#endif
