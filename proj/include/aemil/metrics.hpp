#ifndef AEMIL_METRICS_HPP
#define AEMIL_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"

namespace aemil {

namespace detail {

// Average ranks (1-based), ties share the mean of their rank range.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

} // namespace detail

// Mann-Whitney AUROC with tie-averaged ranks.
inline double auroc_binary(const std::vector<double>& scores,
                           const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw DimensionError("auroc_binary: " + std::to_string(scores.size()) +
                         " scores vs " + std::to_string(labels.size()) + " labels");
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += y != 0;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw MetricError("auroc_binary: needs both classes present");
  const std::vector<double> ranks = detail::average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != 0) rank_sum += ranks[i];
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

// One-vs-rest AUROC per class from an MxC probability matrix; macro is the
// unweighted mean. Every class must occur in the labels.
inline std::pair<double, std::vector<double>> macro_auroc(
    const Matrix& probs, const std::vector<std::size_t>& labels) {
  if (probs.rows != labels.size())
    throw DimensionError("macro_auroc: " + std::to_string(probs.rows) +
                         " rows vs " + std::to_string(labels.size()) + " labels");
  const std::size_t c = probs.cols;
  std::vector<double> per_class(c);
  for (std::size_t cls = 0; cls < c; ++cls) {
    std::vector<double> scores(probs.rows);
    std::vector<int> ovr(probs.rows);
    bool present = false;
    for (std::size_t i = 0; i < probs.rows; ++i) {
      scores[i] = probs(i, cls);
      ovr[i] = labels[i] == cls ? 1 : 0;
      present |= ovr[i] != 0;
    }
    if (!present)
      throw MetricError("macro_auroc: class " + std::to_string(cls) +
                        " absent from labels");
    per_class[cls] = auroc_binary(scores, ovr);
  }
  double macro = 0.0;
  for (double v : per_class) macro += v;
  macro /= static_cast<double>(c);
  return {macro, std::move(per_class)};
}

// Macro F1 over all n_classes, F1 := 0 whenever precision + recall == 0,
// so classes never predicted (or never occurring) contribute zero.
inline double macro_f1(const std::vector<std::size_t>& pred,
                       const std::vector<std::size_t>& truth,
                       std::size_t n_classes) {
  if (pred.size() != truth.size() || pred.empty())
    throw DimensionError("macro_f1: prediction/label size mismatch or empty");
  double sum = 0.0;
  for (std::size_t cls = 0; cls < n_classes; ++cls) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == cls, t = truth[i] == cls;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
    const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
    if (precision + recall > 0.0)
      sum += 2.0 * precision * recall / (precision + recall);
  }
  return sum / static_cast<double>(n_classes);
}

// Mean over bags of the cumulative sum of the k largest attention values,
// k = 1..K; bags shorter than K are padded with their final cumulative sum.
inline std::vector<double> cumulative_topk_mass(
    const std::vector<std::vector<double>>& attention_maps, std::size_t k) {
  if (k < 1) throw DomainError("cumulative_topk_mass: K must be >= 1");
  if (attention_maps.empty())
    throw DomainError("cumulative_topk_mass: no attention maps");
  std::vector<double> mean(k, 0.0);
  for (const auto& a : attention_maps) {
    if (a.empty()) throw DomainError("cumulative_topk_mass: empty attention map");
    std::vector<double> sorted = a;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double cum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (i < sorted.size()) cum += sorted[i];
      mean[i] += cum;
    }
  }
  for (double& v : mean) v /= static_cast<double>(attention_maps.size());
  return mean;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw MetricError("pearson: zero variance in one argument");
  return sxy / std::sqrt(sxx * syy);
}

// Spearman rank correlation: Pearson on tie-averaged ranks.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw DimensionError("spearman: size mismatch");
  if (x.size() < 3) throw MetricError("spearman: needs at least 3 points");
  return pearson(detail::average_ranks(x), detail::average_ranks(y));
}

struct EvalReport {
  double macro_auc = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_auc;
  double mean_attention_entropy = 0.0;   // nats
  double mean_normalized_entropy = 0.0;  // H(A)/ln N per bag, then averaged
};

} // namespace aemil

#endif
