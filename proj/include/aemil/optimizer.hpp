#ifndef AEMIL_OPTIMIZER_HPP
#define AEMIL_OPTIMIZER_HPP

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "model.hpp"

namespace aemil {

struct AdamConfig {
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers aligned with ModelParams traversal order.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t t = 0;
  AdamConfig hyper;
};

inline AdamState init_adam(const ModelParams& params, AdamConfig cfg = {}) {
  AdamState state;
  state.hyper = cfg;
  params.visit([&](const ParamTensor& p) {
    state.m.emplace_back(p.value.rows, p.value.cols);
    state.v.emplace_back(p.value.rows, p.value.cols);
  });
  return state;
}

// One Adam step with bias correction at the supplied learning rate;
// gradients are consumed and zeroed afterwards.
inline void adam_step(ModelParams& params, AdamState& state, double lr) {
  state.t += 1;
  const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  std::size_t idx = 0;
  params.visit([&](ParamTensor& p) {
    Matrix& m = state.m[idx];
    Matrix& v = state.v[idx];
    ++idx;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.data[i];
      m.data[i] = b1 * m.data[i] + (1.0 - b1) * g;
      v.data[i] = b2 * v.data[i] + (1.0 - b2) * g * g;
      const double m_hat = m.data[i] / corr1;
      const double v_hat = v.data[i] / corr2;
      p.value.data[i] -= lr * m_hat / (std::sqrt(v_hat) + state.hyper.eps);
    }
    p.grad.fill(0.0);
  });
}

enum class ScheduleKind { CosineLR, CosineLambda, Constant };

// value(t) = end + (start - end)(1 + cos(pi t / T)) / 2, endpoints exact.
struct Schedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double start = 0.0;
  double end = 0.0;
  std::uint64_t total_steps = 1;
};

inline double cosine_value(const Schedule& sched, std::uint64_t t) {
  if (sched.kind == ScheduleKind::Constant) return sched.start;
  if (t == 0) return sched.start;
  if (t >= sched.total_steps) {
    if (t > sched.total_steps) {
      static std::atomic<bool> warned{false};
      if (!warned.exchange(true))
        std::fprintf(stderr,
                     "schedule: step %llu beyond horizon %llu, clamping to end value\n",
                     static_cast<unsigned long long>(t),
                     static_cast<unsigned long long>(sched.total_steps));
    }
    return sched.end;
  }
  const double frac = static_cast<double>(t) / static_cast<double>(sched.total_steps);
  return sched.end + 0.5 * (sched.start - sched.end) * (1.0 + std::cos(M_PI * frac));
}

// Regularizer weight for one epoch: cosine from lambda0 down to lambda_min
// over the training horizon when annealing is on, constant otherwise.
inline double lambda_at_epoch(double lambda0, bool cwa, double lambda_min,
                              std::uint64_t epoch, std::uint64_t total_epochs) {
  if (!cwa) return lambda0;
  Schedule sched{ScheduleKind::CosineLambda, lambda0, lambda_min, total_epochs};
  return cosine_value(sched, epoch);
}

} // namespace aemil

#endif
