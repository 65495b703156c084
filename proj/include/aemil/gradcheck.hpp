#ifndef AEMIL_GRADCHECK_HPP
#define AEMIL_GRADCHECK_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "errors.hpp"

namespace aemil {

// Central-difference gradient oracle. Compares an analytic gradient against
// (f(theta + h e_i) - f(theta - h e_i)) / 2h per coordinate and returns the
// worst relative error
//   |analytic_i - central_i| / max(1e-8, |analytic_i| + |central_i|).
inline double check_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& theta, const std::vector<double>& analytic,
    double h = 1e-5) {
  if (analytic.size() != theta.size())
    throw DimensionError("check_gradient: analytic grad size " +
                         std::to_string(analytic.size()) + " vs theta size " +
                         std::to_string(theta.size()));
  std::vector<double> point = theta;
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double fp = f(point);
    point[i] = saved - h;
    const double fm = f(point);
    point[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("check_gradient: non-finite f at coordinate " +
                         std::to_string(i));
    const double central = (fp - fm) / (2.0 * h);
    const double err = std::fabs(analytic[i] - central) /
                       std::max(1e-8, std::fabs(analytic[i]) + std::fabs(central));
    if (err > worst) worst = err;
  }
  return worst;
}

} // namespace aemil

#endif
