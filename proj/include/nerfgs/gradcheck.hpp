#pragma once

#include <functional>
#include <vector>

#include "nerfgs/common.hpp"

namespace nerfgs {

// A scalar map with an analytic gradient, both evaluated at an arbitrary
// point. Used by the finite-difference harness below and by the test suites.
struct DifferentiableScalar {
  std::function<real(const std::vector<real>&)> value;
  std::function<std::vector<real>(const std::vector<real>&)> gradient;
};

// max_i |analytic_i - central_diff_i| / max(1, |analytic_i|), with
// per-coordinate step h * max(1, |x_i|).
inline real finite_diff_check(const DifferentiableScalar& f, const std::vector<real>& point, real h) {
  std::vector<real> analytic = f.gradient(point);
  require(analytic.size() == point.size(), Errc::dimension_mismatch,
          "finite_diff_check: gradient length mismatch");
  std::vector<real> x = point;
  real worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    real step = h * std::max(real(1), std::abs(point[i]));
    x[i] = point[i] + step;
    real fp = f.value(x);
    x[i] = point[i] - step;
    real fm = f.value(x);
    x[i] = point[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      fail(Errc::non_finite, "finite_diff_check: non-finite evaluation at coordinate " + std::to_string(i));
    real numeric = (fp - fm) / (2 * step);
    real err = std::abs(analytic[i] - numeric) / std::max(real(1), std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace nerfgs
