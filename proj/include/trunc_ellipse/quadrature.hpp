#pragma once

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace trunc_ellipse {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  // absolute error estimate
  double l1 = 0.0;     // integral of |f|

  bool converged(double rel_tol) const {
    return std::isfinite(value) && error <= rel_tol * l1 * 10.0 + 1e-300;
  }
};

/// Adaptive 15-point Gauss-Kronrod quadrature on [a, b]; either bound may be infinite.
template <class F>
QuadResult integrate(F&& f, double a, double b, double rel_tol = 1e-12,
                     unsigned max_depth = 15) {
  QuadResult r;
  if (a == b) return r;
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  if (std::isfinite(a) && std::isfinite(b)) {
    // Boost compares the error on [-1, 1] against a tolerance scaled by the
    // interval half-width, so short intervals never converge; integrate on
    // [-1, 1] directly.
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    auto g = [&](double t) { return half * f(mid + half * t); };
    r.value = GK::integrate(g, -1.0, 1.0, max_depth, rel_tol, &r.error, &r.l1);
    return r;
  }
  r.value = GK::integrate(f, a, b, max_depth, rel_tol, &r.error, &r.l1);
  return r;
}

}  // namespace trunc_ellipse
