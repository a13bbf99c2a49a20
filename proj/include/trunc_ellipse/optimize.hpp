#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "trunc_ellipse/model.hpp"

namespace trunc_ellipse {

struct NelderMeadOptions {
  double diameter_tol = 1e-8;  // stop when max ||x_i - x_best||_inf falls below this
  long max_evaluations = 20000;
};

struct NelderMeadResult {
  Vector x;
  double f = 0.0;
  bool converged = false;
  long iterations = 0;
  long evaluations = 0;
};

/// Derivative-free simplex minimization (standard coefficients 1, 2, 1/2, 1/2).
/// Non-finite objective values are treated as +inf.
template <class F>
NelderMeadResult nelder_mead(F&& f, const Vector& x0, const Vector& step, const NelderMeadOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  NelderMeadResult res;
  auto eval = [&](const Vector& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
  };
  std::vector<Vector> pts(n + 1, x0);
  std::vector<double> val(n + 1);
  for (int i = 0; i < n; ++i) pts[i + 1](i) += step(i);
  for (int i = 0; i <= n; ++i) val[i] = eval(pts[i]);

  std::vector<int> order(n + 1);
  Vector centroid(n), xr(n), xe(n), xc(n);
  for (;;) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return val[a] < val[b]; });
    const int best = order.front(), worst = order.back(), second = order[n - 1];

    double diam = 0.0;
    for (int i = 0; i <= n; ++i) diam = std::max(diam, (pts[i] - pts[best]).cwiseAbs().maxCoeff());
    if (diam < opt.diameter_tol && std::isfinite(val[best])) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= opt.max_evaluations) break;
    ++res.iterations;

    centroid.setZero();
    for (int i = 0; i <= n; ++i)
      if (i != worst) centroid += pts[i];
    centroid /= n;

    xr = centroid + (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < val[best]) {
      xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    xc = outside ? Vector(centroid + 0.5 * (xr - centroid)) : Vector(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : val[worst])) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (int i = 0; i <= n; ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      val[i] = eval(pts[i]);
    }
  }
  const int best = static_cast<int>(std::min_element(val.begin(), val.end()) - val.begin());
  res.x = pts[best];
  res.f = val[best];
  return res;
}

}  // namespace trunc_ellipse
