#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <variant>
#include <vector>

#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/interp.hpp"
#include "trunc_ellipse/model.hpp"
#include "trunc_ellipse/quadrature.hpp"

namespace trunc_ellipse {

/// log of the surface area of the unit sphere in R^p.
inline double log_sphere_area(int p) {
  return std::log(2.0) + 0.5 * p * std::log(std::numbers::pi) - std::lgamma(0.5 * p);
}

namespace detail {

/// log of the radial kernel r^(p-1) g(r^2).
inline double log_radial_kernel(const GeneratorSpec& gen, int dim, double r) {
  if (r <= 0.0) return -kInf;
  return (dim - 1) * std::log(r) + gen.log_g(r * r);
}

/// Location of the peak of r * kernel(r) over a log grid; the natural length scale of R.
inline double radial_scale(const GeneratorSpec& gen, int dim) {
  if (const auto* tab = std::get_if<gen::Tabulated>(&gen.params())) {
    double best = -kInf, arg = 1.0;
    for (std::size_t i = 0; i < tab->t.size(); ++i) {
      const double r = std::sqrt(tab->t[i]);
      if (r <= 0.0) continue;
      const double v = dim * std::log(r) + gen.log_g(tab->t[i]);
      if (v > best) {
        best = v;
        arg = r;
      }
    }
    return arg;
  }
  double best = -kInf, arg = 1.0;
  for (int k = -120; k <= 120; ++k) {
    const double r = std::pow(10.0, k / 10.0);
    const double v = std::log(r) + log_radial_kernel(gen, dim, r);
    if (std::isfinite(v) && v > best) {
      best = v;
      arg = r;
    }
  }
  return arg;
}

/// Break points (in r) that a quadrature over the radial kernel must respect.
inline std::vector<double> radial_breaks(const GeneratorSpec& gen) {
  std::vector<double> br;
  if (const auto* tab = std::get_if<gen::Tabulated>(&gen.params()))
    for (double t : tab->t) br.push_back(std::sqrt(t));
  return br;
}

}  // namespace detail

/// Integral of r^m * r^(p-1) g(r^2) over [a, b], divided by exp(log_shift).
/// `b` may be +inf. The integral is taken in u = r / scale, split at r = scale;
/// tabulated generators are integrated knot by knot.
inline QuadResult radial_integral(const GeneratorSpec& gen, int dim, double m, double a, double b,
                                  double log_shift = 0.0, double rel_tol = 1e-12, double scale = 1.0) {
  if (const auto* tab = std::get_if<gen::Tabulated>(&gen.params()))
    b = std::min(b, std::sqrt(tab->t.back()));
  if (!(b > a)) return {};
  auto f = [&](double u) {
    const double r = scale * u;
    const double lk = detail::log_radial_kernel(gen, dim, r);
    if (lk == -kInf) return 0.0;
    return scale * std::exp(m * std::log(r) + lk - log_shift);
  };
  std::vector<double> cuts{a};
  for (double x : detail::radial_breaks(gen))
    if (x > a && x < b) cuts.push_back(x);
  if (scale > a && scale < b) cuts.push_back(scale);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  QuadResult total;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    const QuadResult q = integrate(f, cuts[i] / scale, cuts[i + 1] / scale, rel_tol);
    total.value += q.value;
    total.error += q.error;
    total.l1 += q.l1;
  }
  return total;
}

/// log of the integral of r^(p-1) g(r^2) over (0, inf). Throws IntegrationError
/// when the integral diverges or cannot be evaluated.
inline double radial_log_normalizer(const GeneratorSpec& gen, int dim) {
  if (const auto* k = std::get_if<gen::Kotz>(&gen.params()); k && 2.0 * k->n + dim - 2.0 <= 0.0)
    throw IntegrationError("generator not integrable: radial integral of " + gen.describe() +
                           " diverges at r = 0 in dimension " + std::to_string(dim));
  const double s = detail::radial_scale(gen, dim);
  const double shift = detail::log_radial_kernel(gen, dim, s);
  const double shift_ok = std::isfinite(shift) ? shift : 0.0;
  QuadResult q = radial_integral(gen, dim, 0.0, 0.0, kInf, shift_ok, 1e-11, s);
  if (!std::isfinite(q.value) || !(q.value > 0.0) || q.error > 1e-6 * q.value)
    throw IntegrationError("generator not integrable: radial integral of " + gen.describe() +
                           " diverges or fails to converge in dimension " + std::to_string(dim));
  return std::log(q.value) + shift_ok;
}

/// Numeric E[R^m] for the radial law with density proportional to r^(p-1) g(r^2).
inline double radial_moment_numeric(const GeneratorSpec& gen, int dim, double m) {
  const double log_norm = radial_log_normalizer(gen, dim);
  const double s = detail::radial_scale(gen, dim);
  const QuadResult q = radial_integral(gen, dim, m, 0.0, kInf, log_norm, 1e-11, s);
  if (!std::isfinite(q.value) || q.error > 1e-6 * std::abs(q.value))
    throw IntegrationError("moment does not exist: E[R^" + std::to_string(m) + "] diverges for " +
                           gen.describe());
  return q.value;
}

/// Tabulated distribution of the radial variable R, density proportional to
/// r^(p-1) g(r^2): 4096 log-spaced knots covering all but 1e-12 of the mass,
/// cumulative masses by Gauss-Kronrod per segment, and monotone cubic
/// interpolation for both the CDF and its inverse.
class RadialDistribution {
 public:
  static constexpr int kKnots = 4096;

  RadialDistribution(const GeneratorSpec& gen, int dim) : dim_(dim) {
    log_norm_ = radial_log_normalizer(gen, dim);
    const double s = detail::radial_scale(gen, dim);

    auto mass = [&](double a, double b) {
      return radial_integral(gen, dim, 0.0, a, b, log_norm_, 1e-10, s).value;
    };

    double r_hi;
    if (const auto* tab = std::get_if<gen::Tabulated>(&gen.params())) {
      r_hi = std::sqrt(tab->t.back());
    } else {
      r_hi = s;
      while (mass(r_hi, kInf) > 1e-12) {
        r_hi *= 2.0;
        if (r_hi > s * 1e12)
          throw IntegrationError("radial tabulation fails to reach 1-1e-12 of the mass for " +
                                 gen.describe());
      }
    }
    double r_lo = std::min(s, r_hi);
    while (r_lo > r_hi * 1e-14 && mass(0.0, r_lo) > 1e-12) r_lo *= 0.5;

    std::vector<double> knots{0.0};
    const double step = std::log(r_hi / r_lo) / (kKnots - 1);
    for (int i = 0; i < kKnots; ++i) knots.push_back(r_lo * std::exp(step * i));
    knots.back() = r_hi;
    for (double b : detail::radial_breaks(gen))
      if (b > 0.0 && b < r_hi) knots.push_back(b);
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

    std::vector<double> cdf(knots.size(), 0.0);
    for (std::size_t i = 1; i < knots.size(); ++i) cdf[i] = cdf[i - 1] + mass(knots[i - 1], knots[i]);
    const double total = cdf.back();
    if (!(total > 0.0) || !std::isfinite(total))
      throw IntegrationError("radial tabulation failed for " + gen.describe());
    for (double& f : cdf) f = std::min(f / total, 1.0);

    cdf_ = MonotoneCubic(knots, cdf);

    // inverse: drop flat runs, keeping the right end of interior/low runs and
    // the left end of the final run at F = 1
    std::vector<double> fx, rx;
    for (std::size_t i = 0; i < knots.size(); ++i) {
      if (!fx.empty() && cdf[i] <= fx.back()) {
        if (fx.back() < 1.0) rx.back() = knots[i];
        continue;
      }
      fx.push_back(cdf[i]);
      rx.push_back(knots[i]);
    }
    if (fx.size() < 2) throw IntegrationError("radial tabulation is degenerate for " + gen.describe());
    quantile_ = MonotoneCubic(fx, rx);
  }

  int dimension() const { return dim_; }
  double log_normalizer() const { return log_norm_; }
  double cdf(double r) const { return r <= 0.0 ? 0.0 : cdf_(r); }
  double quantile(double u) const { return quantile_(u); }

 private:
  int dim_;
  double log_norm_ = 0.0;
  MonotoneCubic cdf_;
  MonotoneCubic quantile_;
};

}  // namespace trunc_ellipse
