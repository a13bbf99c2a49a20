#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/model.hpp"
#include "trunc_ellipse/quadrature.hpp"
#include "trunc_ellipse/radial.hpp"
#include "trunc_ellipse/rng.hpp"
#include "trunc_ellipse/special.hpp"

namespace trunc_ellipse {

enum class RectMethod { closed_form_1d, quadrature_2d_3d, qmc };

inline const char* to_string(RectMethod m) {
  switch (m) {
    case RectMethod::closed_form_1d: return "closed_form_1d";
    case RectMethod::quadrature_2d_3d: return "quadrature_2d_3d";
    case RectMethod::qmc: return "qmc";
  }
  return "unknown";
}

struct RectProbResult {
  double value = 0.0;
  double abs_error_estimate = 0.0;
  RectMethod method = RectMethod::closed_form_1d;
  long n_evaluations = 0;
  bool accuracy_met = true;
};

struct RectProbOptions {
  std::uint64_t seed = 0;
  double quad_abs_tol = 1e-10;
  double qmc_abs_tol = 1e-6;
  long max_evaluations = 20'000'000;
  int qmc_replicates = 12;
  /// Use the lattice rule even for p in {2, 3}.
  bool force_qmc = false;
};

namespace detail {

/// Lower limits at or below mean - 40 sd carry no mass representable in double.
constexpr double kTailSd = 40.0;

inline std::uint64_t hash_doubles(std::uint64_t h, const double* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &data[i], sizeof bits);
    h = mix64(h ^ (bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
  }
  return h;
}

/// E[Z | Z <= b] for standard normal Z.
inline double truncated_mean_below(double b) {
  const double cdf = normal_cdf(b);
  if (cdf < 1e-300) return b;
  return -normal_pdf(b) / cdf;
}

/// Cholesky factor of Sigma with the variable ordering that integrates the most
/// constrained coordinate first (Genz-Bretz prioritization). Upper limits `b`
/// are permuted in place.
struct PivotedFactor {
  Matrix l;
  Vector b;
};

inline PivotedFactor pivoted_cholesky(Matrix c, Vector b) {
  const int p = static_cast<int>(b.size());
  Matrix l = Matrix::Zero(p, p);
  Vector y = Vector::Zero(p);
  for (int i = 0; i < p; ++i) {
    int best = i;
    double best_prob = 2.0;
    for (int j = i; j < p; ++j) {
      double var = c(j, j);
      double shift = 0.0;
      for (int k = 0; k < i; ++k) {
        var -= l(j, k) * l(j, k);
        shift += l(j, k) * y(k);
      }
      const double prob = normal_cdf((b(j) - shift) / std::sqrt(std::max(var, 1e-300)));
      if (prob < best_prob) {
        best_prob = prob;
        best = j;
      }
    }
    if (best != i) {
      c.row(i).swap(c.row(best));
      c.col(i).swap(c.col(best));
      l.row(i).swap(l.row(best));
      std::swap(b(i), b(best));
    }
    double d = c(i, i);
    for (int k = 0; k < i; ++k) d -= l(i, k) * l(i, k);
    if (!(d > 0.0)) throw DomainError("rect_prob: covariance matrix is not positive definite");
    l(i, i) = std::sqrt(d);
    for (int j = i + 1; j < p; ++j) {
      double s = c(j, i);
      for (int k = 0; k < i; ++k) s -= l(j, k) * l(i, k);
      l(j, i) = s / l(i, i);
    }
    double shift = 0.0;
    for (int k = 0; k < i; ++k) shift += l(i, k) * y(k);
    y(i) = truncated_mean_below((b(i) - shift) / l(i, i));
  }
  return {l, b};
}

/// Integration range in z for the integral of phi(z) * (...) over z <= hi.
inline std::pair<double, double> z_range(double hi) {
  hi = std::min(hi, 10.0);
  return {std::min(hi, 0.0) - 10.0, hi};
}

inline RectProbResult rect_prob_quadrature(const PivotedFactor& f, double rel_tol) {
  const int p = static_cast<int>(f.b.size());
  const Matrix& l = f.l;
  const Vector& b = f.b;
  RectProbResult res;
  res.method = RectMethod::quadrature_2d_3d;
  long evals = 0;
  double inner_err = 0.0;

  auto last = [&](double shift) {
    ++evals;
    return normal_cdf((b(p - 1) - shift) / l(p - 1, p - 1));
  };

  QuadResult outer;
  const auto [lo1, hi1] = z_range(b(0) / l(0, 0));
  if (p == 2) {
    outer = integrate([&](double z1) { return normal_pdf(z1) * last(l(1, 0) * z1); }, lo1, hi1, rel_tol);
  } else {
    outer = integrate(
        [&](double z1) {
          const auto [lo2, hi2] = z_range((b(1) - l(1, 0) * z1) / l(1, 1));
          const QuadResult inner = integrate(
              [&](double z2) { return normal_pdf(z2) * last(l(2, 0) * z1 + l(2, 1) * z2); }, lo2, hi2,
              rel_tol);
          inner_err = std::max(inner_err, inner.error);
          return normal_pdf(z1) * inner.value;
        },
        lo1, hi1, rel_tol);
  }
  res.value = std::clamp(outer.value, 0.0, 1.0);
  res.abs_error_estimate = outer.error + inner_err;
  res.n_evaluations = evals;
  return res;
}

inline constexpr std::array<double, 20> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                                   31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

/// Randomly shifted Richtmyer lattice with the tent (baker's) periodization.
/// Calls `f(point)` for N points of dimension `dim` per replicate, doubling N
/// until three standard errors across replicates fall below `abs_tol`.
template <class Integrand>
RectProbResult lattice_qmc(int dim, Integrand&& f, const RectProbOptions& opt, std::uint64_t seed) {
  if (dim > static_cast<int>(kPrimes.size())) throw DomainError("rect_prob: dimension above 20 is not supported");
  RectProbResult res;
  res.method = RectMethod::qmc;
  const int reps = std::max(opt.qmc_replicates, 2);
  std::vector<double> alpha(dim);
  for (int j = 0; j < dim; ++j) {
    const double s = std::sqrt(kPrimes[j]);
    alpha[j] = s - std::floor(s);
  }
  std::vector<double> point(dim);
  long n = 1024;
  for (int round = 0;; ++round) {
    std::vector<double> est(reps, 0.0);
    for (int r = 0; r < reps; ++r) {
      CounterRng rng(seed, static_cast<std::uint64_t>(round) * 1000 + r);
      std::vector<double> shift(dim);
      for (double& s : shift) s = rng.uniform();
      double sum = 0.0;
      for (long k = 1; k <= n; ++k) {
        for (int j = 0; j < dim; ++j) {
          double x = k * alpha[j] + shift[j];
          x -= std::floor(x);
          point[j] = std::abs(2.0 * x - 1.0);
        }
        sum += f(point);
      }
      est[r] = sum / static_cast<double>(n);
    }
    res.n_evaluations += n * reps;
    double mean = 0.0;
    for (double e : est) mean += e;
    mean /= reps;
    double var = 0.0;
    for (double e : est) var += (e - mean) * (e - mean);
    var /= (reps - 1.0) * reps;
    res.value = mean;
    res.abs_error_estimate = 3.0 * std::sqrt(var);
    if (res.abs_error_estimate <= opt.qmc_abs_tol) break;
    if (res.n_evaluations + 2 * n * reps > opt.max_evaluations) {
      res.accuracy_met = false;
      break;
    }
    n *= 2;
  }
  return res;
}

inline RectProbResult rect_prob_qmc(const PivotedFactor& f, const RectProbOptions& opt, std::uint64_t seed) {
  const int p = static_cast<int>(f.b.size());
  const Matrix& l = f.l;
  const Vector& b = f.b;
  const double e0 = normal_cdf(b(0) / l(0, 0));
  std::vector<double> y(p);
  auto integrand = [&](const std::vector<double>& w) {
    double e = e0;
    double prod = e0;
    for (int i = 1; i < p; ++i) {
      y[i - 1] = normal_quantile(std::clamp(w[i - 1] * e, 1e-300, 1.0 - 1e-16));
      double shift = 0.0;
      for (int k = 0; k < i; ++k) shift += l(i, k) * y[k];
      e = normal_cdf((b(i) - shift) / l(i, i));
      prod *= e;
      if (prod == 0.0) return 0.0;
    }
    return prod;
  };
  RectProbResult res = lattice_qmc(p - 1, integrand, opt, seed);
  res.value = std::clamp(res.value, 0.0, 1.0);
  return res;
}

}  // namespace detail

/// P(X >= lower) for X ~ N(mean, sigma). Entries of `lower` may be -inf.
inline RectProbResult rect_prob(const Vector& mean, const Matrix& sigma, const Vector& lower,
                                const RectProbOptions& opt = {}) {
  const int p = static_cast<int>(mean.size());
  if (p < 1 || sigma.rows() != p || sigma.cols() != p || lower.size() != p)
    throw DomainError("rect_prob: inconsistent dimensions");
  if (p > 20) throw DomainError("rect_prob: dimension above 20 is not supported");
  for (int i = 0; i < p; ++i)
    if (std::isnan(lower(i)) || lower(i) == kInf) throw DomainError("rect_prob: lower bounds must be finite or -inf");

  // Coordinates whose bound lies below mean - 40 sd integrate to one and are
  // marginalized out exactly.
  std::vector<int> active;
  for (int i = 0; i < p; ++i) {
    if (!(sigma(i, i) > 0.0)) throw DomainError("rect_prob: covariance matrix is not positive definite");
    if (lower(i) > mean(i) - detail::kTailSd * std::sqrt(sigma(i, i))) active.push_back(i);
  }
  const int q = static_cast<int>(active.size());
  if (q == 0) return {1.0, 0.0, RectMethod::closed_form_1d, 0, true};

  // P(X >= lower) = P(Y <= mean - lower) with Y ~ N(0, sigma)
  Vector b(q);
  Matrix s(q, q);
  for (int i = 0; i < q; ++i) {
    b(i) = mean(active[i]) - lower(active[i]);
    for (int j = 0; j < q; ++j) s(i, j) = sigma(active[i], active[j]);
  }

  if (q == 1) {
    RectProbResult r;
    r.value = normal_cdf(b(0) / std::sqrt(s(0, 0)));
    r.abs_error_estimate = 1e-16 * r.value;
    r.method = RectMethod::closed_form_1d;
    r.n_evaluations = 1;
    return r;
  }

  const detail::PivotedFactor f = detail::pivoted_cholesky(s, b);
  if (q <= 3 && !opt.force_qmc) {
    RectProbResult r = detail::rect_prob_quadrature(f, 1e-12);
    r.accuracy_met = r.abs_error_estimate <= opt.quad_abs_tol;
    return r;
  }
  std::uint64_t seed = mix64(opt.seed);
  seed = detail::hash_doubles(seed, mean.data(), mean.size());
  seed = detail::hash_doubles(seed, sigma.data(), sigma.size());
  seed = detail::hash_doubles(seed, lower.data(), lower.size());
  return detail::rect_prob_qmc(f, opt, seed);
}

namespace detail {

/// log of the integral of g(z'z) over {z : L z >= a} for p <= 2 by nested quadrature,
/// with z measured in units of the radial scale `s`.
inline double log_whitened_mass_quadrature(const GeneratorSpec& gen, const Matrix& l, const Vector& a, double s) {
  const int p = static_cast<int>(a.size());
  auto g = [&](double t) {
    const double lg = gen.log_g(std::max(t, 1e-300));
    return lg == -kInf ? 0.0 : std::exp(lg);
  };
  // integral over [lo, inf) of h, split at 0 where the generator peaks
  auto half_line = [](auto&& h, double lo) {
    if (lo == -kInf) return integrate(h, -kInf, 0.0, 1e-11).value + integrate(h, 0.0, kInf, 1e-11).value;
    if (lo < 0.0) return integrate(h, lo, 0.0, 1e-11).value + integrate(h, 0.0, kInf, 1e-11).value;
    return integrate(h, lo, kInf, 1e-11).value;
  };
  double mass;
  if (p == 1) {
    const double lo = std::isfinite(a(0)) ? a(0) / (l(0, 0) * s) : -kInf;
    mass = half_line([&](double u) { return g(s * s * u * u); }, lo);
    mass *= s;
  } else {
    const double lo1 = std::isfinite(a(0)) ? a(0) / (l(0, 0) * s) : -kInf;
    auto outer = [&](double u1) {
      const double lo2 = std::isfinite(a(1)) ? (a(1) / s - l(1, 0) * u1) / l(1, 1) : -kInf;
      return half_line([&](double u2) { return g(s * s * (u1 * u1 + u2 * u2)); }, lo2);
    };
    mass = half_line(outer, lo1) * s * s;
  }
  if (!std::isfinite(mass) || !(mass > 0.0))
    throw IntegrationError("normalizing constant: integral of the generator over the truncation region is " +
                           std::string(std::isfinite(mass) ? "zero" : "not finite"));
  return std::log(mass);
}

/// P(X >= c) for X elliptical with the given radial law, by lattice QMC over
/// directions with the radial CDF integrated exactly along each ray.
inline RectProbResult elliptical_orthant_qmc(const RadialDistribution& radial, const Matrix& l, const Vector& a,
                                             const RectProbOptions& opt, std::uint64_t seed) {
  // Over a direction u the mass is F(hi) - F(lo) on the ray segment inside the
  // region. The normal law sees the same directions with a chi radius, and its
  // mass is a rectangle probability; subtracting its integrand removes the jumps
  // across cone faces with a_i = 0 and most of the variance.
  const int p = static_cast<int>(a.size());
  const double half_p = 0.5 * p;
  auto chi_cdf = [&](double r) { return r == kInf ? 1.0 : boost::math::gamma_p(half_p, 0.5 * r * r); };
  Vector z(p), v(p);
  auto integrand = [&](const std::vector<double>& w) {
    if (p == 3) {
      // area-preserving cylinder map: uniform height and angle
      const double t = 2.0 * w[0] - 1.0, phi = 2.0 * std::numbers::pi * w[1];
      const double rho = std::sqrt(std::max(0.0, 1.0 - t * t));
      z << rho * std::cos(phi), rho * std::sin(phi), t;
    } else {
      for (int j = 0; j < p; ++j) z(j) = normal_quantile(std::clamp(w[j], 1e-300, 1.0 - 1e-16));
      const double norm = z.norm();
      if (!(norm > 0.0)) return 0.0;
      z /= norm;
    }
    v.noalias() = l * z;
    double lo = 0.0, hi = kInf;
    for (int i = 0; i < p; ++i) {
      if (!std::isfinite(a(i))) continue;
      if (v(i) > 0.0) lo = std::max(lo, a(i) / v(i));
      else if (v(i) < 0.0) hi = std::min(hi, a(i) / v(i));
      else if (a(i) > 0.0) return 0.0;
    }
    if (!(hi > lo)) return 0.0;
    const double f = (hi == kInf ? 1.0 : radial.cdf(hi)) - radial.cdf(lo);
    return f - (chi_cdf(hi) - chi_cdf(lo));
  };
  RectProbResult diff = lattice_qmc(p == 3 ? 2 : p, integrand, opt, seed);
  RectProbOptions nopt = opt;
  nopt.seed = seed;
  const RectProbResult normal = rect_prob(Vector::Zero(p), l * l.transpose(), a, nopt);
  diff.value = std::clamp(diff.value + normal.value, 0.0, 1.0);
  diff.abs_error_estimate += normal.abs_error_estimate;
  diff.n_evaluations += normal.n_evaluations;
  diff.accuracy_met = diff.accuracy_met && normal.accuracy_met;
  return diff;
}

}  // namespace detail

/// Method used by `norm_const` for non-normal generators.
enum class EllipticalMassMethod { automatic, quadrature, qmc };

/// log C, where 1/C is the integral of the (unnormalized) density over {w >= c}.
inline double compute_log_norm_const(const TruncatedEllipticalModel& model, const RectProbOptions& opt = {},
                                     EllipticalMassMethod method = EllipticalMassMethod::automatic) {
  const int p = model.dimension();
  if (model.is_normal()) {
    const RectProbResult r = rect_prob(model.mu(), model.sigma(), model.c(), opt);
    if (!(r.value > 0.0) || !std::isfinite(r.value))
      throw IntegrationError("normalizing constant: truncation region has zero probability");
    return -(0.5 * p * kLog2Pi + 0.5 * model.log_det_sigma() + std::log(r.value));
  }
  const GeneratorSpec& gen = model.generator();
  const double log_radial = radial_log_normalizer(gen, p);  // throws on divergence
  const Vector a = model.c() - model.mu();
  const bool use_quad =
      method == EllipticalMassMethod::quadrature || (method == EllipticalMassMethod::automatic && p <= 2);
  if (use_quad) {
    if (p > 2) throw UnsupportedOperation("normalizing constant: quadrature path supports p <= 2 only");
    const double s = detail::radial_scale(gen, p);
    return -(0.5 * model.log_det_sigma() + detail::log_whitened_mass_quadrature(gen, model.chol_lower(), a, s));
  }
  const RadialDistribution radial(gen, p);
  std::uint64_t seed = mix64(opt.seed ^ 0x5bd1e995ULL);
  seed = detail::hash_doubles(seed, model.mu().data(), model.mu().size());
  seed = detail::hash_doubles(seed, model.sigma().data(), model.sigma().size());
  seed = detail::hash_doubles(seed, model.c().data(), model.c().size());
  // the direction integrand has kinks, so convergence is about 1/N; target 1e-5
  RectProbOptions qopt = opt;
  qopt.qmc_abs_tol = std::max(opt.qmc_abs_tol, 1e-5);
  const RectProbResult prob = detail::elliptical_orthant_qmc(radial, model.chol_lower(), a, qopt, seed);
  if (!(prob.value > 0.0))
    throw IntegrationError("normalizing constant: truncation region has zero probability");
  return -(0.5 * model.log_det_sigma() + log_sphere_area(p) + log_radial + std::log(prob.value));
}

/// log C for the model, computed once and cached on the model.
inline double norm_const(const TruncatedEllipticalModel& model) {
  return model.cached_log_norm_const([](const TruncatedEllipticalModel& m) { return compute_log_norm_const(m); });
}

}  // namespace trunc_ellipse
