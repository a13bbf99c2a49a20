#pragma once

#include <cmath>
#include <numbers>
#include <variant>

#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/model.hpp"
#include "trunc_ellipse/radial.hpp"

namespace trunc_ellipse {

struct RadialMoments {
  double e_r = 0.0;
  double e_r2 = 0.0;
  double ratio_b = 0.0;  // E[R^2] / (E R)^2
};

struct HValues {
  double h1 = 0.0;
  double h2 = 0.0;
  double h3 = 0.0;
};

struct ZeroCorrSolution {
  double b_required = 0.0;
  double gamma_shape = 0.0;   // 1 / (b - 1); NaN when infeasible
  bool gamma_feasible = false;
};

namespace detail {

inline void check_rho(double rho, const char* op) {
  if (!(std::abs(rho) < 1.0)) throw DomainError(std::string(op) + ": |rho| must be < 1");
}

}  // namespace detail

/// Lower end of the angle range of the truncated region {x1 >= 0, x2 >= 0}
/// in the polar representation: atan(-rho / sqrt(1 - rho^2)).
inline double psi_star(double rho) {
  detail::check_rho(rho, "psi_star");
  return std::atan2(-rho, std::sqrt(1.0 - rho * rho));
}

/// Conditional expectations over Psi ~ U(psi*, pi/2), by exact antiderivatives:
/// h1 = E[rho cos^2 + s sin cos], h2 = E[cos], h3 = E[rho cos + s sin], s = sqrt(1-rho^2).
inline HValues h_functions(double rho) {
  detail::check_rho(rho, "h_functions");
  const double ps = psi_star(rho);
  const double s = std::sqrt(1.0 - rho * rho);
  const double len = 0.5 * std::numbers::pi - ps;
  const double sin_ps = std::sin(ps), cos_ps = std::cos(ps);
  const double sin2 = std::sin(2.0 * ps), cos2 = std::cos(2.0 * ps);
  HValues h;
  h.h1 = (rho * (0.25 * (std::numbers::pi - sin2) - 0.5 * ps) + s * 0.25 * (1.0 + cos2)) / len;
  h.h2 = (1.0 - sin_ps) / len;
  h.h3 = (rho * (1.0 - sin_ps) + s * cos_ps) / len;
  return h;
}

/// First two moments of the radial variable R with density proportional to
/// r^(dim-1) g(r^2). Closed forms for the analytic generators, quadrature otherwise.
inline RadialMoments radial_moments(const GeneratorSpec& generator, int dim = 2) {
  if (dim < 1) throw DomainError("radial_moments: dim must be >= 1");
  const GeneratorSpec gen = generator.with_dimension(dim);
  const double p = dim;
  RadialMoments m;
  const auto& params = gen.params();
  if (std::holds_alternative<gen::Normal>(params)) {
    // R is chi with p degrees of freedom
    m.e_r = std::sqrt(2.0) * std::exp(std::lgamma(0.5 * (p + 1)) - std::lgamma(0.5 * p));
    m.e_r2 = p;
  } else if (const auto* t = std::get_if<gen::StudentT>(&params)) {
    const double tau = t->dof;
    if (!(tau > 2.0))
      throw DomainError("moment does not exist: E[R^2] requires dof > 2 for student_t, got " + gen.describe());
    // R = sqrt(tau) |Z_p| / sqrt(chi2_tau)
    const double e_abs_z = std::sqrt(2.0) * std::exp(std::lgamma(0.5 * (p + 1)) - std::lgamma(0.5 * p));
    const double e_inv_chi = std::exp(std::lgamma(0.5 * (tau - 1)) - std::lgamma(0.5 * tau)) / std::sqrt(2.0);
    m.e_r = std::sqrt(tau) * e_abs_z * e_inv_chi;
    m.e_r2 = p * tau / (tau - 2.0);
  } else if (const auto* k = std::get_if<gen::Kotz>(&params)) {
    const double a = 2.0 * k->n + p - 2.0;
    if (!(a > 0.0)) throw IntegrationError("generator not integrable: " + gen.describe());
    auto moment = [&](double order) {
      return std::exp(std::lgamma((a + order) / (2.0 * k->s)) - std::lgamma(a / (2.0 * k->s)) -
                      order / (2.0 * k->s) * std::log(k->beta));
    };
    m.e_r = moment(1.0);
    m.e_r2 = moment(2.0);
  } else if (const auto* gr = std::get_if<gen::GammaRadial>(&params)) {
    // R ~ Gamma(shape + p - 2, scale)
    const double shape = gr->shape + p - 2.0;
    if (!(shape > 0.0)) throw IntegrationError("generator not integrable: " + gen.describe());
    m.e_r = shape * gr->scale;
    m.e_r2 = shape * (shape + 1.0) * gr->scale * gr->scale;
  } else {
    m.e_r = radial_moment_numeric(gen, dim, 1.0);
    m.e_r2 = radial_moment_numeric(gen, dim, 2.0);
  }
  m.ratio_b = m.e_r2 / (m.e_r * m.e_r);
  return m;
}

/// Cov(W1, W2) for a standardized bivariate elliptical law truncated at its centre.
inline double truncated_cov_at_mean(const GeneratorSpec& gen, double rho) {
  const HValues h = h_functions(rho);
  const RadialMoments m = radial_moments(gen, 2);
  return m.e_r2 * h.h1 - m.e_r * m.e_r * h.h2 * h.h3;
}

/// The moment ratio b that makes the centre-truncated covariance vanish, and the
/// gamma radial shape attaining it.
inline ZeroCorrSolution solve_zero_corr(double rho) {
  const HValues h = h_functions(rho);
  if (!(std::abs(h.h1) > 1e-300)) throw DomainError("solve_zero_corr: singular configuration, h1(rho) = 0");
  ZeroCorrSolution z;
  z.b_required = h.h2 * h.h3 / h.h1;
  z.gamma_feasible = z.b_required > 1.0;
  z.gamma_shape = z.gamma_feasible ? 1.0 / (z.b_required - 1.0) : std::nan("");
  return z;
}

}  // namespace trunc_ellipse
