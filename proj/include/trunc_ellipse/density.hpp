#pragma once

#include <cmath>

#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/model.hpp"
#include "trunc_ellipse/mvnprob.hpp"
#include "trunc_ellipse/special.hpp"

namespace trunc_ellipse {

struct QuadDecomposition {
  double q_full = 0.0;
  double q1 = 0.0;  // (w1-mu1)' S11^-1 (w1-mu1)
  double q2 = 0.0;  // (w2-m)' S22.1^-1 (w2-m)
  Vector cond_mean_shift;  // m = mu2 + S21 S11^-1 (w1-mu1)
};

/// (w-mu)' Sigma^-1 (w-mu) via the cached Cholesky factor.
inline double quad_form(const TruncatedEllipticalModel& model, const Vector& w) {
  if (w.size() != model.dimension()) throw DomainError("quad_form: w has the wrong length");
  const Vector z = model.cholesky().matrixL().solve(w - model.mu());
  return z.squaredNorm();
}

inline QuadDecomposition decompose_quad(const TruncatedEllipticalModel& model, const PartitionSpec& part,
                                        const Vector& w1, const Vector& w2) {
  if (w1.size() != part.p1 || w2.size() != part.p2 || part.p1 + part.p2 != model.dimension())
    throw DomainError("decompose_quad: block lengths do not match the partition");
  const Vector mu1 = model.mu().head(part.p1);
  const Vector mu2 = model.mu().tail(part.p2);
  QuadDecomposition d;
  const Vector r1 = w1 - mu1;
  const Vector z1 = part.s11_llt.matrixL().solve(r1);
  d.q1 = z1.squaredNorm();
  d.cond_mean_shift = mu2 + part.regression.transpose() * r1;
  const Vector z2 = part.schur_llt.matrixL().solve(w2 - d.cond_mean_shift);
  d.q2 = z2.squaredNorm();
  Vector w(part.p1 + part.p2);
  w << w1, w2;
  d.q_full = quad_form(model, w);
  return d;
}

inline bool in_support(const TruncatedEllipticalModel& model, const Vector& w) {
  for (int i = 0; i < model.dimension(); ++i)
    if (w(i) < model.c()(i)) return false;
  return true;
}

/// log of the truncated density at w; -inf outside {w >= c}.
inline double log_pdf(const TruncatedEllipticalModel& model, const Vector& w) {
  if (w.size() != model.dimension()) throw DomainError("log_pdf: w has the wrong length");
  if (!in_support(model, w)) return -kInf;
  const double q = quad_form(model, w);
  const double log_c = norm_const(model);
  if (model.is_normal()) return log_c - 0.5 * q;
  return log_c + model.generator().log_g(q);
}

inline double pdf(const TruncatedEllipticalModel& model, const Vector& w) { return std::exp(log_pdf(model, w)); }

/// Gradient of log_pdf in the interior of the support (normal and elliptical kinds).
inline Vector grad_log_pdf(const TruncatedEllipticalModel& model, const Vector& w) {
  const Vector r = model.cholesky().solve(w - model.mu());
  if (model.is_normal()) return -r;
  const double q = (w - model.mu()).dot(r);
  return 2.0 * model.generator().dlog_g(q) * r;
}

namespace detail {

inline void require_normal(const TruncatedEllipticalModel& model, const char* op) {
  if (!model.is_normal())
    throw UnsupportedOperation(std::string(op) + ": closed form exists for the normal generator only, got " +
                               model.generator().describe());
}

}  // namespace detail

/// log of the marginal density of W1 under the truncated normal model.
inline double log_marginal_pdf_w1(const TruncatedEllipticalModel& model, const PartitionSpec& part, const Vector& w1,
                                  const RectProbOptions& opt = {}) {
  detail::require_normal(model, "marginal_pdf_w1");
  if (w1.size() != part.p1) throw DomainError("marginal_pdf_w1: w1 has the wrong length");
  for (int i = 0; i < part.p1; ++i)
    if (w1(i) < model.c()(i)) return -kInf;
  const Vector r1 = w1 - model.mu().head(part.p1);
  const double q1 = part.s11_llt.matrixL().solve(r1).squaredNorm();
  const Vector m = model.mu().tail(part.p2) + part.regression.transpose() * r1;
  const double log_det_schur = 2.0 * Matrix(part.schur_llt.matrixL()).diagonal().array().log().sum();
  const RectProbResult pr = rect_prob(m, part.schur, model.c().tail(part.p2), opt);
  if (!(pr.value > 0.0)) return -kInf;
  return norm_const(model) + 0.5 * part.p2 * kLog2Pi + 0.5 * log_det_schur - 0.5 * q1 + std::log(pr.value);
}

inline double marginal_pdf_w1(const TruncatedEllipticalModel& model, const PartitionSpec& part, const Vector& w1,
                              const RectProbOptions& opt = {}) {
  return std::exp(log_marginal_pdf_w1(model, part, w1, opt));
}

/// Density of W2 given W1 = w1 under the truncated normal model: a N(m, S22.1)
/// density truncated to {w2 >= c2}, m = mu2 + S21 S11^-1 (w1 - mu1).
inline double log_conditional_pdf_w2_given_w1(const TruncatedEllipticalModel& model, const PartitionSpec& part,
                                              const Vector& w1, const Vector& w2, const RectProbOptions& opt = {}) {
  detail::require_normal(model, "conditional_pdf_w2_given_w1");
  if (w1.size() != part.p1 || w2.size() != part.p2)
    throw DomainError("conditional_pdf_w2_given_w1: block lengths do not match the partition");
  for (int i = 0; i < part.p1; ++i)
    if (w1(i) < model.c()(i)) throw DomainError("conditional_pdf_w2_given_w1: w1 is outside the support");
  for (int i = 0; i < part.p2; ++i)
    if (w2(i) < model.c()(part.p1 + i)) return -kInf;
  const Vector r1 = w1 - model.mu().head(part.p1);
  const Vector m = model.mu().tail(part.p2) + part.regression.transpose() * r1;
  const double q2 = part.schur_llt.matrixL().solve(w2 - m).squaredNorm();
  const double log_det_schur = 2.0 * Matrix(part.schur_llt.matrixL()).diagonal().array().log().sum();
  const RectProbResult pr = rect_prob(m, part.schur, model.c().tail(part.p2), opt);
  return -0.5 * q2 - 0.5 * part.p2 * kLog2Pi - 0.5 * log_det_schur - std::log(pr.value);
}

inline double conditional_pdf_w2_given_w1(const TruncatedEllipticalModel& model, const PartitionSpec& part,
                                          const Vector& w1, const Vector& w2, const RectProbOptions& opt = {}) {
  return std::exp(log_conditional_pdf_w2_given_w1(model, part, w1, w2, opt));
}

}  // namespace trunc_ellipse
