#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "trunc_ellipse/density.hpp"
#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/model.hpp"
#include "trunc_ellipse/mvnprob.hpp"
#include "trunc_ellipse/optimize.hpp"
#include "trunc_ellipse/sampling.hpp"
#include "trunc_ellipse/special.hpp"

namespace trunc_ellipse {

/// theta = (mu1, mu2, sigma1, sigma2, rho) of the truncated bivariate normal.
struct BivariateTheta {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double rho = 0.0;

  std::array<double, 5> to_array() const { return {mu1, mu2, sigma1, sigma2, rho}; }
  static BivariateTheta from_array(const std::array<double, 5>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }

  void validate() const {
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw DomainError("theta: sigma1 and sigma2 must be > 0");
    if (!(std::abs(rho) < 1.0)) throw DomainError("theta: |rho| must be < 1");
    if (!std::isfinite(mu1) || !std::isfinite(mu2)) throw DomainError("theta: mu must be finite");
  }

  TruncatedEllipticalModel model(const Vector& c) const {
    Vector mu(2);
    mu << mu1, mu2;
    return build_model(mu, bivariate_sigma(sigma1, sigma2, rho), c, GeneratorSpec::normal());
  }
};

struct FitReport {
  BivariateTheta theta_hat;
  double loglik = -kInf;
  bool converged = false;
  long n_iterations = 0;
  bool restricted = false;
  std::optional<std::array<double, 5>> std_errors;
};

struct LrtResult {
  double statistic = 0.0;
  double p_value = 1.0;
  FitReport fit_full;
  FitReport fit_null;
};

/// A fit failed to converge; carries whatever reports were produced.
class FitError : public Error {
 public:
  FitError(const std::string& what, FitReport full, FitReport null)
      : Error(what), full_(std::move(full)), null_(std::move(null)) {}
  const FitReport& fit_full() const noexcept { return full_; }
  const FitReport& fit_null() const noexcept { return null_; }

 private:
  FitReport full_, null_;
};

namespace detail {

inline void check_data(const Matrix& data, const Vector& c) {
  if (data.cols() != 2 || c.size() != 2) throw DomainError("inference: data must have two columns and c two entries");
  for (Eigen::Index j = 0; j < data.rows(); ++j) {
    if (!std::isfinite(data(j, 0)) || !std::isfinite(data(j, 1)))
      throw DataError("inference: row " + std::to_string(j) + " is not finite", static_cast<std::size_t>(j));
    if (data(j, 0) < c(0) || data(j, 1) < c(1))
      throw DataError("inference: row " + std::to_string(j) + " lies below the truncation point",
                      static_cast<std::size_t>(j));
  }
}

inline double log_normal_cdf(double x) { return log_erfc(-x / std::numbers::sqrt2) - std::numbers::ln2; }

/// Log-likelihood of a univariate normal truncated to [c, inf).
inline double univariate_loglik(const Eigen::Ref<const Vector>& x, double c, double mu, double sigma) {
  if (!(sigma > 0.0)) return -kInf;
  const double n = static_cast<double>(x.size());
  const double log_p = c == -kInf ? 0.0 : log_normal_cdf((mu - c) / sigma);
  const double ss = (x.array() - mu).square().sum() / (sigma * sigma);
  return -n * (0.5 * kLog2Pi + std::log(sigma) + log_p) - 0.5 * ss;
}

struct Moments {
  Vector mean;
  Vector sd;
  double corr = 0.0;
};

inline Moments sample_moments(const Matrix& data) {
  Moments m;
  m.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - m.mean.transpose();
  const double n = static_cast<double>(data.rows());
  const Matrix cov = centered.transpose() * centered / n;
  m.sd = cov.diagonal().cwiseSqrt();
  for (Eigen::Index i = 0; i < m.sd.size(); ++i)
    if (!(m.sd(i) > 0.0)) m.sd(i) = 1.0;
  if (cov.rows() == 2) m.corr = std::clamp(cov(0, 1) / (m.sd(0) * m.sd(1)), -0.95, 0.95);
  return m;
}

// jitters applied to (mu, log sigma, atanh rho), in units of sample sd for mu
inline constexpr std::array<std::array<double, 3>, 5> kJitter = {{
    {0.0, 0.0, 0.0},
    {0.5, 0.2, 0.3},
    {-0.5, -0.2, -0.3},
    {1.0, 0.4, 0.6},
    {-1.0, -0.1, -0.6},
}};

/// Runs Nelder-Mead from each start and keeps the lowest objective.
template <class F>
NelderMeadResult best_of_starts(F&& f, const std::vector<Vector>& starts, const Vector& step) {
  NelderMeadResult best;
  best.f = kInf;
  bool have = false;
  for (const Vector& s : starts) {
    NelderMeadResult r = nelder_mead(f, s, step);
    // one restart from the returned vertex guards against a collapsed simplex
    if (r.converged) {
      NelderMeadResult r2 = nelder_mead(f, r.x, step * 0.1);
      r2.iterations += r.iterations;
      r2.evaluations += r.evaluations;
      if (r2.f <= r.f) r = r2;
    }
    if (!have || (r.converged && !best.converged) || (r.converged == best.converged && r.f < best.f)) {
      best = r;
      have = true;
    }
  }
  return best;
}

struct UnivariateFit {
  double mu = 0.0, sigma = 1.0, loglik = -kInf;
  bool converged = false;
  long iterations = 0;
};

inline UnivariateFit fit_univariate(const Eigen::Ref<const Vector>& x, double c) {
  double mean = x.mean();
  double sd = std::sqrt((x.array() - mean).square().mean());
  if (!(sd > 0.0)) sd = 1.0;
  const double n = static_cast<double>(x.size());
  auto obj = [&](const Vector& v) { return -univariate_loglik(x, c, v(0), std::exp(v(1))) / n; };
  std::vector<Vector> starts;
  for (const auto& j : kJitter) {
    Vector s(2);
    s << mean + j[0] * sd, std::log(sd) + j[1];
    starts.push_back(s);
  }
  Vector step(2);
  step << 0.3 * sd, 0.2;
  const NelderMeadResult r = best_of_starts(obj, starts, step);
  UnivariateFit fit;
  fit.mu = r.x(0);
  fit.sigma = std::exp(r.x(1));
  fit.loglik = -r.f * n;
  fit.converged = r.converged && std::isfinite(fit.loglik);
  fit.iterations = r.iterations;
  return fit;
}

inline BivariateTheta from_transformed(const Vector& v) {
  return {v(0), v(1), std::exp(v(2)), std::exp(v(3)), std::tanh(v(4))};
}

}  // namespace detail

/// Sum over rows of log_pdf under the truncated bivariate normal with parameter theta.
inline double log_likelihood(const BivariateTheta& theta, const Matrix& data, const Vector& c) {
  theta.validate();
  detail::check_data(data, c);
  const TruncatedEllipticalModel model = theta.model(c);
  const double log_c = norm_const(model);
  // all quadratic forms at once through the model's Cholesky factor
  const Matrix centered = (data.rowwise() - model.mu().transpose()).transpose();
  const Matrix z = model.cholesky().matrixL().solve(centered);
  return static_cast<double>(data.rows()) * log_c - 0.5 * z.squaredNorm();
}

/// Standard errors from the inverse of the observed information (central
/// finite-difference Hessian of the log-likelihood). Empty when not positive definite.
inline std::optional<std::array<double, 5>> mle_std_errors(const BivariateTheta& theta, const Matrix& data,
                                                           const Vector& c, bool restricted) {
  const int k = restricted ? 4 : 5;
  const std::array<double, 5> base = theta.to_array();
  const std::array<double, 5> h = {1e-3 * theta.sigma1, 1e-3 * theta.sigma2, 1e-3 * theta.sigma1,
                                   1e-3 * theta.sigma2, 1e-3 * (1.0 - std::abs(theta.rho))};
  auto ll = [&](std::array<double, 5> a) {
    try {
      return log_likelihood(BivariateTheta::from_array(a), data, c);
    } catch (const Error&) {
      return std::nan("");
    }
  };
  Matrix hess(k, k);
  const double f0 = ll(base);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      double v;
      if (i == j) {
        auto ap = base, am = base;
        ap[i] += h[i];
        am[i] -= h[i];
        v = (ll(ap) - 2.0 * f0 + ll(am)) / (h[i] * h[i]);
      } else {
        auto pp = base, pm = base, mp = base, mm = base;
        pp[i] += h[i], pp[j] += h[j];
        pm[i] += h[i], pm[j] -= h[j];
        mp[i] -= h[i], mp[j] += h[j];
        mm[i] -= h[i], mm[j] -= h[j];
        v = (ll(pp) - ll(pm) - ll(mp) + ll(mm)) / (4.0 * h[i] * h[j]);
      }
      hess(i, j) = hess(j, i) = v;
    }
  }
  if (!hess.allFinite()) return std::nullopt;
  const Eigen::LLT<Matrix> llt(-hess);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Matrix cov = llt.solve(Matrix::Identity(k, k));
  std::array<double, 5> se{};
  for (int i = 0; i < 5; ++i) se[i] = i < k ? std::sqrt(cov(i, i)) : 0.0;  // rho is fixed in the restricted fit
  return se;
}

/// Maximum likelihood fit of the truncated bivariate normal. The restricted fit
/// fixes rho = 0, where the likelihood factorizes into two univariate fits.
inline FitReport fit_mle(const Matrix& data, const Vector& c, bool restricted, bool with_std_errors = false) {
  detail::check_data(data, c);
  if (data.rows() < 10) throw DomainError("fit_mle: need at least 10 rows");
  FitReport rep;
  rep.restricted = restricted;
  if (restricted) {
    const detail::UnivariateFit f1 = detail::fit_univariate(data.col(0), c(0));
    const detail::UnivariateFit f2 = detail::fit_univariate(data.col(1), c(1));
    rep.theta_hat = {f1.mu, f2.mu, f1.sigma, f2.sigma, 0.0};
    rep.loglik = f1.loglik + f2.loglik;
    rep.converged = f1.converged && f2.converged;
    rep.n_iterations = f1.iterations + f2.iterations;
  } else {
    const double n = static_cast<double>(data.rows());
    const detail::Moments m = detail::sample_moments(data);
    auto obj = [&](const Vector& v) {
      try {
        return -log_likelihood(detail::from_transformed(v), data, c) / n;
      } catch (const Error&) {
        return kInf;
      }
    };
    std::vector<Vector> starts;
    for (const auto& j : detail::kJitter) {
      Vector s(5);
      s << m.mean(0) + j[0] * m.sd(0), m.mean(1) - j[0] * m.sd(1), std::log(m.sd(0)) + j[1],
          std::log(m.sd(1)) - j[1], std::atanh(m.corr) + j[2];
      starts.push_back(s);
    }
    Vector step(5);
    step << 0.3 * m.sd(0), 0.3 * m.sd(1), 0.2, 0.2, 0.2;
    const NelderMeadResult r = detail::best_of_starts(obj, starts, step);
    rep.theta_hat = detail::from_transformed(r.x);
    rep.loglik = -r.f * n;
    rep.converged = r.converged && std::isfinite(rep.loglik);
    rep.n_iterations = r.iterations;
  }
  if (with_std_errors && rep.converged) rep.std_errors = mle_std_errors(rep.theta_hat, data, c, restricted);
  return rep;
}

/// Likelihood-ratio test of rho = 0: statistic 2 (loglik_full - loglik_null), clamped at 0.
inline LrtResult lrt_independence(const Matrix& data, const Vector& c) {
  LrtResult res;
  res.fit_null = fit_mle(data, c, true);
  res.fit_full = fit_mle(data, c, false);
  if (res.fit_full.converged && res.fit_null.converged && res.fit_full.loglik < res.fit_null.loglik) {
    // the null optimum is a point of the full space; polish from there
    const double n = static_cast<double>(data.rows());
    const BivariateTheta t0 = res.fit_null.theta_hat;
    Vector x0(5), step(5);
    x0 << t0.mu1, t0.mu2, std::log(t0.sigma1), std::log(t0.sigma2), 0.0;
    step << 0.1 * t0.sigma1, 0.1 * t0.sigma2, 0.05, 0.05, 0.05;
    auto obj = [&](const Vector& v) {
      try {
        return -log_likelihood(detail::from_transformed(v), data, c) / n;
      } catch (const Error&) {
        return kInf;
      }
    };
    const NelderMeadResult r = nelder_mead(obj, x0, step);
    if (r.converged && -r.f * n > res.fit_full.loglik) {
      res.fit_full.theta_hat = detail::from_transformed(r.x);
      res.fit_full.loglik = -r.f * n;
      res.fit_full.n_iterations += r.iterations;
    }
  }
  if (!res.fit_full.converged || !res.fit_null.converged)
    throw FitError(std::string("lrt_independence: ") + (!res.fit_full.converged ? "full" : "restricted") +
                       " fit did not converge",
                   res.fit_full, res.fit_null);
  res.statistic = std::max(0.0, 2.0 * (res.fit_full.loglik - res.fit_null.loglik));
  res.p_value = chi2_1_sf(res.statistic);
  return res;
}

/// Natural sufficient statistic V = (w1, -w1^2, w2, -w2^2, w1 w2).
inline std::array<double, 5> canonical_stats(double w1, double w2) { return {w1, -w1 * w1, w2, -w2 * w2, w1 * w2}; }

/// Natural parameter eta paired with V, so that the density is proportional to exp(eta' V).
inline std::array<double, 5> canonical_params(const BivariateTheta& t) {
  t.validate();
  const double d = 1.0 - t.rho * t.rho;
  const double s12 = t.sigma1 * t.sigma2;
  const double a1 = t.mu1 / (t.sigma1 * t.sigma1) - t.rho * t.mu2 / s12;
  const double a2 = t.mu2 / (t.sigma2 * t.sigma2) - t.rho * t.mu1 / s12;
  return {a1 / d, 1.0 / (2.0 * t.sigma1 * t.sigma1 * d), a2 / d, 1.0 / (2.0 * t.sigma2 * t.sigma2 * d),
          t.rho / (s12 * d)};
}

/// The parameter vector as displayed alongside V in the literature:
/// (1/s1^2, 1/s2^2, 2 a1, 2 a2, 2 rho / (s1 s2)), without the 1/(2(1-rho^2))
/// factor and in a different order from V.
inline std::array<double, 5> canonical_params_unscaled(const BivariateTheta& t) {
  t.validate();
  const double s12 = t.sigma1 * t.sigma2;
  const double a1 = t.mu1 / (t.sigma1 * t.sigma1) - t.rho * t.mu2 / s12;
  const double a2 = t.mu2 / (t.sigma2 * t.sigma2) - t.rho * t.mu1 / s12;
  return {1.0 / (t.sigma1 * t.sigma1), 1.0 / (t.sigma2 * t.sigma2), 2.0 * a1, 2.0 * a2, 2.0 * t.rho / s12};
}

/// d eta / d theta (rows: eta components, columns: mu1, mu2, sigma1, sigma2, rho).
inline Matrix canonical_jacobian(const BivariateTheta& t) {
  t.validate();
  const double m1 = t.mu1, m2 = t.mu2, s1 = t.sigma1, s2 = t.sigma2, r = t.rho;
  const double d = 1.0 - r * r;
  const double s12 = s1 * s2;
  const double a1 = m1 / (s1 * s1) - r * m2 / s12;
  const double a2 = m2 / (s2 * s2) - r * m1 / s12;
  const double dd = 2.0 * r / (d * d);  // d(1/d)/d rho
  Matrix j = Matrix::Zero(5, 5);
  // eta1 = a1 / d
  j(0, 0) = 1.0 / (s1 * s1) / d;
  j(0, 1) = -r / s12 / d;
  j(0, 2) = (-2.0 * m1 / (s1 * s1 * s1) + r * m2 / (s1 * s1 * s2)) / d;
  j(0, 3) = (r * m2 / (s1 * s2 * s2)) / d;
  j(0, 4) = (-m2 / s12) / d + a1 * dd;
  // eta2 = 1 / (2 s1^2 d)
  j(1, 2) = -1.0 / (s1 * s1 * s1 * d);
  j(1, 4) = 0.5 / (s1 * s1) * dd;
  // eta3 = a2 / d
  j(2, 0) = -r / s12 / d;
  j(2, 1) = 1.0 / (s2 * s2) / d;
  j(2, 2) = (r * m1 / (s1 * s1 * s2)) / d;
  j(2, 3) = (-2.0 * m2 / (s2 * s2 * s2) + r * m1 / (s1 * s2 * s2)) / d;
  j(2, 4) = (-m1 / s12) / d + a2 * dd;
  // eta4 = 1 / (2 s2^2 d)
  j(3, 3) = -1.0 / (s2 * s2 * s2 * d);
  j(3, 4) = 0.5 / (s2 * s2) * dd;
  // eta5 = rho / (s1 s2 d)
  j(4, 2) = -r / (s1 * s12 * d);
  j(4, 3) = -r / (s12 * s2 * d);
  j(4, 4) = 1.0 / (s12 * d) + r / s12 * dd;
  return j;
}

/// Per-observation Fisher information J' Cov(V) J, with Cov(V) estimated from
/// n_mc draws of the truncated model.
inline Matrix fisher_information(const BivariateTheta& theta, const Vector& c, long n_mc, std::uint64_t seed) {
  if (n_mc < 10000) throw DomainError("fisher_information: n_mc must be >= 10000");
  const TruncatedEllipticalModel model = theta.model(c);
  const SampleBatch batch = sample_truncated(model, n_mc, seed);
  Matrix v(n_mc, 5);
  for (long i = 0; i < n_mc; ++i) {
    const auto s = canonical_stats(batch.points(i, 0), batch.points(i, 1));
    for (int k = 0; k < 5; ++k) v(i, k) = s[k];
  }
  const Matrix centered = v.rowwise() - v.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(n_mc - 1);
  const Matrix j = canonical_jacobian(theta);
  const Matrix info = j.transpose() * cov * j;
  return 0.5 * (info + info.transpose());
}

}  // namespace trunc_ellipse
