#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "trunc_ellipse/error.hpp"

namespace trunc_ellipse {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_sf(double x) {
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

/// Standard normal quantile. Returns -inf / +inf at 0 / 1.
inline double normal_quantile(double u) {
  if (u <= 0.0) return -kInf;
  if (u >= 1.0) return kInf;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

/// log erfc(z) for z >= 0, accurate where erfc itself underflows.
inline double log_erfc(double z) {
  if (z < 25.0) return std::log(std::erfc(z));
  // asymptotic series: erfc(z) = exp(-z^2)/(z sqrt(pi)) * sum_k (-1)^k (2k-1)!! / (2 z^2)^k
  const double inv2z2 = 1.0 / (2.0 * z * z);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 8; ++k) {
    term *= -(2.0 * k - 1.0) * inv2z2;
    sum += term;
  }
  return -z * z - std::log(z) - 0.5 * std::log(std::numbers::pi) + std::log(sum);
}

/// log of the chi-square(1) survival function.
inline double log_chi2_1_sf(double x) {
  if (!(x >= 0.0)) throw DomainError("chi2_1_sf: statistic must be >= 0");
  if (std::isinf(x)) return -kInf;
  return log_erfc(std::sqrt(0.5 * x));
}

/// Survival function of the chi-square distribution with one degree of freedom.
inline double chi2_1_sf(double x) {
  if (!(x >= 0.0)) throw DomainError("chi2_1_sf: statistic must be >= 0");
  const double z = std::sqrt(0.5 * x);
  if (z < 25.0) return std::erfc(z);
  return std::exp(log_erfc(z));
}

inline double chi2_1_cdf(double x) {
  if (x <= 0.0) return 0.0;
  return std::erf(std::sqrt(0.5 * x));
}

/// Asymptotic Kolmogorov survival function P(K > lambda).
inline double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // theta-function form, converges fast for small lambda
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double m = 2.0 * k - 1.0;
      cdf += std::exp(-m * m * pi2 / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sf = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double t = 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
    sf += (k % 2 == 1) ? t : -t;
    if (t < 1e-18) break;
  }
  return std::clamp(sf, 0.0, 1.0);
}

struct KsResult {
  double statistic;
  double p_value;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
/// Uses Stephens' small-sample correction of the asymptotic distribution.
template <class Cdf>
KsResult ks_test(std::span<const double> sample, Cdf&& cdf) {
  if (sample.empty()) throw DomainError("ks_test: empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)};
}

/// Two-sample Kolmogorov-Smirnov test.
inline KsResult ks_test_2(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_test_2: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_sf((ne + 0.12 + 0.11 / ne) * d)};
}

}  // namespace trunc_ellipse
