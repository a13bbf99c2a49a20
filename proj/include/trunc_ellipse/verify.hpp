#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "trunc_ellipse/dcor.hpp"
#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/inference.hpp"
#include "trunc_ellipse/model.hpp"
#include "trunc_ellipse/rng.hpp"
#include "trunc_ellipse/sampling.hpp"

namespace trunc_ellipse {

enum class TestName { lrt, distance_correlation };
enum class Decision { reject, fail_to_reject, not_applicable };

inline const char* to_string(TestName t) { return t == TestName::lrt ? "lrt" : "distance_correlation"; }
inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::reject: return "reject";
    case Decision::fail_to_reject: return "fail_to_reject";
    case Decision::not_applicable: return "not_applicable";
  }
  return "unknown";
}

struct Scenario {
  Vector mu;
  Matrix sigma;
  Vector c;
  GeneratorSpec generator = GeneratorSpec::normal();
  int p1 = 1;
  int p2 = 1;
};

struct VerificationReport {
  Scenario scenario;
  long n = 0;
  TestName test_name = TestName::lrt;
  Decision decision = Decision::fail_to_reject;
  /// Replicated runs: upper-tail binomial probability of the observed number of
  /// rejections at level alpha. Single runs: the test's own p-value.
  double p_value = 1.0;
  double replicate_rejection_rate = 0.0;
  int replicates = 1;
  double alpha = 0.05;
  std::vector<double> replicate_p_values;
  int failed_replicates = 0;
  double band_lower = 0.0;  // binomial 99% band for the rejection rate under H0
  double band_upper = 1.0;

  // single-sample diagnostics (corollary scenarios)
  bool hypotheses_met = true;
  std::optional<RegularityReport> regularity;
  double sample_covariance = 0.0;
  double covariance_se = 0.0;
  double dcor = 0.0;
  double acceptance_rate = 1.0;
};

inline constexpr int kPermutations = 499;

/// Central 99% band of Binomial(replicates, alpha) / replicates.
inline std::pair<double, double> binomial_band(int replicates, double alpha, double level = 0.99) {
  boost::math::binomial_distribution<double> bin(replicates, alpha);
  const double tail = 0.5 * (1.0 - level);
  const double lo = std::floor(boost::math::quantile(bin, tail));
  const double hi = std::ceil(boost::math::quantile(boost::math::complement(bin, tail)));
  return {lo / replicates, hi / replicates};
}

/// P(X >= k) for X ~ Binomial(replicates, alpha).
inline double binomial_upper_tail(int k, int replicates, double alpha) {
  if (k <= 0) return 1.0;
  boost::math::binomial_distribution<double> bin(replicates, alpha);
  return boost::math::cdf(boost::math::complement(bin, static_cast<double>(k - 1)));
}

namespace detail {

inline std::uint64_t replicate_seed(std::uint64_t seed, int r) {
  return mix64(seed ^ mix64(static_cast<std::uint64_t>(r) + 0x7265706cULL));
}

/// p-value of the independence test between the first p1 and remaining columns.
inline double independence_p_value(const Matrix& w, int p1, std::uint64_t seed, const Vector& c, TestName test) {
  if (test == TestName::lrt) return lrt_independence(w, c).p_value;
  const int p2 = static_cast<int>(w.cols()) - p1;
  return dcor_test(w.leftCols(p1), w.rightCols(p2), kPermutations, seed).p_value;
}

}  // namespace detail

/// Replicated test of independence between W1 and W2 for a truncated normal
/// model: the LRT when both blocks are scalar, a permutation distance-correlation
/// test otherwise. The report's decision rejects independence when the
/// rejection rate exceeds the 99% binomial band around alpha.
inline VerificationReport verify_theorem1(const Matrix& sigma, const Vector& mu, const Vector& c, int p1, long n,
                                          int replicates, double alpha, std::uint64_t seed) {
  if (n < 200) throw DomainError("verify_theorem1: n must be >= 200");
  if (replicates < 1) throw DomainError("verify_theorem1: replicates must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("verify_theorem1: alpha must lie in (0, 1)");
  const TruncatedEllipticalModel model = build_model(mu, sigma, c, GeneratorSpec::normal());
  const int p = model.dimension();
  if (p1 < 1 || p1 >= p) throw DomainError("verify_theorem1: p1 must satisfy 1 <= p1 < p");

  VerificationReport rep;
  rep.scenario = {model.mu(), model.sigma(), model.c(), GeneratorSpec::normal(), p1, p - p1};
  rep.n = n;
  rep.replicates = replicates;
  rep.alpha = alpha;
  rep.test_name = p == 2 ? TestName::lrt : TestName::distance_correlation;
  std::tie(rep.band_lower, rep.band_upper) = binomial_band(replicates, alpha);

  int rejections = 0;
  double acc = 0.0;
  for (int r = 0; r < replicates; ++r) {
    const std::uint64_t s = detail::replicate_seed(seed, r);
    const SampleBatch batch = sample_truncated(model, n, s);
    acc += batch.acceptance_rate;
    double pv;
    try {
      pv = detail::independence_p_value(batch.points, p1, s, model.c(), rep.test_name);
    } catch (const FitError&) {
      ++rep.failed_replicates;
      pv = std::nan("");
    }
    rep.replicate_p_values.push_back(pv);
    if (pv < alpha) ++rejections;
  }
  rep.acceptance_rate = acc / replicates;
  rep.replicate_rejection_rate = static_cast<double>(rejections) / replicates;
  if (replicates == 1) {
    rep.p_value = rep.replicate_p_values.front();
    rep.decision = rep.p_value < alpha ? Decision::reject : Decision::fail_to_reject;
  } else {
    rep.p_value = binomial_upper_tail(rejections, replicates, alpha);
    rep.decision = rep.replicate_rejection_rate > rep.band_upper ? Decision::reject : Decision::fail_to_reject;
  }
  return rep;
}

/// Single large-sample check of the bivariate elliptical scenario with
/// Sigma = [[1, rho], [rho, 1]], mu = 0 and truncation point c: reports the sample
/// covariance with its standard error and a distance-correlation permutation test.
/// Generators failing the regularity conditions get decision not_applicable, but
/// the diagnostics are still computed.
inline VerificationReport verify_corollary1(const GeneratorSpec& gen, double rho, const Vector& c, long n,
                                            std::uint64_t seed, double alpha = 0.05) {
  if (c.size() != 2) throw DomainError("verify_corollary1: the scenario is bivariate");
  if (!(std::abs(rho) < 1.0)) throw DomainError("verify_corollary1: |rho| must be < 1");
  if (n < 10) throw DomainError("verify_corollary1: n must be >= 10");
  const TruncatedEllipticalModel model = build_model(Vector::Zero(2), bivariate_sigma(1.0, 1.0, rho), c, gen);

  VerificationReport rep;
  rep.scenario = {model.mu(), model.sigma(), model.c(), model.generator(), 1, 1};
  rep.n = n;
  rep.alpha = alpha;
  rep.test_name = TestName::distance_correlation;
  rep.regularity = check_generator_regularity(gen);
  rep.hypotheses_met = rep.regularity->all();

  const SampleBatch batch = sample_truncated(model, n, seed);
  rep.acceptance_rate = batch.acceptance_rate;
  const Matrix& w = batch.points;
  const Vector mean = w.colwise().mean().transpose();
  const Vector prod = (w.col(0).array() - mean(0)) * (w.col(1).array() - mean(1));
  rep.sample_covariance = prod.mean();
  rep.covariance_se = std::sqrt((prod.array() - rep.sample_covariance).square().sum() / (n - 1.0) / n);

  const DcorResult d = dcor_test(w.col(0), w.col(1), kPermutations, mix64(seed ^ 0x636f726fULL));
  rep.dcor = d.dcor;
  rep.p_value = d.p_value;
  rep.replicate_p_values = {d.p_value};
  rep.replicate_rejection_rate = d.p_value < alpha ? 1.0 : 0.0;
  if (!rep.hypotheses_met) rep.decision = Decision::not_applicable;
  else rep.decision = d.p_value < alpha ? Decision::reject : Decision::fail_to_reject;
  return rep;
}

}  // namespace trunc_ellipse
