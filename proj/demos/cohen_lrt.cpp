// Simulates a height/weight-style sample truncated below on both variables,
// fits the truncated bivariate normal and tests rho = 0.
#include <cstdio>

#include "trunc_ellipse/trunc_ellipse.hpp"

using namespace trunc_ellipse;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 1;
  const BivariateTheta truth{164.19, 77.195, 3.059, 5.459, 0.431};
  Vector c(2);
  c << 159.5, 0.0;
  const SampleBatch batch = sample_truncated(truth.model(c), 517, seed);
  std::printf("drew %ld rows, acceptance rate %.3f\n", static_cast<long>(batch.points.rows()), batch.acceptance_rate);

  const LrtResult r = lrt_independence(batch.points, c);
  const BivariateTheta& t = r.fit_full.theta_hat;
  std::printf("full fit: mu = (%.3f, %.3f) sigma = (%.3f, %.3f) rho = %.3f  loglik %.3f\n", t.mu1, t.mu2, t.sigma1,
              t.sigma2, t.rho, r.fit_full.loglik);
  std::printf("rho = 0:  loglik %.3f\n", r.fit_null.loglik);
  std::printf("-2 log Lambda = %.3f, p = %.3e\n", r.statistic, r.p_value);
}
