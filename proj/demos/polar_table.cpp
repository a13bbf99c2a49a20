// Covariance of (X1, X2) given X >= mu for several generators and correlations.
#include <cstdio>

#include "trunc_ellipse/trunc_ellipse.hpp"

using namespace trunc_ellipse;

int main() {
  const GeneratorSpec gens[] = {GeneratorSpec::normal(), GeneratorSpec::student_t(3), GeneratorSpec::student_t(10),
                                GeneratorSpec::kotz(2, 1, 1), GeneratorSpec::gamma_radial(3)};
  std::printf("%-32s %8s", "generator", "b");
  for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9}) std::printf(" %10.2f", rho);
  std::printf("\n");
  for (const auto& g : gens) {
    std::printf("%-32s %8.5f", g.describe().c_str(), radial_moments(g).ratio_b);
    for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9}) std::printf(" %10.5f", truncated_cov_at_mean(g, rho));
    std::printf("\n");
  }
}
