#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <variant>

#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/model.hpp"
#include "trunc_ellipse/mvnprob.hpp"
#include "trunc_ellipse/radial.hpp"
#include "trunc_ellipse/rng.hpp"
#include "trunc_ellipse/special.hpp"

namespace trunc_ellipse {

enum class SampleMethod { rejection, gibbs };

inline const char* to_string(SampleMethod m) { return m == SampleMethod::rejection ? "rejection" : "gibbs"; }

struct SampleBatch {
  Matrix points;  // n x p
  double acceptance_rate = 1.0;
  std::uint64_t seed = 0;
  SampleMethod method = SampleMethod::rejection;
  long n_proposals = 0;
};

/// Raised when the proposal budget runs out; carries the rows accepted so far.
class PartialBatchError : public Error {
 public:
  PartialBatchError(const std::string& what, SampleBatch partial) : Error(what), partial_(std::move(partial)) {}
  const SampleBatch& partial() const noexcept { return partial_; }

 private:
  SampleBatch partial_;
};

struct SampleOptions {
  /// Upper bound on untruncated proposals; 0 means 1000 * n + 100000.
  long max_tries = 0;
  /// Normal models switch to Gibbs when P(X >= c) is below this.
  double gibbs_threshold = 1e-3;
  int gibbs_burn_in = 1000;
  int gibbs_thin = 10;
};

/// Draws R * L U + mu for U uniform on the unit sphere, one row at a time.
/// Rows are produced in chunks of kChunk, each from its own split stream.
class EllipticalSampler {
 public:
  static constexpr long kChunk = 4096;

  EllipticalSampler(const GeneratorSpec& generator, Vector mu, const Matrix& sigma)
      : gen_(generator.with_dimension(static_cast<int>(mu.size()))), mu_(std::move(mu)) {
    const int p = static_cast<int>(mu_.size());
    if (sigma.rows() != p || sigma.cols() != p) throw DomainError("sampler: sigma has the wrong shape");
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) throw DomainError("sampler: sigma is not positive definite");
    l_ = llt.matrixL();
    switch (gen_.kind()) {
      case GeneratorKind::normal:
      case GeneratorKind::student_t:
      case GeneratorKind::gamma_radial:
        break;
      default:
        radial_.emplace(gen_, p);
    }
    if (const auto* g = std::get_if<gen::GammaRadial>(&gen_.params()); g && !(g->shape + p - 2.0 > 0.0))
      throw IntegrationError("generator not integrable: " + gen_.describe());
    z_.resize(p);
  }

  int dimension() const { return static_cast<int>(mu_.size()); }

  /// Writes one draw into `out` (length p).
  template <class Out>
  void draw(CounterRng& rng, Out&& out) {
    const int p = dimension();
    for (int j = 0; j < p; ++j) z_(j) = rng.normal();
    double radius_over_norm;
    switch (gen_.kind()) {
      case GeneratorKind::normal:
        radius_over_norm = 1.0;
        break;
      case GeneratorKind::student_t: {
        const double tau = std::get<gen::StudentT>(gen_.params()).dof;
        radius_over_norm = 1.0 / std::sqrt(rng.chi_square(tau) / tau);
        break;
      }
      case GeneratorKind::gamma_radial: {
        const auto& g = std::get<gen::GammaRadial>(gen_.params());
        radius_over_norm = g.scale * rng.gamma(g.shape + p - 2.0) / z_.norm();
        break;
      }
      default:
        radius_over_norm = radial_->quantile(rng.uniform()) / z_.norm();
    }
    out = mu_ + radius_over_norm * (l_ * z_);
  }

 private:
  GeneratorSpec gen_;
  Vector mu_;
  Matrix l_;
  std::optional<RadialDistribution> radial_;
  Vector z_;
};

/// n draws from the untruncated elliptical law with generator `gen`, location mu and scatter sigma.
inline Matrix sample_untruncated_elliptical(const GeneratorSpec& gen, const Vector& mu, const Matrix& sigma, long n,
                                            std::uint64_t seed) {
  if (n < 0) throw DomainError("sample: n must be >= 0");
  EllipticalSampler sampler(gen, mu, sigma);
  Matrix out(n, sampler.dimension());
  const CounterRng root(seed);
  for (long start = 0, chunk = 0; start < n; start += EllipticalSampler::kChunk, ++chunk) {
    CounterRng rng = root.split(static_cast<std::uint64_t>(chunk));
    const long end = std::min(n, start + EllipticalSampler::kChunk);
    for (long i = start; i < end; ++i) sampler.draw(rng, out.row(i).transpose());
  }
  return out;
}

namespace detail {

/// Standard normal truncated to [a, inf).
inline double truncated_std_normal(CounterRng& rng, double a) {
  if (a == -kInf) return rng.normal();
  if (a <= 0.45) {
    for (;;) {
      const double z = rng.normal();
      if (z >= a) return z;
    }
  }
  // exponential proposal with the optimal rate
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log(rng.uniform()) / lambda;
    const double d = z - lambda;
    if (std::log(rng.uniform()) <= -0.5 * d * d) return z;
  }
}

}  // namespace detail

/// Coordinate-wise Gibbs sampler for a truncated normal model.
inline SampleBatch gibbs_truncated_normal(const TruncatedEllipticalModel& model, long n, int burn_in, int thin,
                                          std::uint64_t seed) {
  if (!model.is_normal())
    throw UnsupportedOperation("gibbs_truncated_normal: requires the normal generator, got " +
                               model.generator().describe());
  if (n < 0 || burn_in < 0 || thin < 1) throw DomainError("gibbs_truncated_normal: n, burn_in >= 0 and thin >= 1");
  const int p = model.dimension();
  const Matrix prec = model.cholesky().solve(Matrix::Identity(p, p));
  const Vector& mu = model.mu();
  const Vector& c = model.c();
  Vector x(p);
  for (int i = 0; i < p; ++i) x(i) = std::max(mu(i), c(i));
  Vector cond_sd(p);
  for (int i = 0; i < p; ++i) cond_sd(i) = 1.0 / std::sqrt(prec(i, i));

  CounterRng rng(seed, 0x6e6962626967ULL);
  auto sweep = [&] {
    for (int i = 0; i < p; ++i) {
      double s = 0.0;
      for (int j = 0; j < p; ++j)
        if (j != i) s += prec(i, j) * (x(j) - mu(j));
      const double m = mu(i) - s / prec(i, i);
      const double a = c(i) == -kInf ? -kInf : (c(i) - m) / cond_sd(i);
      x(i) = std::max(m + cond_sd(i) * detail::truncated_std_normal(rng, a), c(i));
    }
  };
  for (int b = 0; b < burn_in; ++b) sweep();
  SampleBatch batch;
  batch.points.resize(n, p);
  for (long k = 0; k < n; ++k) {
    for (int t = 0; t < thin; ++t) sweep();
    batch.points.row(k) = x.transpose();
  }
  batch.acceptance_rate = 1.0;
  batch.seed = seed;
  batch.method = SampleMethod::gibbs;
  batch.n_proposals = static_cast<long>(burn_in) + n * thin;
  return batch;
}

/// n draws from the truncated model: rejection from the untruncated law, or
/// Gibbs for normal models whose truncation region has probability below the threshold.
inline SampleBatch sample_truncated(const TruncatedEllipticalModel& model, long n, std::uint64_t seed,
                                    const SampleOptions& opt = {}) {
  if (n < 0) throw DomainError("sample: n must be >= 0");
  const int p = model.dimension();
  if (model.is_normal() && !model.is_untruncated()) {
    const RectProbResult pr = rect_prob(model.mu(), model.sigma(), model.c());
    if (!(pr.value > 0.0)) throw IntegrationError("sample: truncation region has zero probability");
    if (pr.value < opt.gibbs_threshold) return gibbs_truncated_normal(model, n, opt.gibbs_burn_in, opt.gibbs_thin, seed);
  }
  const long max_tries = opt.max_tries > 0 ? opt.max_tries : 1000 * n + 100000;
  EllipticalSampler sampler(model.generator(), model.mu(), model.sigma());
  SampleBatch batch;
  batch.points.resize(n, p);
  batch.seed = seed;
  batch.method = SampleMethod::rejection;
  const CounterRng root(seed);
  const Vector& c = model.c();
  Vector x(p);
  long accepted = 0, tries = 0;
  for (std::uint64_t chunk = 0; accepted < n; ++chunk) {
    CounterRng rng = root.split(chunk);
    for (long k = 0; k < EllipticalSampler::kChunk && accepted < n; ++k) {
      if (tries >= max_tries) {
        batch.points.conservativeResize(accepted, p);
        batch.n_proposals = tries;
        batch.acceptance_rate = tries > 0 ? static_cast<double>(accepted) / tries : 0.0;
        throw PartialBatchError("sample: max_tries (" + std::to_string(max_tries) + ") exhausted after " +
                                    std::to_string(accepted) + " of " + std::to_string(n) + " rows",
                                std::move(batch));
      }
      sampler.draw(rng, x);
      ++tries;
      if ((x.array() >= c.array()).all()) batch.points.row(accepted++) = x.transpose();
    }
  }
  batch.n_proposals = tries;
  batch.acceptance_rate = tries > 0 ? static_cast<double>(accepted) / tries : 1.0;
  return batch;
}

}  // namespace trunc_ellipse
