#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/interp.hpp"
#include "trunc_ellipse/special.hpp"

namespace trunc_ellipse {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

enum class GeneratorKind { normal, student_t, kotz, gamma_radial, tabulated };

inline const char* to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::normal: return "normal";
    case GeneratorKind::student_t: return "student_t";
    case GeneratorKind::kotz: return "kotz";
    case GeneratorKind::gamma_radial: return "gamma_radial";
    case GeneratorKind::tabulated: return "tabulated";
  }
  return "unknown";
}

namespace gen {

/// g(t) = exp(-t/2)
struct Normal {};

/// g(t) = (1 + t/dof)^(-(dof + p)/2), p the dimension the generator is bound to.
struct StudentT {
  double dof;
};

/// g(t) = t^(n-1) exp(-beta t^s)
struct Kotz {
  double n;
  double beta;
  double s;
};

/// Generator whose bivariate radial variable is Gamma(shape, scale):
/// g(t) = t^((shape-2)/2) exp(-sqrt(t)/scale), up to a constant.
struct GammaRadial {
  double shape;
  double scale;
};

/// Monotone-cubic interpolation of (t, g(t)) knots; g = 0 beyond the last knot.
struct Tabulated {
  std::vector<double> t;
  std::vector<double> g;
  std::shared_ptr<const MonotoneCubic> interp;  // null when the grid is not increasing
};

}  // namespace gen

/// Density generator g of an elliptical law, with log g and its derivative.
/// Generators are unnormalized; models divide by the computed constant.
class GeneratorSpec {
 public:
  using Params = std::variant<gen::Normal, gen::StudentT, gen::Kotz, gen::GammaRadial, gen::Tabulated>;

  GeneratorSpec() : params_(gen::Normal{}) {}

  static GeneratorSpec normal() { return GeneratorSpec(gen::Normal{}); }

  static GeneratorSpec student_t(double dof) {
    if (!(dof > 0.0) || !std::isfinite(dof))
      throw ConstructionError("student_t generator: degrees of freedom must be > 0");
    return GeneratorSpec(gen::StudentT{dof});
  }

  static GeneratorSpec kotz(double n, double beta, double s) {
    if (!std::isfinite(n) || !(beta > 0.0) || !(s > 0.0))
      throw ConstructionError("kotz generator: need finite N, beta > 0, s > 0");
    return GeneratorSpec(gen::Kotz{n, beta, s});
  }

  static GeneratorSpec gamma_radial(double shape, double scale = 1.0) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw ConstructionError("gamma_radial generator: need shape > 0 and scale > 0");
    return GeneratorSpec(gen::GammaRadial{shape, scale});
  }

  static GeneratorSpec tabulated(std::vector<double> t, std::vector<double> g) {
    if (t.size() < 2 || t.size() != g.size())
      throw ConstructionError("tabulated generator: need >= 2 (t, g) pairs of equal length");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t[i]) || t[i] < 0.0)
        throw ConstructionError("tabulated generator: t values must be finite and >= 0");
      if (!std::isfinite(g[i]) || g[i] < 0.0)
        throw ConstructionError("tabulated generator: g values must be finite and >= 0");
    }
    gen::Tabulated tab{std::move(t), std::move(g), nullptr};
    bool increasing = true;
    for (std::size_t i = 1; i < tab.t.size(); ++i) increasing = increasing && tab.t[i] > tab.t[i - 1];
    if (increasing) tab.interp = std::make_shared<const MonotoneCubic>(tab.t, tab.g);
    return GeneratorSpec(std::move(tab));
  }

  GeneratorKind kind() const { return static_cast<GeneratorKind>(params_.index()); }
  bool is_normal() const { return kind() == GeneratorKind::normal; }
  bool is_analytic() const { return kind() != GeneratorKind::tabulated; }
  const Params& params() const { return params_; }

  /// Dimension the generator is bound to; only the Student-t exponent depends on it.
  int dimension() const { return dim_; }

  GeneratorSpec with_dimension(int p) const {
    if (p < 1) throw ConstructionError("generator dimension must be >= 1");
    GeneratorSpec copy = *this;
    copy.dim_ = p;
    return copy;
  }

  /// Throws ConstructionError when log_g cannot be evaluated (non-monotone table).
  void validate() const {
    if (const auto* tab = std::get_if<gen::Tabulated>(&params_); tab && !tab->interp)
      throw ConstructionError("tabulated generator: t grid must be strictly increasing");
  }

  double log_g(double t) const {
    return std::visit([&](const auto& p) { return log_g_impl(p, t); }, params_);
  }

  double g(double t) const { return std::exp(log_g(t)); }

  /// d/dt log g(t), t > 0.
  double dlog_g(double t) const {
    return std::visit([&](const auto& p) { return dlog_g_impl(p, t); }, params_);
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, gen::Normal>) os << "normal";
          else if constexpr (std::is_same_v<T, gen::StudentT>) os << "student_t(dof=" << p.dof << ")";
          else if constexpr (std::is_same_v<T, gen::Kotz>)
            os << "kotz(N=" << p.n << ", beta=" << p.beta << ", s=" << p.s << ")";
          else if constexpr (std::is_same_v<T, gen::GammaRadial>)
            os << "gamma_radial(shape=" << p.shape << ", scale=" << p.scale << ")";
          else os << "tabulated(" << p.t.size() << " knots)";
        },
        params_);
    return os.str();
  }

 private:
  explicit GeneratorSpec(Params p) : params_(std::move(p)) {}

  static double log_g_impl(const gen::Normal&, double t) { return -0.5 * t; }
  double log_g_impl(const gen::StudentT& p, double t) const {
    return -0.5 * (p.dof + dim_) * std::log1p(t / p.dof);
  }
  static double log_g_impl(const gen::Kotz& p, double t) {
    const double lead = (p.n == 1.0) ? 0.0 : (p.n - 1.0) * std::log(t);
    return lead - p.beta * std::pow(t, p.s);
  }
  static double log_g_impl(const gen::GammaRadial& p, double t) {
    const double lead = (p.shape == 2.0) ? 0.0 : 0.5 * (p.shape - 2.0) * std::log(t);
    return lead - std::sqrt(t) / p.scale;
  }
  static double log_g_impl(const gen::Tabulated& p, double t) {
    if (!p.interp) throw DomainError("tabulated generator: t grid must be strictly increasing");
    if (t > p.t.back()) return -kInf;
    return std::log((*p.interp)(t));
  }

  static double dlog_g_impl(const gen::Normal&, double) { return -0.5; }
  double dlog_g_impl(const gen::StudentT& p, double t) const {
    return -0.5 * (p.dof + dim_) / (p.dof + t);
  }
  static double dlog_g_impl(const gen::Kotz& p, double t) {
    return (p.n - 1.0) / t - p.beta * p.s * std::pow(t, p.s - 1.0);
  }
  static double dlog_g_impl(const gen::GammaRadial& p, double t) {
    return 0.5 * (p.shape - 2.0) / t - 0.5 / (p.scale * std::sqrt(t));
  }
  static double dlog_g_impl(const gen::Tabulated& p, double t) {
    if (!p.interp) throw DomainError("tabulated generator: t grid must be strictly increasing");
    if (t > p.t.back()) return std::numeric_limits<double>::quiet_NaN();
    const double g = (*p.interp)(t);
    if (g <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return p.interp->derivative(t) / g;
  }

  Params params_;
  int dim_ = 2;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Truncated elliptical law with density proportional to g((w-mu)' Sigma^-1 (w-mu)) on {w >= c}.
/// Immutable; copies share the factorization and the lazily computed normalizing constant.
class TruncatedEllipticalModel {
 public:
  int dimension() const { return static_cast<int>(mu_.size()); }
  const Vector& mu() const { return mu_; }
  const Matrix& sigma() const { return sigma_; }
  const Vector& c() const { return c_; }
  const GeneratorSpec& generator() const { return generator_; }
  bool is_normal() const { return generator_.is_normal(); }

  /// Lower Cholesky factor L with L L' = Sigma.
  const Matrix& chol_lower() const { return state_->chol_lower; }
  const Eigen::LLT<Matrix>& cholesky() const { return state_->llt; }
  double log_det_sigma() const { return state_->log_det; }

  bool is_truncated(int i) const { return std::isfinite(c_(i)); }
  bool is_untruncated() const {
    for (int i = 0; i < dimension(); ++i)
      if (is_truncated(i)) return false;
    return true;
  }

  /// Runs `compute` at most once per model family (successful runs are cached).
  template <class Compute>
  double cached_log_norm_const(Compute&& compute) const {
    std::call_once(state_->norm_once, [&] { state_->log_norm_const = compute(*this); });
    return state_->log_norm_const;
  }

 private:
  friend TruncatedEllipticalModel build_model(Vector, Matrix, Vector, GeneratorSpec);

  struct State {
    Eigen::LLT<Matrix> llt;
    Matrix chol_lower;
    double log_det = 0.0;
    std::once_flag norm_once;
    double log_norm_const = 0.0;
  };

  Vector mu_;
  Matrix sigma_;
  Vector c_;
  GeneratorSpec generator_;
  std::shared_ptr<State> state_;
};

/// Validates dimensions, symmetry and positive definiteness, then binds the generator to p.
inline TruncatedEllipticalModel build_model(Vector mu, Matrix sigma, Vector c, GeneratorSpec generator) {
  const Eigen::Index p = mu.size();
  if (p < 1) throw ConstructionError("model: dimension must be >= 1");
  if (sigma.rows() != p || sigma.cols() != p)
    throw ConstructionError("model: sigma must be " + std::to_string(p) + "x" + std::to_string(p));
  if (c.size() != p) throw ConstructionError("model: truncation point must have length " + std::to_string(p));
  if (!mu.allFinite() || !sigma.allFinite()) throw ConstructionError("model: mu and sigma must be finite");
  for (Eigen::Index i = 0; i < p; ++i)
    if (std::isnan(c(i)) || c(i) == kInf) throw ConstructionError("model: truncation point entries must be finite or -inf");

  const double scale = sigma.cwiseAbs().maxCoeff();
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300))
    throw ConstructionError("model: sigma is not symmetric");
  sigma = (0.5 * (sigma + sigma.transpose())).eval();  // transpose aliases without eval

  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (!(min_eig > 0.0)) {
    std::ostringstream os;
    os << "model: sigma is not positive definite (eigenvalue " << min_eig << ")";
    throw ConstructionError(os.str());
  }
  generator.validate();

  TruncatedEllipticalModel m;
  m.state_ = std::make_shared<TruncatedEllipticalModel::State>();
  m.state_->llt.compute(sigma);
  if (m.state_->llt.info() != Eigen::Success) throw ConstructionError("model: Cholesky factorization failed");
  m.state_->chol_lower = m.state_->llt.matrixL();
  m.state_->log_det = 2.0 * m.state_->chol_lower.diagonal().array().log().sum();
  m.mu_ = std::move(mu);
  m.sigma_ = std::move(sigma);
  m.c_ = std::move(c);
  m.generator_ = generator.with_dimension(static_cast<int>(p));
  return m;
}

/// Covariance matrix with standard deviations `sd` and correlation rho (bivariate).
inline Matrix bivariate_sigma(double sd1, double sd2, double rho) {
  Matrix s(2, 2);
  s << sd1 * sd1, rho * sd1 * sd2, rho * sd1 * sd2, sd2 * sd2;
  return s;
}

// ---------------------------------------------------------------------------
// Partitions
// ---------------------------------------------------------------------------

/// Split of W into (W1, W2) with the covariance blocks and the Schur complement
/// Sigma_22.1 = Sigma_22 - Sigma_21 Sigma_11^-1 Sigma_12.
struct PartitionSpec {
  int p1 = 0;
  int p2 = 0;
  Matrix s11, s12, s21, s22;
  Matrix schur;
  Eigen::LLT<Matrix> s11_llt;
  Eigen::LLT<Matrix> schur_llt;

  /// Sigma_11^-1 Sigma_12 (p1 x p2), the regression of W2 on W1 transposed.
  Matrix regression;

  Matrix reassemble() const {
    Matrix s(p1 + p2, p1 + p2);
    s.topLeftCorner(p1, p1) = s11;
    s.topRightCorner(p1, p2) = s12;
    s.bottomLeftCorner(p2, p1) = s21;
    s.bottomRightCorner(p2, p2) = s22;
    return s;
  }
};

inline PartitionSpec partition(const Matrix& sigma, int p1) {
  const int p = static_cast<int>(sigma.rows());
  if (p1 < 1 || p1 >= p)
    throw DomainError("partition: p1 must satisfy 1 <= p1 < " + std::to_string(p));
  PartitionSpec part;
  part.p1 = p1;
  part.p2 = p - p1;
  part.s11 = sigma.topLeftCorner(p1, p1);
  part.s12 = sigma.topRightCorner(p1, part.p2);
  part.s21 = sigma.bottomLeftCorner(part.p2, p1);
  part.s22 = sigma.bottomRightCorner(part.p2, part.p2);
  part.s11_llt.compute(part.s11);
  if (part.s11_llt.info() != Eigen::Success) throw ConstructionError("partition: Sigma_11 is not positive definite");
  part.regression = part.s11_llt.solve(part.s12);
  Matrix schur = part.s22 - part.s21 * part.regression;
  part.schur = 0.5 * (schur + schur.transpose());
  part.schur_llt.compute(part.schur);
  if (part.schur_llt.info() != Eigen::Success)
    throw ConstructionError("partition: Schur complement is not positive definite");
  return part;
}

inline PartitionSpec partition(const TruncatedEllipticalModel& model, int p1) {
  return partition(model.sigma(), p1);
}

// ---------------------------------------------------------------------------
// Generator regularity
// ---------------------------------------------------------------------------

enum class TailBehaviour { tends_to_zero, diverges, neither, inconclusive };

inline const char* to_string(TailBehaviour b) {
  switch (b) {
    case TailBehaviour::tends_to_zero: return "tends_to_zero";
    case TailBehaviour::diverges: return "diverges";
    case TailBehaviour::neither: return "neither";
    case TailBehaviour::inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct RegularityReport {
  bool r1 = false;  // g > 0 on [0, grid_max] and g' continuous
  bool r2 = false;  // g' != 0 on all but 1% of the grid
  TailBehaviour r3 = TailBehaviour::inconclusive;
  double r3_slope = 0.0;       // fitted slope of log|t dlog g(t^2)| against log t
  double r3_tail_value = 0.0;  // |t dlog g(t^2)| at t = 1e4

  bool all() const {
    return r1 && r2 && (r3 == TailBehaviour::tends_to_zero || r3 == TailBehaviour::diverges);
  }
};

namespace detail {

inline double g_prime(const GeneratorSpec& gen, double t) {
  const double lg = gen.log_g(t);
  if (lg == -kInf) return 0.0;
  return std::exp(lg) * gen.dlog_g(t);
}

}  // namespace detail

/// Numerical check of the positivity/smoothness (R1), dense-support (R2) and
/// tail (R3) conditions on a generator.
///
/// R1 samples g on a uniform grid over [0, grid_max] and tests continuity of g'
/// on every grid interval by bisecting towards the largest change 40 times; a
/// jump survives the refinement, a continuous derivative does not.
/// R2 requires |d log g| > 1e-12 (with g > 0) on more than 99% of the grid.
/// R3 samples v(t) = t * dlog_g(t^2) at 81 geometric points t in [1, 1e4] and
/// fits the slope of log|v| against log t over t >= 100: |v(1e4)| < 1e-6 or
/// slope < -0.1 gives tends_to_zero, |v(1e4)| > 1e6 or slope > 0.1 gives
/// diverges, otherwise neither. Non-finite values or sign changes in the tail
/// give inconclusive.
inline RegularityReport check_generator_regularity(const GeneratorSpec& gen, double grid_max = 50.0,
                                                   int n_grid = 1000) {
  if (!(grid_max > 0.0)) throw DomainError("check_generator_regularity: grid_max must be > 0");
  if (n_grid < 100) throw DomainError("check_generator_regularity: n_grid must be >= 100");
  if (const auto* tab = std::get_if<gen::Tabulated>(&gen.params()); tab && !tab->interp)
    throw DomainError("check_generator_regularity: tabulated t grid is not monotone increasing");

  RegularityReport rep;
  const double h = grid_max / (n_grid - 1);

  bool positive = true;
  double gp_scale = 0.0;
  std::vector<double> gp(n_grid, 0.0);
  for (int i = 0; i < n_grid; ++i) {
    const double t = i * h;
    const double lg = gen.log_g(t);
    if (!std::isfinite(lg)) positive = false;
    if (i > 0) {
      gp[i] = detail::g_prime(gen, t);
      if (!std::isfinite(gp[i])) positive = false;
      else gp_scale = std::max(gp_scale, std::abs(gp[i]));
    }
  }
  bool continuous = positive;
  const double jump_tol = 1e-6 * std::max(gp_scale, 1e-300);
  for (int i = 1; continuous && i + 1 < n_grid; ++i) {
    double a = i * h, b = (i + 1) * h;
    double ga = gp[i], gb = gp[i + 1];
    for (int k = 0; k < 40; ++k) {
      const double m = 0.5 * (a + b);
      const double gm = detail::g_prime(gen, m);
      if (std::abs(gm - ga) >= std::abs(gb - gm)) {
        b = m;
        gb = gm;
      } else {
        a = m;
        ga = gm;
      }
    }
    if (!(std::abs(gb - ga) <= jump_tol)) continuous = false;
  }
  rep.r1 = positive && continuous;

  int nonflat = 0;
  for (int i = 1; i < n_grid; ++i) {
    const double t = i * h;
    const double d = gen.dlog_g(t);
    if (std::isfinite(gen.log_g(t)) && std::isfinite(d) && std::abs(d) > 1e-12) ++nonflat;
  }
  rep.r2 = nonflat > 0.99 * (n_grid - 1);

  constexpr int kPoints = 81;
  std::vector<double> logt, logv;
  double sign = 0.0;
  bool ok = true;
  for (int k = 0; k < kPoints; ++k) {
    const double t = std::pow(10.0, k / 20.0);
    const double v = t * gen.dlog_g(t * t);
    if (k < 40) continue;
    if (!std::isfinite(v)) {
      ok = false;
      break;
    }
    const double s = (v > 0) - (v < 0);
    if (s != 0.0) {
      if (sign != 0.0 && s != sign) ok = false;
      sign = s;
    }
    logt.push_back(std::log(t));
    logv.push_back(v == 0.0 ? -745.0 : std::log(std::abs(v)));
  }
  if (!ok) {
    rep.r3 = TailBehaviour::inconclusive;
    return rep;
  }
  const double n = static_cast<double>(logt.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < logt.size(); ++i) {
    mx += logt[i];
    my += logv[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < logt.size(); ++i) {
    sxy += (logt[i] - mx) * (logv[i] - my);
    sxx += (logt[i] - mx) * (logt[i] - mx);
  }
  rep.r3_slope = sxy / sxx;
  rep.r3_tail_value = std::exp(logv.back());
  if (rep.r3_tail_value < 1e-6 || rep.r3_slope < -0.1) rep.r3 = TailBehaviour::tends_to_zero;
  else if (rep.r3_tail_value > 1e6 || rep.r3_slope > 0.1) rep.r3 = TailBehaviour::diverges;
  else rep.r3 = TailBehaviour::neither;
  return rep;
}

}  // namespace trunc_ellipse
