#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trunc_ellipse/density.hpp"
#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/inference.hpp"
#include "trunc_ellipse/io.hpp"
#include "trunc_ellipse/model.hpp"
#include "trunc_ellipse/mvnprob.hpp"
#include "trunc_ellipse/polar.hpp"
#include "trunc_ellipse/sampling.hpp"
#include "trunc_ellipse/verify.hpp"

namespace trunc_ellipse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 2;
inline constexpr int kExitUsage = 64;

// ---------------------------------------------------------------------------
// JSON views of the result types
// ---------------------------------------------------------------------------

inline Json theta_json(const BivariateTheta& t) {
  return Json{{"mu1", t.mu1}, {"mu2", t.mu2}, {"sigma1", t.sigma1}, {"sigma2", t.sigma2}, {"rho", t.rho}};
}

inline Json fit_json(const FitReport& f) {
  Json j;
  j["theta_hat"] = theta_json(f.theta_hat);
  j["loglik"] = json_number(f.loglik);
  j["converged"] = f.converged;
  j["n_iterations"] = f.n_iterations;
  j["restricted"] = f.restricted;
  if (f.std_errors) {
    const auto& s = *f.std_errors;
    j["std_errors"] = Json{{"mu1", json_number(s[0])},
                           {"mu2", json_number(s[1])},
                           {"sigma1", json_number(s[2])},
                           {"sigma2", json_number(s[3])},
                           {"rho", json_number(s[4])}};
  } else {
    j["std_errors"] = nullptr;
  }
  return j;
}

inline Json regularity_json(const RegularityReport& r) {
  return Json{{"r1", r.r1},
              {"r2", r.r2},
              {"r3", to_string(r.r3)},
              {"r3_slope", json_number(r.r3_slope)},
              {"r3_tail_value", json_number(r.r3_tail_value)},
              {"all_conditions_met", r.all()}};
}

inline Json report_json(const VerificationReport& r) {
  Json j;
  j["scenario"] = Json{{"mu", vector_to_json(r.scenario.mu)},
                       {"sigma", matrix_to_json(r.scenario.sigma)},
                       {"c", vector_to_json(r.scenario.c)},
                       {"generator", generator_to_json(r.scenario.generator)},
                       {"p1", r.scenario.p1},
                       {"p2", r.scenario.p2}};
  j["n"] = r.n;
  j["test_name"] = to_string(r.test_name);
  j["decision"] = to_string(r.decision);
  j["p_value"] = json_number(r.p_value);
  j["replicate_rejection_rate"] = r.replicate_rejection_rate;
  j["replicates"] = r.replicates;
  j["alpha"] = r.alpha;
  j["band"] = Json{{"lower", r.band_lower}, {"upper", r.band_upper}};
  j["failed_replicates"] = r.failed_replicates;
  Json pv = Json::array();
  for (double p : r.replicate_p_values) pv.push_back(json_number(p));
  j["replicate_p_values"] = pv;
  j["hypotheses_met"] = r.hypotheses_met;
  j["regularity"] = r.regularity ? regularity_json(*r.regularity) : Json(nullptr);
  j["diagnostics"] = Json{{"sample_covariance", r.sample_covariance},
                          {"covariance_se", r.covariance_se},
                          {"dcor", r.dcor},
                          {"acceptance_rate", r.acceptance_rate}};
  return j;
}

// ---------------------------------------------------------------------------
// Argument helpers
// ---------------------------------------------------------------------------

inline double to_real(const std::string& s, const std::string& flag, bool allow_neg_inf = false) {
  double v;
  if (!parse_double(s, v, allow_neg_inf) || v == kInf)
    throw DomainError(flag + ": cannot parse '" + s + "' as a " +
                      (allow_neg_inf ? "finite number or -inf" : "finite number"));
  return v;
}

/// Joins "--flag -inf" into "--flag=-inf" so -inf is not mistaken for an option.
inline std::vector<std::string> join_negative_infinity(std::vector<std::string> args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string low = args[i];
    std::transform(low.begin(), low.end(), low.begin(), [](unsigned char ch) { return std::tolower(ch); });
    const bool is_neg_inf = low == "-inf" || low == "-infinity";
    if (is_neg_inf && !out.empty() && out.back().rfind("--", 0) == 0 && out.back().find('=') == std::string::npos) {
      out.back() += "=" + args[i];
      continue;
    }
    out.push_back(args[i]);
  }
  return out;
}

inline Json verify_scenario(const Json& s, std::uint64_t seed) {
  const std::string kind = s.value("kind", std::string("theorem1"));
  if (kind == "theorem1") {
    const Vector mu = vector_from_json(detail::json_field(s, "mu", "scenario"), "mu");
    const Matrix sigma = matrix_from_json(detail::json_field(s, "sigma", "scenario"), "sigma");
    const Vector c = vector_from_json(detail::json_field(s, "c", "scenario"), "c", true);
    const int p1 = s.value("p1", 1);
    const long n = s.value("n", 500L);
    const int reps = s.value("replicates", 200);
    const double alpha = s.value("alpha", 0.05);
    return report_json(verify_theorem1(sigma, mu, c, p1, n, reps, alpha, seed));
  }
  if (kind == "corollary1") {
    const GeneratorSpec gen = generator_from_json(detail::json_field(s, "generator", "scenario"));
    const double rho = detail::json_real(detail::json_field(s, "rho", "scenario"), "rho");
    const Vector c = s.contains("c") ? vector_from_json(s.at("c"), "c", true) : Vector(Vector::Zero(2));
    const long n = s.value("n", 100000L);
    const double alpha = s.value("alpha", 0.05);
    return report_json(verify_corollary1(gen, rho, c, n, seed, alpha));
  }
  throw DomainError("scenario: unknown kind '" + kind + "' (expected theorem1 or corollary1)");
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

/// Runs the command line `args` (without the program name). JSON goes to `out`,
/// diagnostics to `err`. Returns the process exit code.
inline int dispatch(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Truncated multivariate normal and elliptical distributions", "trunc-ellipse"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "trunc-ellipse 0.1.0");

  std::string model_path, data_path, out_path, scenario_path, w_text, mean_text, sigma_text, lower_text;
  std::string gen_text = "normal", c1_text, c2_text;
  double rho = 0.0, grid_max = 50.0;
  long n = 0, max_tries = 0;
  int n_grid = 1000;
  std::uint64_t seed = 0;
  bool restricted = false;

  auto* pdf = app.add_subcommand("pdf", "Truncated density at a point");
  pdf->add_option("--model", model_path, "Model JSON file")->required();
  pdf->add_option("--w", w_text, "Point, comma-separated")->required();

  auto* sample = app.add_subcommand("sample", "Draw from a truncated model");
  sample->add_option("--model", model_path, "Model JSON file")->required();
  sample->add_option("--n", n, "Number of rows")->required()->check(CLI::NonNegativeNumber);
  sample->add_option("--seed", seed, "Random seed")->required();
  sample->add_option("--out", out_path, "Output CSV (headerless); stdout when omitted");
  sample->add_option("--max-tries", max_tries, "Proposal budget for rejection sampling");

  auto* fit = app.add_subcommand("fit", "Maximum likelihood fit of the truncated bivariate normal");
  fit->add_option("--data", data_path, "CSV with header w1,w2")->required();
  fit->add_option("--c1", c1_text, "Truncation point of w1 (number or -inf)")->required();
  fit->add_option("--c2", c2_text, "Truncation point of w2 (number or -inf)")->required();
  fit->add_flag("--restricted", restricted, "Fix rho = 0");

  auto* lrt = app.add_subcommand("lrt", "Likelihood-ratio test of rho = 0");
  lrt->add_option("--data", data_path, "CSV with header w1,w2")->required();
  lrt->add_option("--c1", c1_text, "Truncation point of w1 (number or -inf)")->required();
  lrt->add_option("--c2", c2_text, "Truncation point of w2 (number or -inf)")->required();

  auto* polar = app.add_subcommand("polar", "Covariance of a centre-truncated bivariate elliptical law");
  polar->add_option("--rho", rho, "Correlation parameter")->required();
  polar->add_option("--generator", gen_text, "normal | t:DOF | gamma:K[:SCALE] | kotz:N:BETA:S");

  auto* zero = app.add_subcommand("zero-corr", "Moment ratio giving zero truncated covariance");
  zero->add_option("--rho", rho, "Correlation parameter")->required();

  auto* rect = app.add_subcommand("rectprob", "P(X >= lower) for X ~ N(mean, sigma)");
  rect->add_option("--mean", mean_text, "Mean, comma-separated")->required();
  rect->add_option("--sigma", sigma_text, "Covariance, row-major comma-separated")->required();
  rect->add_option("--lower", lower_text, "Lower bounds, comma-separated (-inf allowed)")->required();
  rect->add_option("--seed", seed, "Seed of the quasi-Monte Carlo randomization (p >= 4)");

  auto* ver = app.add_subcommand("verify", "Run a verification scenario");
  ver->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  ver->add_option("--seed", seed, "Random seed")->required();

  auto* reg = app.add_subcommand("regularity", "Check conditions R1-R3 for a generator");
  reg->add_option("--generator", gen_text, "normal | t:DOF | gamma:K[:SCALE] | kotz:N:BETA:S")->required();
  reg->add_option("--grid-max", grid_max, "Upper end of the t grid");
  reg->add_option("--n-grid", n_grid, "Grid size");

  std::vector<std::string> args = join_negative_infinity(raw_args);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (pdf->parsed()) {
      const TruncatedEllipticalModel model = load_model(model_path);
      const std::vector<double> wv = parse_list(w_text, false, "--w");
      if (static_cast<int>(wv.size()) != model.dimension())
        throw DomainError("--w: expected " + std::to_string(model.dimension()) + " values");
      const Vector w = Eigen::Map<const Vector>(wv.data(), static_cast<Eigen::Index>(wv.size()));
      const double lp = log_pdf(model, w);
      Json j;
      j["w"] = wv;
      j["in_support"] = std::isfinite(lp);
      j["log_pdf"] = json_number(lp);
      j["pdf"] = std::exp(lp);
      j["log_norm_const"] = norm_const(model);
      write_json(out, j);
      return kExitOk;
    }
    if (sample->parsed()) {
      const TruncatedEllipticalModel model = load_model(model_path);
      SampleOptions opt;
      opt.max_tries = max_tries;
      const SampleBatch batch = sample_truncated(model, n, seed, opt);
      if (out_path.empty()) {
        write_csv(out, batch.points, false);
        return kExitOk;
      }
      std::ofstream f(out_path);
      if (!f) throw DomainError("cannot write '" + out_path + "'");
      write_csv(f, batch.points, false);
      f.close();
      if (!f) throw DomainError("write to '" + out_path + "' failed");
      Json j;
      j["n"] = batch.points.rows();
      j["p"] = batch.points.cols();
      j["method"] = to_string(batch.method);
      j["acceptance_rate"] = batch.acceptance_rate;
      j["n_proposals"] = batch.n_proposals;
      j["seed"] = seed;
      j["out"] = out_path;
      write_json(out, j);
      return kExitOk;
    }
    if (fit->parsed() || lrt->parsed()) {
      const Dataset data = load_csv(data_path);
      Vector c(2);
      c << to_real(c1_text, "--c1", true), to_real(c2_text, "--c2", true);
      if (fit->parsed()) {
        const FitReport rep = fit_mle(data.rows, c, restricted, true);
        Json j = fit_json(rep);
        j["n"] = data.n;
        write_json(out, j);
        if (!rep.converged) err << "fit did not converge\n";
        return rep.converged ? kExitOk : kExitDomain;
      }
      Json j;
      try {
        const LrtResult r = lrt_independence(data.rows, c);
        j["theta_hat"] = theta_json(r.fit_full.theta_hat);
        j["loglik"] = json_number(r.fit_full.loglik);
        j["statistic"] = r.statistic;
        j["p_value"] = r.p_value;
        j["converged"] = true;
        j["n_iterations"] = r.fit_full.n_iterations + r.fit_null.n_iterations;
        j["n"] = data.n;
        j["fit_full"] = fit_json(r.fit_full);
        j["fit_null"] = fit_json(r.fit_null);
        write_json(out, j);
        return kExitOk;
      } catch (const FitError& e) {
        j["theta_hat"] = theta_json(e.fit_full().theta_hat);
        j["loglik"] = json_number(e.fit_full().loglik);
        j["statistic"] = nullptr;
        j["p_value"] = nullptr;
        j["converged"] = false;
        j["n_iterations"] = e.fit_full().n_iterations + e.fit_null().n_iterations;
        j["n"] = data.n;
        j["fit_full"] = fit_json(e.fit_full());
        j["fit_null"] = fit_json(e.fit_null());
        write_json(out, j);
        err << "error: " << e.what() << '\n';
        return kExitDomain;
      }
    }
    if (polar->parsed()) {
      const GeneratorSpec gen = parse_generator_spec(gen_text);
      const HValues h = h_functions(rho);
      const RadialMoments m = radial_moments(gen, 2);
      Json j;
      j["rho"] = rho;
      j["generator"] = generator_to_json(gen);
      j["psi_star"] = psi_star(rho);
      j["h1"] = h.h1;
      j["h2"] = h.h2;
      j["h3"] = h.h3;
      j["e_r"] = m.e_r;
      j["e_r2"] = m.e_r2;
      j["b"] = m.ratio_b;
      j["cov"] = m.e_r2 * h.h1 - m.e_r * m.e_r * h.h2 * h.h3;
      write_json(out, j);
      return kExitOk;
    }
    if (zero->parsed()) {
      const ZeroCorrSolution z = solve_zero_corr(rho);
      const HValues h = h_functions(rho);
      Json j;
      j["rho"] = rho;
      j["h1"] = h.h1;
      j["h2"] = h.h2;
      j["h3"] = h.h3;
      j["b_required"] = z.b_required;
      j["gamma_feasible"] = z.gamma_feasible;
      j["gamma_shape"] = json_number(z.gamma_shape);
      write_json(out, j);
      return kExitOk;
    }
    if (rect->parsed()) {
      const std::vector<double> mv = parse_list(mean_text, false, "--mean");
      const std::vector<double> sv = parse_list(sigma_text, false, "--sigma");
      const std::vector<double> lv = parse_list(lower_text, true, "--lower");
      const auto p = static_cast<Eigen::Index>(mv.size());
      if (static_cast<Eigen::Index>(sv.size()) != p * p || static_cast<Eigen::Index>(lv.size()) != p)
        throw DomainError("rectprob: --sigma needs p*p and --lower p values for p = " + std::to_string(p));
      for (double v : lv)
        if (v == kInf) throw DomainError("--lower: +inf is not a valid lower bound");
      const Vector mean = Eigen::Map<const Vector>(mv.data(), p);
      const Matrix sigma = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          sv.data(), p, p);
      const Vector lower = Eigen::Map<const Vector>(lv.data(), p);
      RectProbOptions opt;
      opt.seed = seed;
      const RectProbResult r = rect_prob(mean, sigma, lower, opt);
      Json j;
      j["value"] = r.value;
      j["abs_error_estimate"] = r.abs_error_estimate;
      j["method"] = to_string(r.method);
      j["n_evaluations"] = r.n_evaluations;
      j["accuracy_met"] = r.accuracy_met;
      write_json(out, j);
      return kExitOk;
    }
    if (ver->parsed()) {
      write_json(out, verify_scenario(read_json_file(scenario_path), seed));
      return kExitOk;
    }
    if (reg->parsed()) {
      const GeneratorSpec gen = parse_generator_spec(gen_text);
      Json j;
      j["generator"] = generator_to_json(gen);
      const Json r = regularity_json(check_generator_regularity(gen, grid_max, n_grid));
      for (auto it = r.begin(); it != r.end(); ++it) j[it.key()] = it.value();
      write_json(out, j);
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace trunc_ellipse::cli
