#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "trunc_ellipse/error.hpp"
#include "trunc_ellipse/model.hpp"
#include "trunc_ellipse/special.hpp"

namespace trunc_ellipse {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Scalars
// ---------------------------------------------------------------------------

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Strict decimal parse; accepts "-inf"/"inf" only when allow_inf is set.
inline bool parse_double(std::string_view text, double& out, bool allow_inf = false) {
  const std::string s = trim(text);
  if (allow_inf) {
    std::string low;
    for (char ch : s) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (low == "-inf" || low == "-infinity") {
      out = -kInf;
      return true;
    }
    if (low == "inf" || low == "+inf" || low == "infinity") {
      out = kInf;
      return true;
    }
  }
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  if (first == last) return false;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<double> parse_list(std::string_view text, bool allow_inf, const std::string& what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    double v;
    if (!parse_double(text.substr(start, end - start), v, allow_inf))
      throw DomainError(what + ": cannot parse '" + std::string(text.substr(start, end - start)) + "' as a number");
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON output with 17 significant digits
// ---------------------------------------------------------------------------

namespace detail {

inline void dump_json(const Json& j, std::ostream& os, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string pad_close(static_cast<std::size_t>(indent * depth), ' ');
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{' << nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',' << nl;
        first = false;
        os << pad << Json(it.key()).dump() << (indent > 0 ? ": " : ":");
        dump_json(it.value(), os, indent, depth + 1);
      }
      os << nl << pad_close << '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // arrays of scalars stay on one line
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      os << '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) os << (flat ? ", " : ",");
        if (!flat) os << nl << pad;
        first = false;
        dump_json(e, os, indent, depth + 1);
      }
      if (!flat) os << nl << pad_close;
      os << ']';
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isfinite(v)) os << format_double(v);
      else os << "null";
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace detail

/// Writes `j` with doubles at %.17g; NaN and infinities become null.
inline void write_json(std::ostream& os, const Json& j, int indent = 2) {
  detail::dump_json(j, os, indent, 0);
  os << '\n';
}

inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Parses "normal", "t:4" / "student_t:4", "gamma:k[:scale]" / "gamma_radial:k[:scale]",
/// "kotz:N:beta:s".
inline GeneratorSpec parse_generator_spec(std::string_view spec) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t end = std::min(spec.find(':', start), spec.size());
    parts.push_back(trim(spec.substr(start, end - start)));
    start = end + 1;
  }
  const std::string& kind = parts.front();
  std::vector<double> a;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    double v;
    if (!parse_double(parts[i], v)) throw DomainError("generator spec '" + std::string(spec) + "': bad number '" + parts[i] + "'");
    a.push_back(v);
  }
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (a.size() < lo || a.size() > hi)
      throw DomainError("generator spec '" + std::string(spec) + "': wrong number of parameters");
  };
  try {
    if (kind == "normal") {
      need(0, 0);
      return GeneratorSpec::normal();
    }
    if (kind == "t" || kind == "student_t") {
      need(1, 1);
      return GeneratorSpec::student_t(a[0]);
    }
    if (kind == "gamma" || kind == "gamma_radial") {
      need(1, 2);
      return GeneratorSpec::gamma_radial(a[0], a.size() > 1 ? a[1] : 1.0);
    }
    if (kind == "kotz") {
      need(3, 3);
      return GeneratorSpec::kotz(a[0], a[1], a[2]);
    }
  } catch (const ConstructionError& e) {
    throw DomainError(e.what());
  }
  throw DomainError("generator spec '" + std::string(spec) + "': unknown kind '" + kind +
                    "' (expected normal, t, gamma or kotz)");
}

inline Json generator_to_json(const GeneratorSpec& gen) {
  Json j;
  j["kind"] = to_string(gen.kind());
  Json p = Json::object();
  std::visit(
      [&](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, gen::StudentT>) {
          p["dof"] = g.dof;
        } else if constexpr (std::is_same_v<T, gen::Kotz>) {
          p["n"] = g.n;
          p["beta"] = g.beta;
          p["s"] = g.s;
        } else if constexpr (std::is_same_v<T, gen::GammaRadial>) {
          p["shape"] = g.shape;
          p["scale"] = g.scale;
        } else if constexpr (std::is_same_v<T, gen::Tabulated>) {
          p["t"] = g.t;
          p["g"] = g.g;
        }
      },
      gen.params());
  j["params"] = p;
  return j;
}

namespace detail {

inline double json_real(const Json& j, const std::string& what, bool allow_neg_inf = false) {
  if (j.is_number()) {
    const double v = j.get<double>();
    if (std::isfinite(v)) return v;
  }
  if (allow_neg_inf && j.is_string()) {
    double v;
    if (parse_double(j.get<std::string>(), v, true) && v == -kInf) return v;
  }
  throw DomainError(what + ": expected a finite number" + (allow_neg_inf ? " or \"-inf\"" : ""));
}

inline const Json& json_field(const Json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) throw DomainError(ctx + ": missing field '" + key + "'");
  return j.at(key);
}

inline std::vector<double> json_real_array(const Json& j, const std::string& what, bool allow_neg_inf = false) {
  if (!j.is_array()) throw DomainError(what + ": expected an array");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i)
    v.push_back(json_real(j[i], what + "[" + std::to_string(i) + "]", allow_neg_inf));
  return v;
}

}  // namespace detail

inline GeneratorSpec generator_from_json(const Json& j) {
  if (j.is_string()) return parse_generator_spec(j.get<std::string>());
  const std::string kind = detail::json_field(j, "kind", "generator").get<std::string>();
  const Json params = j.contains("params") ? j.at("params") : Json::object();
  auto num = [&](const char* key) { return detail::json_real(detail::json_field(params, key, "generator params"), key); };
  try {
    if (kind == "normal") return GeneratorSpec::normal();
    if (kind == "student_t") return GeneratorSpec::student_t(num("dof"));
    if (kind == "kotz") return GeneratorSpec::kotz(num("n"), num("beta"), num("s"));
    if (kind == "gamma_radial")
      return GeneratorSpec::gamma_radial(num("shape"), params.contains("scale") ? num("scale") : 1.0);
    if (kind == "tabulated")
      return GeneratorSpec::tabulated(detail::json_real_array(detail::json_field(params, "t", "generator params"), "t"),
                                      detail::json_real_array(detail::json_field(params, "g", "generator params"), "g"));
  } catch (const ConstructionError& e) {
    throw DomainError(e.what());
  }
  throw DomainError("generator: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

inline Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) == -kInf) a.push_back("-inf");
    else a.push_back(v(i));
  }
  return a;
}

inline Json matrix_to_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_to_json(m.row(i).transpose()));
  return a;
}

inline Vector vector_from_json(const Json& j, const std::string& what, bool allow_neg_inf = false) {
  const std::vector<double> v = detail::json_real_array(j, what, allow_neg_inf);
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw DomainError(what + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  Matrix m(rows, rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Vector r = vector_from_json(j[static_cast<std::size_t>(i)], what + " row " + std::to_string(i));
    if (r.size() != rows) throw DomainError(what + ": must be square");
    m.row(i) = r.transpose();
  }
  return m;
}

inline Json model_to_json(const TruncatedEllipticalModel& m) {
  Json j;
  j["mu"] = vector_to_json(m.mu());
  j["sigma"] = matrix_to_json(m.sigma());
  j["c"] = vector_to_json(m.c());
  j["generator"] = generator_to_json(m.generator());
  return j;
}

/// {mu, sigma, c (entries may be "-inf"), generator (object or SPEC string, default normal)}.
inline TruncatedEllipticalModel model_from_json(const Json& j) {
  if (!j.is_object()) throw DomainError("model: expected a JSON object");
  const Vector mu = vector_from_json(detail::json_field(j, "mu", "model"), "mu");
  const Matrix sigma = matrix_from_json(detail::json_field(j, "sigma", "model"), "sigma");
  const Vector c = vector_from_json(detail::json_field(j, "c", "model"), "c", true);
  const GeneratorSpec gen = j.contains("generator") ? generator_from_json(j.at("generator")) : GeneratorSpec::normal();
  return build_model(mu, sigma, c, gen);
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DomainError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline TruncatedEllipticalModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct Dataset {
  Matrix rows;  // n x 2
  std::string source_path;
  long n = 0;
};

/// Reads a CSV with header `w1,w2`. Errors name the 1-based line number.
inline Dataset parse_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (!header) {
      std::string compact;
      for (char ch : t)
        if (ch != ' ' && ch != '\t') compact.push_back(ch);
      if (compact != "w1,w2") throw DataError(source + ":" + std::to_string(lineno) + ": expected header 'w1,w2'", lineno);
      header = true;
      continue;
    }
    if (t.empty()) continue;
    const auto comma = t.find(',');
    double a, b;
    if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos ||
        !parse_double(std::string_view(t).substr(0, comma), a) ||
        !parse_double(std::string_view(t).substr(comma + 1), b))
      throw DataError(source + ":" + std::to_string(lineno) + ": malformed row '" + t +
                          "' (expected two finite numbers)",
                      lineno);
    vals.push_back(a);
    vals.push_back(b);
  }
  if (!header) throw DataError(source + ": missing header 'w1,w2'", 1);
  if (vals.empty()) throw DataError(source + ": no data rows", lineno);
  Dataset d;
  d.n = static_cast<long>(vals.size() / 2);
  d.rows = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>>(vals.data(), d.n, 2);
  d.source_path = source;
  return d;
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'", 0);
  return parse_csv(in, path);
}

/// Writes rows as CSV at %.17g; with `header`, the first line is `w1,w2`.
inline void write_csv(std::ostream& os, const Matrix& rows, bool header) {
  if (header) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) os << (j ? "," : "") << 'w' << j + 1;
    os << '\n';
  }
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) os << (j ? "," : "") << format_double(rows(i, j));
    os << '\n';
  }
}

inline void save_csv(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'", 0);
  write_csv(out, d.rows, true);
  if (!out) throw DataError("write to '" + path + "' failed", 0);
}

}  // namespace trunc_ellipse
