#pragma once

// Experiment configs, run directories and the per-subcommand experiments
// behind the dylab binary.

#include <openssl/evp.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dylab/band.hpp"
#include "dylab/circle.hpp"
#include "dylab/germ.hpp"
#include "dylab/holonomy.hpp"
#include "dylab/qicurve.hpp"
#include "dylab/rotation.hpp"

namespace dylab {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* tool_version = "0.1.0";
inline constexpr const char* output_root_env = "DYLAB_OUTPUT_ROOT";

// ---------------------------------------------------------------- formatting

/// Shortest decimal that reads back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string csv_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : width_(header.size()) { row(header); }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw DomainError("csv row width mismatch");
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(fields[i]);
    }
    out_ << "\r\n";
  }
  std::string str() const { return out_.str(); }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }
  std::size_t width_;
  std::ostringstream out_;
};

inline json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json to_json(const CheckReport& r) {
  json w = json::array();
  for (const auto& x : r.witnesses) w.push_back({{"x", x.x}, {"j", x.j}, {"lhs", x.lhs}, {"rhs", x.rhs}});
  json e = json::object();
  for (const auto& [k, v] : r.extras) e[k] = v;
  return {{"check", r.check}, {"n", r.n},           {"lhs_max", r.lhs_max}, {"rhs", r.rhs},
          {"ratio", r.ratio}, {"status", to_string(r.status)}, {"witnesses", w}, {"extras", e},
          {"note", r.note}};
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------- schema

enum class FieldType { integer, real, text, boolean, list };

struct FieldSpec {
  std::string name;
  FieldType type;
  json def;
  std::string help;
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k = {"cf",    "circle", "dy-verify", "qicurve", "hedgehog",
                                             "recur", "probe",  "holonomy",  "suite"};
  return k;
}

inline const std::vector<FieldSpec>& schema(const std::string& kind) {
  using T = FieldType;
  static const FieldSpec alpha{"alpha", T::text, "golden",
                               "rotation number: golden, (a+b*sqrt(d))/c, [0;a1,a2,(period)], exp-growth:r or decimal"};
  static const FieldSpec map{"map", T::text, "arnold:0,0.001@band=0.25", "lift spec, stages joined by '|'"};
  static const FieldSpec tune{"tune", T::boolean, true, "shift the map so its rotation number is alpha"};
  static const FieldSpec tune_tol{"tune_tol", T::real, "1e-11", "rotation number tolerance for tuning"};
  static const FieldSpec level{"level", T::integer, 5, "renormalization level n"};
  static const FieldSpec delta{"delta", T::real, "0.25", "band half-width"};
  static const FieldSpec coeffs{"coeffs", T::list, json::array({"1"}), "germ coefficients c2,c3,... as re[,im]"};
  static const FieldSpec r0{"r0", T::real, "0.1", "germ disk radius"};
  static const std::map<std::string, std::vector<FieldSpec>> table = {
      {"cf",
       {alpha, {"count", T::integer, 20, "number of convergents"}, {"brjuno", T::integer, 10, "Brjuno partial sum depth"}}},
      {"circle",
       {map, alpha, tune, tune_tol, level, {"grid", T::integer, 0, "renormalization grid (0: max(256, 4 q_n))"},
        {"check", T::text, "all", "comb, schwarzian, nonlin, gn or all"},
        {"samples", T::integer, 64, "sample points per check"}}},
      {"dy-verify",
       {map, alpha, tune, tune_tol, delta, level, {"samples", T::integer, 50, "number of (x0, y0) samples"},
        {"y0", T::real, "0", "fixed y0 in (0,1]; 0 draws y0 uniformly from [0.05, 1]"},
        {"dump_orbits", T::integer, 1, "orbits written to orbits.csv"}}},
      {"qicurve",
       {map, alpha, tune, tune_tol, delta, level, {"y0", T::real, "0.75", "curve height factor in (1/2, 1]"},
        {"resolution", T::integer, 0, "curve samples (0: max(256, 32 q_n))"},
        {"check", T::text, "all", "invariance, return, cover or all"}}},
      {"hedgehog",
       {alpha, coeffs, r0, {"N", T::integer, 1000, "orbit length for the stay test"},
        {"resolution", T::integer, 257, "grid points per diameter"}}},
      {"recur",
       {alpha, coeffs, r0, {"N", T::integer, 1000, "orbit length for the stay test"},
        {"resolution", T::integer, 257, "grid points per diameter"}, {"n_lo", T::integer, 3, "first level"},
        {"n_hi", T::integer, 8, "last level"}, {"max_points", T::integer, 0, "component points used (0: all)"},
        {"slack", T::real, "0.1", "allowed growth between levels"}}},
      {"probe",
       {alpha, coeffs, r0, {"seeds", T::integer, 1000, "number of seeds"},
        {"N", T::integer, 1000000, "iterations per direction"},
        {"inner", T::real, "0", "inner radius (0: r0/10)"}, {"outer", T::real, "0", "exit radius (0: r0/2)"}}},
      {"holonomy",
       {{"alpha", T::text, "golden", "eigenvalue ratio: decimal or rotation number spec"},
        {"perturb", T::list, json::array(), "monomials P|Q:j:k:re[:im]"},
        {"x0", T::real, "0.05", "transversal radius"}, {"leaf_radius", T::real, "0.05", "leaf domain radius"},
        {"tol", T::real, "1e-12", "local error tolerance"}, {"fit_degree", T::integer, 4, "fit degree"},
        {"sample_radius", T::real, "0", "fit circle radius (0: leaf_radius / 5)"}}},
      {"suite", {{"configs", T::list, json::array(), "config files"}}},
  };
  const auto it = table.find(kind);
  if (it == table.end()) throw ValidationError("kind", "unknown experiment kind '" + kind + "'");
  return it->second;
}

// ---------------------------------------------------------------- config

struct ExperimentConfig {
  std::string kind;
  std::uint64_t seed = 1;
  int digits = 10;
  json params = json::object();

  json canonical() const {
    return {{"kind", kind}, {"seed", seed}, {"precision", {{"digits", digits}}}, {"params", params}};
  }
  std::string canonical_text() const { return canonical().dump(); }
  std::string hash() const { return sha256_hex(canonical_text()); }
  std::string run_name() const { return kind + "-" + hash().substr(0, 16); }

  std::int64_t integer(const std::string& k) const { return params.at(k).get<std::int64_t>(); }
  std::size_t count(const std::string& k) const { return static_cast<std::size_t>(integer(k)); }
  double real(const std::string& k) const { return std::stod(params.at(k).get<std::string>()); }
  std::string text(const std::string& k) const { return params.at(k).get<std::string>(); }
  bool flag(const std::string& k) const { return params.at(k).get<bool>(); }
  std::vector<std::string> list(const std::string& k) const { return params.at(k).get<std::vector<std::string>>(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t\r\n") - a + 1);
}

inline json normalize_field(const FieldSpec& f, const json& v, const std::string& path) {
  switch (f.type) {
    case FieldType::integer: {
      if (v.is_number_integer()) {
        if (v.get<std::int64_t>() < 0) throw ValidationError(path, "must be non-negative");
        return v.get<std::int64_t>();
      }
      if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0 && d == std::floor(d) && d < 9e15) return static_cast<std::int64_t>(d);
      }
      if (v.is_string()) {
        const std::string s = trim(v.get<std::string>());
        // Accept 1e6 style spellings of integers.
        double d = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), d);
        if (r.ec == std::errc() && r.ptr == s.data() + s.size() && d >= 0 && d == std::floor(d) && d < 9e15)
          return static_cast<std::int64_t>(d);
      }
      throw ValidationError(path, "expected a non-negative integer");
    }
    case FieldType::real: {
      double d = 0;
      if (v.is_number()) {
        d = v.get<double>();
      } else if (v.is_string()) {
        const std::string s = trim(v.get<std::string>());
        const auto r = std::from_chars(s.data(), s.data() + s.size(), d);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ValidationError(path, "expected a number");
      } else {
        throw ValidationError(path, "expected a number");
      }
      if (!std::isfinite(d)) throw ValidationError(path, "must be finite");
      return format_real(d);
    }
    case FieldType::text:
      if (!v.is_string()) throw ValidationError(path, "expected a string");
      return trim(v.get<std::string>());
    case FieldType::boolean:
      if (v.is_boolean()) return v.get<bool>();
      if (v.is_string()) {
        const std::string s = trim(v.get<std::string>());
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
      }
      throw ValidationError(path, "expected true or false");
    case FieldType::list: {
      json out = json::array();
      if (v.is_string()) {
        // CLI form: items separated by ';'.
        std::stringstream ss(v.get<std::string>());
        std::string item;
        while (std::getline(ss, item, ';'))
          if (!trim(item).empty()) out.push_back(trim(item));
        return out;
      }
      if (!v.is_array()) throw ValidationError(path, "expected a list");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i].is_string()) {
          out.push_back(trim(v[i].get<std::string>()));
        } else if (v[i].is_number()) {
          out.push_back(format_real(v[i].get<double>()));
        } else {
          throw ValidationError(path + "[" + std::to_string(i) + "]", "expected a string");
        }
      }
      return out;
    }
  }
  throw ValidationError(path, "bad field type");
}

}  // namespace detail

/// Validates a raw config object and fills defaults.
inline ExperimentConfig validate_config(const json& raw) {
  if (!raw.is_object()) throw ValidationError("$", "config must be a JSON object");
  for (const auto& [k, v] : raw.items())
    if (k != "kind" && k != "seed" && k != "precision" && k != "params")
      throw ValidationError(k, "unknown top-level field");
  ExperimentConfig cfg;
  if (!raw.contains("kind") || !raw["kind"].is_string()) throw ValidationError("kind", "missing experiment kind");
  cfg.kind = raw["kind"].get<std::string>();
  const auto& fields = schema(cfg.kind);
  if (raw.contains("seed")) {
    const json s = detail::normalize_field({"seed", FieldType::integer, 1, ""}, raw["seed"], "seed");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (raw.contains("precision")) {
    const json& p = raw["precision"];
    if (!p.is_object()) throw ValidationError("precision", "expected an object");
    for (const auto& [k, v] : p.items()) {
      if (k != "digits") throw ValidationError("precision." + k, "unknown field");
      cfg.digits = static_cast<int>(
          detail::normalize_field({"digits", FieldType::integer, 10, ""}, v, "precision.digits").get<std::int64_t>());
      if (cfg.digits < 1 || cfg.digits > 15) throw ValidationError("precision.digits", "must lie in [1, 15]");
    }
  }
  json params = json::object();
  if (raw.contains("params")) {
    if (!raw["params"].is_object()) throw ValidationError("params", "expected an object");
    params = raw["params"];
  }
  for (const auto& [k, v] : params.items()) {
    const bool known = std::any_of(fields.begin(), fields.end(), [&](const FieldSpec& f) { return f.name == k; });
    if (!known) throw ValidationError("params." + k, "unknown field for kind '" + cfg.kind + "'");
  }
  for (const auto& f : fields) {
    const std::string path = "params." + f.name;
    cfg.params[f.name] = detail::normalize_field(f, params.contains(f.name) ? params[f.name] : f.def, path);
  }
  return cfg;
}

inline json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError(p.string(), "cannot open config file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(p.string(), std::string("invalid JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------- run dirs

struct CheckStatus {
  std::string name;
  Status status = Status::pass;
  std::string note;
};

/// Writes artifacts straight into the run's temp directory.
class ArtifactSink {
 public:
  explicit ArtifactSink(fs::path dir) : dir_(std::move(dir)) {}
  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << content;
    if (!out) throw Error("cannot write artifact " + name);
    files_.push_back(name);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
  const std::vector<std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

/// Raised when an experiment dies half way; the temp artifacts are kept at preserved().
class PartialRunError : public Error {
 public:
  PartialRunError(const std::string& what, fs::path preserved)
      : Error(what + " (partial artifacts kept in " + preserved.string() + ")"), preserved_(std::move(preserved)) {}
  const fs::path& preserved() const { return preserved_; }

 private:
  fs::path preserved_;
};

struct RunOutcome {
  std::string name;
  fs::path dir;
  Status status = Status::pass;
  std::vector<CheckStatus> checks;
  std::vector<std::string> artifacts;
};

inline fs::path output_root(const std::string& override_root = {}) {
  if (!override_root.empty()) return override_root;
  if (const char* env = std::getenv(output_root_env); env && *env) return env;
  return "runs";
}

inline Status overall(const std::vector<CheckStatus>& checks) {
  Status s = Status::skipped_gate;
  for (const auto& c : checks) s = worst(s, c.status);
  return checks.empty() ? Status::pass : s;
}

inline int exit_code(Status s) { return s == Status::fail ? 1 : 0; }

using Experiment = std::function<std::vector<CheckStatus>(const ExperimentConfig&, ArtifactSink&)>;

inline const std::map<std::string, Experiment>& experiments();

inline RunOutcome run(const ExperimentConfig& cfg, const fs::path& root) {
  const std::string name = cfg.run_name();
  fs::create_directories(root);
  const std::string tag = std::to_string(::getpid());
  const fs::path tmp = root / (".tmp-" + name + "-" + tag), final_dir = root / name;
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  ArtifactSink sink(tmp);
  const std::string started = utc_now();
  std::vector<CheckStatus> checks;
  try {
    sink.write_json("config.json", cfg.canonical());
    checks = experiments().at(cfg.kind)(cfg, sink);
  } catch (const ValidationError&) {
    fs::remove_all(tmp);
    throw;
  } catch (const std::exception& e) {
    const fs::path keep = root / (name + ".partial");
    fs::remove_all(keep);
    fs::rename(tmp, keep);
    throw PartialRunError(e.what(), keep);
  }
  RunOutcome out{name, final_dir, overall(checks), checks, sink.files()};
  json cj = json::array();
  for (const auto& c : checks) cj.push_back({{"name", c.name}, {"status", to_string(c.status)}, {"note", c.note}});
  json manifest = {{"config_hash", cfg.hash()},   {"run", name},          {"kind", cfg.kind},
                   {"tool_version", tool_version}, {"started", started},  {"finished", utc_now()},
                   {"status", to_string(out.status)}, {"checks", cj}};
  std::vector<std::string> listed = sink.files();
  listed.push_back("manifest.json");
  manifest["artifacts"] = listed;
  sink.write_json("manifest.json", manifest);
  out.artifacts = listed;
  // Swap the finished directory into place.
  if (fs::exists(final_dir)) {
    const fs::path old = root / (".old-" + name + "-" + tag);
    fs::remove_all(old);
    fs::rename(final_dir, old);
    fs::rename(tmp, final_dir);
    fs::remove_all(old);
  } else {
    fs::rename(tmp, final_dir);
  }
  fs::remove_all(root / (name + ".partial"));
  return out;
}

// ---------------------------------------------------------------- inputs

namespace detail {

/// Library errors raised while reading inputs become validation errors.
template <class F>
auto field_guard(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError("params." + field, e.what());
  }
}

inline RotationNumber alpha_of(const ExperimentConfig& c) {
  return field_guard("alpha", [&] {
    RotationNumber a = parse_rotation_number(c.text("alpha"), {c.digits});
    // Rational or uncertifiable inputs surface on the first quotient.
    (void)a.quotient(1);
    (void)a.value();
    return a;
  });
}

inline CircleLift map_of(const ExperimentConfig& c) {
  return field_guard("map", [&] { return CircleLift::parse(c.text("map")); });
}

inline cplx parse_complex(const std::string& s, const std::string& field) {
  return field_guard(field, [&] {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
      const std::string t = trim(part);
      double d = 0;
      const auto r = std::from_chars(t.data(), t.data() + t.size(), d);
      if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw DomainError("bad number '" + t + "'");
      v.push_back(d);
    }
    if (v.empty() || v.size() > 2) throw DomainError("expected re or re,im");
    return cplx(v[0], v.size() > 1 ? v[1] : 0.0);
  });
}

inline Germ germ_of(const ExperimentConfig& c) {
  const double a = alpha_of(c).value();
  std::vector<cplx> co;
  const auto items = c.list("coeffs");
  for (std::size_t i = 0; i < items.size(); ++i) co.push_back(parse_complex(items[i], "coeffs[" + std::to_string(i) + "]"));
  while (!co.empty() && co.back() == cplx(0, 0)) co.pop_back();
  return field_guard("coeffs", [&] { return Germ(a, co, c.real("r0"), c.text("alpha")); });
}

/// Optionally tuned lift, with the tuning record for the report.
struct PreparedLift {
  CircleLift g;
  json record;
};

inline PreparedLift prepare_lift(const ExperimentConfig& c, const RotationNumber& alpha) {
  CircleLift base = map_of(c);
  json rec = {{"map", c.text("map")}, {"tuned", c.flag("tune")}};
  if (!c.flag("tune")) return {base, rec};
  const auto t = tune_parameter(base, alpha, c.real("tune_tol"));
  rec["shift"] = t.shift;
  rec["rho_lower"] = t.rho.lower;
  rec["rho_upper"] = t.rho.upper;
  return {t.lift, rec};
}

inline CheckStatus from_report(const CheckReport& r, const std::string& name) {
  return {name, r.status, r.note};
}

/// Runs a check that reports failure by throwing EstimateViolation.
template <class F>
CheckReport caught(F&& f) {
  try {
    return f();
  } catch (const EstimateViolation& v) {
    return v.report();
  }
}

inline std::uint64_t seed_bits(std::mt19937_64& rng) { return rng() >> 11; }
inline double unit(std::mt19937_64& rng) { return static_cast<double>(seed_bits(rng)) * 0x1.0p-53; }

}  // namespace detail

// ---------------------------------------------------------------- experiments

inline std::vector<CheckStatus> run_cf(const ExperimentConfig& c, ArtifactSink& sink) {
  const RotationNumber alpha = detail::alpha_of(c);
  const std::size_t want = c.count("count"), bN = c.count("brjuno");
  if (want == 0) throw ValidationError("params.count", "must be positive");
  const std::size_t depth = alpha.exact_depth(want);
  const auto conv = alpha.convergents(std::min(want, depth) + 1);
  Csv csv({"n", "a_n", "p_n", "q_n", "signed_error", "brjuno_partial"});
  bool det_ok = true, err_ok = true;
  const bool surd = alpha.kind() == RotationNumber::Kind::quadratic_surd;
  std::size_t rows = 0;
  std::string stop;
  for (std::size_t n = 0; n < std::min(want, depth); ++n) {
    std::vector<std::string> fields;
    try {
      const BigInt a = n == 0 ? BigInt(0) : alpha.quotient(n);
      const BigInt det = conv[n + 1].p * conv[n].q - conv[n].p * conv[n + 1].q;
      if (det != (n % 2 == 0 ? 1 : -1)) det_ok = false;
      if (surd) {
        if (!alpha.signed_error_exact(n).abs_scaled_less(conv[n + 1].q, 1)) err_ok = false;
      } else if (!(boost::multiprecision::abs(alpha.signed_error_big(n)) * BigFloat(conv[n + 1].q) < 1)) {
        err_ok = false;
      }
      const std::string brj = n <= bN ? csv_real(alpha.brjuno_partial_sum(n).value) : "";
      fields = {std::to_string(n), a.str(), conv[n].p.str(), conv[n].q.str(), csv_real(alpha.signed_error(n)), brj};
    } catch (const PrecisionError& e) {
      // Float seeds certify only a prefix.
      stop = e.what();
      break;
    }
    csv.row(fields);
    rows = n + 1;
  }
  sink.write("cf.csv", csv.str());
  json brjuno = {{"N", bN}};
  try {
    const BrjunoSum b = alpha.brjuno_partial_sum(bN);
    brjuno.update({{"value", b.value}, {"lower_bound_only", b.lower_bound_only}, {"exact_terms", b.exact_terms}});
  } catch (const PrecisionError& e) {
    brjuno.update({{"value", nullptr}, {"note", e.what()}});
  }
  std::vector<CheckStatus> checks = {
      {"determinant", det_ok ? Status::pass : Status::fail, "p_{n+1} q_n - p_n q_{n+1} = (-1)^n"},
      {"error_bound", err_ok ? Status::pass : Status::fail, "|q_n alpha - p_n| < 1/q_{n+1}"}};
  json rep = {{"alpha", c.text("alpha")},
              {"value", alpha.value()},
              {"rows", rows},
              {"truncated", rows < want},
              {"truncation_reason", stop},
              {"brjuno", brjuno},
              {"checks", json::array()}};
  for (const auto& ch : checks) rep["checks"].push_back({{"name", ch.name}, {"status", to_string(ch.status)}});
  sink.write_json("cf.json", rep);
  return checks;
}

inline std::vector<CheckStatus> run_circle(const ExperimentConfig& c, ArtifactSink& sink) {
  const RotationNumber alpha = detail::alpha_of(c);
  const std::string which = c.text("check");
  static const std::vector<std::string> all = {"comb", "schwarzian", "nonlin", "gn"};
  if (which != "all" && std::find(all.begin(), all.end(), which) == all.end())
    throw ValidationError("params.check", "expected comb, schwarzian, nonlin, gn or all");
  const auto [g, tuning] = detail::prepare_lift(c, alpha);
  const std::size_t n = c.count("level"), samples = std::max<std::size_t>(c.count("samples"), 1);
  const LevelIndex li = level_index(alpha, n);
  const std::size_t grid = c.count("grid") ? c.count("grid") : std::max<std::size_t>(256, 4 * li.q);
  const EstimateInputs in{renorm_data(g, alpha, n, grid), variation_log_derivative(g), schwarzian_sup(g)};
  Csv csv({"x", "m_n", "Dg_n"});
  for (std::size_t i = 0; i < in.rd.x.size(); ++i)
    csv.row({csv_real(in.rd.x[i]), csv_real(in.rd.m[i]), csv_real(in.rd.dgn[i])});
  sink.write("circle.csv", csv.str());

  std::vector<CheckStatus> checks;
  json reports = json::array();
  auto want = [&](const std::string& k) { return which == "all" || which == k; };
  if (want("comb")) {
    const auto r = check_interval_combinatorics(g, alpha, n, 0.0);
    const bool ok = r.disjoint && r.cover_ok;
    checks.push_back({"comb", ok ? Status::pass : Status::fail, ""});
    reports.push_back({{"check", "comb"},
                       {"n", n},
                       {"status", ok ? "pass" : "fail"},
                       {"max_overlap", r.max_overlap},
                       {"multiplicity", r.multiplicity},
                       {"disjoint", r.disjoint},
                       {"cover_ok", r.cover_ok}});
  }
  auto add = [&](const std::string& k, const CheckReport& r) {
    checks.push_back(detail::from_report(r, k));
    reports.push_back(to_json(r));
  };
  if (want("schwarzian")) add("schwarzian", detail::caught([&] { return check_schwarzian_estimate(g, in, samples); }));
  if (want("nonlin")) add("nonlin", detail::caught([&] { return check_iterate_nonlinearity(g, in, samples); }));
  if (want("gn")) add("gn", detail::caught([&] { return check_gn_estimates(g, in, samples); }));
  sink.write_json("circle.json", {{"alpha", c.text("alpha")},
                                  {"lift", tuning},
                                  {"level", {{"n", n}, {"q", li.q}, {"q_next", li.q_next}, {"p", li.p}}},
                                  {"V", in.V},
                                  {"S", in.S},
                                  {"M_n", in.rd.M},
                                  {"m_min", in.rd.m_min},
                                  {"reports", reports}});
  return checks;
}

inline std::vector<CheckStatus> run_dy(const ExperimentConfig& c, ArtifactSink& sink) {
  const RotationNumber alpha = detail::alpha_of(c);
  const double delta = c.real("delta"), y0_fixed = c.real("y0");
  if (!(delta > 0)) throw ValidationError("params.delta", "must be positive");
  if (y0_fixed < 0 || y0_fixed > 1) throw ValidationError("params.y0", "must lie in [0, 1]");
  const auto [g, tuning] = detail::prepare_lift(c, alpha);
  const std::size_t n = c.count("level");
  const LevelIndex li = level_index(alpha, n);
  const double tau = band_nonlinearity(g, delta);
  const RenormData rd = renorm_data(g, alpha, n, std::max<std::size_t>(256, 4 * li.q));
  const BandGates gates = band_gates(delta, tau, rd.M);
  json rep = {{"alpha", c.text("alpha")},
              {"lift", tuning},
              {"level", {{"n", n}, {"q", li.q}, {"q_next", li.q_next}}},
              {"delta", delta},
              {"tau", tau},
              {"M_n", rd.M},
              {"gate_ok", gates.ok()},
              {"gate_reason", gates.reason()}};
  if (!gates.ok()) {
    rep["violations"] = json::array();
    sink.write_json("dy.json", rep);
    return {{"dy_lemma", Status::skipped_gate, gates.reason()}, {"hyperbolic_dy", Status::skipped_gate, gates.reason()}};
  }
  std::mt19937_64 rng(c.seed);
  const std::size_t samples = c.count("samples"), dump = c.count("dump_orbits");
  Csv orbits({"sample", "j", "x_j", "re_z", "im_z", "re_y", "im_y"});
  json viol = json::array();
  double max_rel = 0, max_hyp = 0;
  std::size_t hyp_viol = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double x0 = detail::unit(rng);
    const double y0 = y0_fixed > 0 ? y0_fixed : 0.05 + 0.95 * detail::unit(rng);
    try {
      const BandOrbit o = track_dy_orbit(g, li, gates, x0, y0);
      max_rel = std::max(max_rel, o.max_deviation / y0);
      max_hyp = std::max(max_hyp, o.max_hyperbolic);
      if (!o.within_three_quarters)
        viol.push_back({{"sample", s}, {"x0", x0}, {"y0", y0}, {"j", o.worst_j}, {"kind", "deviation"},
                        {"value", o.max_deviation / y0}});
      if (o.max_hyperbolic > 3.05) {
        ++hyp_viol;
        viol.push_back({{"sample", s}, {"x0", x0}, {"y0", y0}, {"j", o.worst_hyperbolic_j}, {"kind", "hyperbolic"},
                        {"value", o.max_hyperbolic}});
      }
      if (s < dump)
        for (std::size_t j = 0; j < o.z.size(); ++j)
          orbits.row({std::to_string(s), std::to_string(j), csv_real(o.x[j]), csv_real(o.z[j].real()),
                      csv_real(o.z[j].imag()), csv_real(o.y[j].real()), csv_real(o.y[j].imag())});
    } catch (const BandEscapeError& e) {
      viol.push_back({{"sample", s}, {"x0", x0}, {"y0", y0}, {"kind", "band_escape"}, {"value", e.what()}});
      max_rel = std::max(max_rel, std::numeric_limits<double>::infinity());
    }
  }
  sink.write("orbits.csv", orbits.str());
  rep["samples"] = samples;
  rep["max_rel_deviation"] = max_rel;
  rep["max_hyperbolic"] = max_hyp;
  rep["violations"] = viol;
  sink.write_json("dy.json", rep);
  const std::size_t dev_viol = viol.size() - hyp_viol;
  return {{"dy_lemma", dev_viol == 0 ? Status::pass : Status::fail, std::to_string(dev_viol) + " violations"},
          {"hyperbolic_dy", max_hyp <= 3.0 ? Status::pass : (hyp_viol == 0 ? Status::warn : Status::fail),
           "max " + format_real(max_hyp)}};
}

inline json to_json(const HausdorffDistance& h) {
  return {{"raw", h.raw}, {"correction", h.correction}, {"bound", h.bound}};
}

inline std::vector<CheckStatus> run_qicurve(const ExperimentConfig& c, ArtifactSink& sink) {
  const RotationNumber alpha = detail::alpha_of(c);
  const std::string which = c.text("check");
  if (which != "all" && which != "invariance" && which != "return" && which != "cover")
    throw ValidationError("params.check", "expected invariance, return, cover or all");
  const double delta = c.real("delta");
  if (!(delta > 0)) throw ValidationError("params.delta", "must be positive");
  const double y0 = c.real("y0");
  if (!(y0 > 0.5 && y0 <= 1)) throw ValidationError("params.y0", "must lie in (1/2, 1]");
  const std::size_t n = c.count("level");
  if (n < 1) throw ValidationError("params.level", "must be at least 1");
  const auto [g, tuning] = detail::prepare_lift(c, alpha);
  const QICurve curve = build_curve(g, alpha, n, y0, c.count("resolution"));
  Csv csv({"x", "re_z", "im_z"});
  for (std::size_t i = 0; i < curve.z.size(); ++i)
    csv.row({csv_real(curve.x[i]), csv_real(curve.z[i].real()), csv_real(curve.z[i].imag())});
  sink.write("curve.csv", csv.str());

  const auto& li = curve.level;
  const RenormData rd = renorm_data(g, alpha, li.n, std::max<std::size_t>(256, 4 * li.q));
  const BandGates gates = band_gates(delta, band_nonlinearity(g, delta), rd.M);
  json rep = {{"alpha", c.text("alpha")},
              {"lift", tuning},
              {"n", n},
              {"y0", y0},
              {"resolution", curve.resolution},
              {"curve_level", {{"q", li.q}, {"q_next", li.q_next}}},
              {"height_min", curve.height_min},
              {"height_max", curve.height_max},
              {"gates", {{"tau", gates.tau}, {"M", gates.M_n}, {"ok", gates.ok()}, {"reason", gates.reason()}}}};
  std::vector<CheckStatus> checks;
  auto want = [&](const std::string& k) { return which == "all" || which == k; };
  if (want("invariance")) {
    if (!gates.ok()) {
      checks.push_back({"invariance", Status::skipped_gate, gates.reason()});
      rep["invariance"] = {{"status", to_string(Status::skipped_gate)}};
    } else {
      try {
        const auto r = verify_quasi_invariance(g, curve, gates);
        Csv inv({"j", "raw", "correction", "bound"});
        for (std::size_t j = 0; j < r.per_j.size(); ++j)
          inv.row({std::to_string(j), csv_real(r.per_j[j].raw), csv_real(r.per_j[j].correction),
                   csv_real(r.per_j[j].bound)});
        sink.write("invariance.csv", inv.str());
        rep["invariance"] = to_json(r.check);
        checks.push_back(detail::from_report(r.check, "invariance"));
      } catch (const BandEscapeError& e) {
        rep["invariance"] = {{"status", "fail"}, {"note", e.what()}};
        checks.push_back({"invariance", Status::fail, e.what()});
      }
    }
  }
  if (want("return")) {
    const auto r = verify_return_displacement(g, curve);
    rep["return"] = to_json(r.check);
    rep["return"]["displacement_qn"] = r.displacement_qn;
    rep["return"]["rigid_value"] = r.rigid_value;
    checks.push_back(detail::from_report(r.check, "return"));
  }
  if (want("cover")) {
    const auto r = osculating_cover_check(g, curve);
    rep["cover"] = to_json(r.check);
    checks.push_back(detail::from_report(r.check, "cover"));
  }
  if (which == "all") {
    const RenormData rn = renorm_data(g, alpha, n, std::max<std::size_t>(256, 4 * level_index(alpha, n).q));
    json pieces = json::array();
    Status ps = Status::skipped_gate;
    for (int i = 0; i < 4; ++i) {
      const auto r = piece_diameter(g, rn, (i + 0.5) / 4.0, y0);
      pieces.push_back(to_json(r));
      ps = worst(ps, r.status);
    }
    rep["pieces"] = pieces;
    checks.push_back({"piece_diameter", ps, ""});
  }
  sink.write_json("qicurve.json", rep);
  return checks;
}

inline json to_json(const HedgehogApprox& K) {
  return {{"resolution", K.resolution},
          {"h", K.h},
          {"N", K.N},
          {"r0", K.r0},
          {"disk_count", K.disk_count},
          {"retained_count", K.retained_count},
          {"component_count", K.component_count},
          {"retained_fraction", K.retained_fraction},
          {"touches", K.touches},
          {"inradius", K.inradius},
          {"invariance_defect", K.invariance_defect},
          {"boundary_count", K.boundary.size()}};
}

namespace detail {

inline HedgehogApprox hedgehog_of(const ExperimentConfig& c, const Germ& f) {
  const std::size_t N = c.count("N"), res = c.count("resolution");
  if (res < 256) throw ValidationError("params.resolution", "must be at least 256");
  if (N < 1000) throw ValidationError("params.N", "must be at least 1000");
  return hedgehog_approx(f, N, res);
}

}  // namespace detail

inline std::vector<CheckStatus> run_hedgehog(const ExperimentConfig& c, ArtifactSink& sink) {
  const Germ f = detail::germ_of(c);
  HedgehogApprox K;
  try {
    K = detail::hedgehog_of(c, f);
  } catch (const ModelError& e) {
    sink.write_json("hedgehog.json", {{"alpha", c.text("alpha")}, {"error", e.what()}});
    return {{"contains_zero", Status::fail, e.what()}};
  }
  Csv comp({"re", "im"}), bnd({"re", "im"});
  for (const cplx& z : K.component_points) comp.row({csv_real(z.real()), csv_real(z.imag())});
  for (const cplx& z : K.boundary) bnd.row({csv_real(z.real()), csv_real(z.imag())});
  sink.write("component.csv", comp.str());
  sink.write("boundary.csv", bnd.str());
  json rep = to_json(K);
  rep["alpha"] = c.text("alpha");
  sink.write_json("hedgehog.json", rep);
  return {{"contains_zero", Status::pass, ""},
          {"touches_boundary", K.touches ? Status::pass : Status::fail, "inradius " + format_real(K.inradius)}};
}

inline std::vector<CheckStatus> run_recur(const ExperimentConfig& c, ArtifactSink& sink) {
  const RotationNumber alpha = detail::alpha_of(c);
  const Germ f = detail::germ_of(c);
  const std::size_t lo = c.count("n_lo"), hi = c.count("n_hi");
  if (hi < lo) throw ValidationError("params.n_hi", "must be at least n_lo");
  const HedgehogApprox K = detail::hedgehog_of(c, f);
  const auto prof = recurrence_profile(f, K, alpha, lo, hi, c.count("max_points"), c.real("slack"));
  Csv csv({"n", "q_n", "sup_forward", "sup_backward", "sup", "excluded", "sampled", "shadow_divergence"});
  for (const auto& r : prof.rows)
    csv.row({std::to_string(r.n), std::to_string(r.q), csv_real(r.sup_forward), csv_real(r.sup_backward),
             csv_real(r.sup), std::to_string(r.excluded), std::to_string(r.sampled), csv_real(r.shadow_divergence)});
  sink.write("recurrence.csv", csv.str());
  std::vector<CheckStatus> checks = {
      {"profile_decreasing", prof.status, "worst step ratio " + format_real(prof.worst_step_ratio)}};
  bool precision = true;
  for (const auto& r : prof.rows) precision = precision && r.precision_ok;
  checks.push_back({"shadow_precision", precision ? Status::pass : Status::warn, ""});
  json rep = {{"alpha", c.text("alpha")},
              {"hedgehog", to_json(K)},
              {"worst_step_ratio", prof.worst_step_ratio},
              {"decreasing", prof.decreasing},
              {"status", to_string(prof.status)}};
  if (f.coeffs().empty()) {
    // Rotation: the profile is 2 r0 |sin(pi (q_n alpha - p_n))| up to the grid.
    double dev = 0;
    for (const auto& r : prof.rows)
      dev = std::max(dev, std::abs(r.sup - 2 * f.r0() * std::abs(std::sin(std::numbers::pi * alpha.signed_error(r.n)))));
    rep["closed_form_deviation"] = dev;
    checks.push_back({"closed_form", dev <= 1e-12 ? Status::pass : Status::fail, format_real(dev)});
  }
  sink.write_json("recurrence.json", rep);
  return checks;
}

inline std::vector<CheckStatus> run_probe(const ExperimentConfig& c, ArtifactSink& sink) {
  const Germ f = detail::germ_of(c);
  const double inner = c.real("inner") > 0 ? c.real("inner") : 0.1 * f.r0();
  const double outer = c.real("outer") > 0 ? c.real("outer") : 0.5 * f.r0();
  if (!(inner < outer && outer <= f.r0())) throw ValidationError("params.outer", "need inner < outer <= r0");
  const auto seeds = annulus_seeds(c.count("seeds"), inner, f.r0(), c.seed);
  const auto rep = convergence_probe(f, seeds, c.count("N"), inner, outer);
  Csv csv({"seed_re", "seed_im", "direction", "entered_at", "min_modulus"});
  for (const auto& s : rep.suspects)
    csv.row({csv_real(s.seed.real()), csv_real(s.seed.imag()), std::to_string(s.direction),
             std::to_string(s.entered_at), csv_real(s.min_modulus)});
  sink.write("suspects.csv", csv.str());
  json sj = json::array();
  for (const auto& s : rep.suspects)
    sj.push_back({{"seed", to_json(s.seed)},
                  {"direction", s.direction},
                  {"entered_at", s.entered_at},
                  {"min_modulus", s.min_modulus},
                  {"min_modulus_trace", s.min_modulus_trace}});
  sink.write_json("probe.json", {{"alpha", c.text("alpha")},
                                 {"seeds", rep.seeds},
                                 {"N", rep.N},
                                 {"inner", rep.inner},
                                 {"outer", rep.outer},
                                 {"entries", rep.entries},
                                 {"exits", rep.exits},
                                 {"escapes", rep.escapes},
                                 {"late", rep.late},
                                 {"suspects", sj},
                                 {"status", to_string(rep.status)}});
  return {{"no_suspects", rep.status, std::to_string(rep.suspects.size()) + " suspects"}};
}

namespace detail {

inline double holonomy_alpha(const ExperimentConfig& c) {
  const std::string s = c.text("alpha");
  double d = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), d);
  if (r.ec == std::errc() && r.ptr == s.data() + s.size()) return d;
  return alpha_of(c).value();
}

/// "P:j:k:re[:im]".
inline std::pair<char, Monomial> parse_monomial(const std::string& s, const std::string& field) {
  return field_guard(field, [&] {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(trim(p));
    if (parts.size() < 4 || parts.size() > 5 || (parts[0] != "P" && parts[0] != "Q"))
      throw DomainError("expected P|Q:j:k:re[:im]");
    const cplx v = parse_complex(parts[3] + (parts.size() == 5 ? "," + parts[4] : ""), field);
    return std::make_pair(parts[0][0], Monomial{std::stoi(parts[1]), std::stoi(parts[2]), v});
  });
}

}  // namespace detail

inline std::vector<CheckStatus> run_holonomy(const ExperimentConfig& c, ArtifactSink& sink) {
  const double a = detail::holonomy_alpha(c);
  std::vector<Monomial> P, Q;
  const auto items = c.list("perturb");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto [which, m] = detail::parse_monomial(items[i], "perturb[" + std::to_string(i) + "]");
    (which == 'P' ? P : Q).push_back(m);
  }
  const FoliationGerm F = detail::field_guard(
      "perturb", [&] { return FoliationGerm(a, P, Q, c.real("x0"), c.real("leaf_radius")); });
  const double tol = c.real("tol");
  if (!(tol > 0)) throw ValidationError("params.tol", "must be positive");
  const std::size_t degree = c.count("fit_degree");
  if (degree < 1) throw ValidationError("params.fit_degree", "must be at least 1");
  const double rho = c.real("sample_radius") > 0 ? c.real("sample_radius") : F.leaf_radius() / 5;

  std::vector<CheckStatus> checks;
  json rep = {{"alpha", c.text("alpha")}, {"alpha_value", a}, {"tol", tol}, {"linear", F.is_linear()}};
  const auto est = estimate_multiplier(F, tol);
  rep["multiplier"] = to_json(est.value);
  rep["modulus_defect"] = est.modulus_defect;
  rep["expected"] = to_json(std::polar(1.0, 2 * std::numbers::pi * a));
  rep["multiplier_error"] = std::abs(est.value - std::polar(1.0, 2 * std::numbers::pi * a));
  checks.push_back({"multiplier_modulus", est.modulus_defect <= 10 * tol ? Status::pass : Status::fail,
                    "||m| - 1| = " + format_real(est.modulus_defect)});

  const cplx y0 = est.h;
  const cplx back = transport(F, holonomy_map(F, y0, tol), tol, 1.0, 0.0);
  const double rt = std::abs(back - y0) / std::abs(y0);
  rep["reversal_error"] = rt;
  checks.push_back({"path_reversal", rt <= 10 * tol ? Status::pass : Status::fail, format_real(rt)});

  try {
    const auto fit = germ_from_holonomy(F, rho, degree, tol);
    json co = json::array();
    for (const cplx& v : fit.coeffs) co.push_back(to_json(v));
    rep["fit_coeffs"] = co;
    rep["alpha_recovered"] = fit.alpha_recovered;
    rep["residual"] = fit.residual;
    checks.push_back({"fit", Status::pass, "residual " + format_real(fit.residual)});
  } catch (const FitError& e) {
    rep["fit_coeffs"] = json::array();
    rep["alpha_recovered"] = nullptr;
    rep["residual"] = nullptr;
    checks.push_back({"fit", Status::fail, e.what()});
  }
  sink.write_json("holonomy.json", rep);
  return checks;
}

inline std::vector<CheckStatus> run_suite(const ExperimentConfig& c, ArtifactSink& sink) {
  const fs::path root = sink.dir().parent_path();
  json agg = json::array();
  std::vector<CheckStatus> checks;
  for (const std::string& path : c.list("configs")) {
    json entry = {{"config", path}};
    CheckStatus st{path, Status::fail, ""};
    try {
      const ExperimentConfig sub = validate_config(read_json_file(path));
      if (sub.kind == "suite") throw ValidationError("kind", "suites do not nest");
      const RunOutcome o = run(sub, root);
      entry["kind"] = sub.kind;
      entry["run"] = o.name;
      entry["status"] = to_string(o.status);
      json cj = json::array();
      for (const auto& ch : o.checks) cj.push_back({{"name", ch.name}, {"status", to_string(ch.status)}});
      entry["checks"] = cj;
      st.status = o.status;
    } catch (const std::exception& e) {
      entry["status"] = "fail";
      entry["reason"] = e.what();
      st.note = e.what();
    }
    agg.push_back(entry);
    checks.push_back(st);
  }
  sink.write_json("aggregate.json", {{"runs", agg}, {"status", to_string(overall(checks))}});
  return checks;
}

inline const std::map<std::string, Experiment>& experiments() {
  static const std::map<std::string, Experiment> m = {
      {"cf", run_cf},       {"circle", run_circle}, {"dy-verify", run_dy}, {"qicurve", run_qicurve},
      {"hedgehog", run_hedgehog}, {"recur", run_recur}, {"probe", run_probe}, {"holonomy", run_holonomy},
      {"suite", run_suite}};
  return m;
}

}  // namespace dylab
