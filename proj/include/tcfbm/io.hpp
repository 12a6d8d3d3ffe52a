#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcfbm/error.hpp"
#include "tcfbm/function.hpp"
#include "tcfbm/harnack.hpp"
#include "tcfbm/sde.hpp"

namespace tcfbm {

/** @brief Malformed or out-of-range experiment configuration. */
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

using json = nlohmann::json;

/// Decimal with 12 significant digits.
inline std::string fmt12(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// v rounded to 12 significant digits, so that JSON output carries at most 12.
inline json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::strtod(fmt12(v).c_str(), nullptr);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline double get_num(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + "." + key + ": must be finite");
  return x;
}

inline double get_num(const json& j, const char* key, const std::string& where, double dflt) {
  return j.contains(key) ? get_num(j, key, where) : dflt;
}

inline std::size_t get_count(const json& j, const char* key, const std::string& where, std::size_t dflt,
                             std::size_t lo, std::size_t hi) {
  if (!j.contains(key)) return dflt;
  const auto& v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError(where + "." + key + ": expected an integer");
  if (v.is_number_integer() && v.get<long long>() < 0) throw ConfigError(where + "." + key + ": must be nonnegative");
  const auto x = v.get<std::size_t>();
  if (x < lo || x > hi)
    throw ConfigError(where + "." + key + ": must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return x;
}

inline std::string get_str(const json& j, const char* key, const std::string& where,
                           std::optional<std::string> dflt = std::nullopt) {
  if (!j.contains(key)) {
    if (dflt) return *dflt;
    throw ConfigError(where + ": missing '" + key + "'");
  }
  if (!j.at(key).is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return j.at(key).get<std::string>();
}

inline std::vector<double> get_vec(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array() || v.empty()) throw ConfigError(where + "." + key + ": expected a number or a nonempty array");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(where + "." + key + ": array entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

}  // namespace detail

/**
 * @brief Function descriptor from JSON. Coordinates are one-based.
 *
 * {"op":"constant","value":c} {"op":"coord","index":i} {"op":"norm"} {"op":"add"|"mul","args":[…]}
 * {"op":"clamp","arg":…,"lo":a,"hi":b} {"op":"pow","arg":…,"n":k} {"op":"exp"|"log"|"abs"|"tanh"|"sin"|"cos","arg":…}
 */
inline FunctionDescriptor parse_function(const json& j, const std::string& where = "f") {
  using F = FunctionDescriptor;
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::string op = detail::get_str(j, "op", where);
  auto arg = [&]() {
    if (!j.contains("arg")) throw ConfigError(where + ": '" + op + "' needs 'arg'");
    return parse_function(j.at("arg"), where + ".arg");
  };
  try {
    if (op == "constant") {
      detail::check_keys(j, {"op", "value"}, where);
      return F::constant(detail::get_num(j, "value", where));
    }
    if (op == "coord") {
      detail::check_keys(j, {"op", "index"}, where);
      const auto i = detail::get_count(j, "index", where, 0, 1, 1u << 20);
      if (i == 0) throw ConfigError(where + ": missing 'index'");
      return F::coord(i - 1);
    }
    if (op == "norm") {
      detail::check_keys(j, {"op"}, where);
      return F::norm();
    }
    if (op == "add" || op == "mul") {
      detail::check_keys(j, {"op", "args"}, where);
      if (!j.contains("args") || !j.at("args").is_array() || j.at("args").empty())
        throw ConfigError(where + ": '" + op + "' needs a nonempty 'args' array");
      std::vector<F> a;
      for (std::size_t i = 0; i < j.at("args").size(); ++i)
        a.push_back(parse_function(j.at("args")[i], where + ".args[" + std::to_string(i) + "]"));
      return op == "add" ? F::add(std::move(a)) : F::mul(std::move(a));
    }
    if (op == "clamp") {
      detail::check_keys(j, {"op", "arg", "lo", "hi"}, where);
      return F::clamp(arg(), detail::get_num(j, "lo", where), detail::get_num(j, "hi", where));
    }
    if (op == "pow") {
      detail::check_keys(j, {"op", "arg", "n"}, where);
      return F::pow(arg(), static_cast<unsigned>(detail::get_count(j, "n", where, 1, 0, 64)));
    }
    detail::check_keys(j, {"op", "arg"}, where);
    if (op == "exp") return F::exp(arg());
    if (op == "log") return F::log(arg());
    if (op == "abs") return F::abs(arg());
    if (op == "tanh") return F::tanh(arg());
    if (op == "sin") return F::sin(arg());
    if (op == "cos") return F::cos(arg());
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown op '" + op + "'");
}

inline BernsteinSpec parse_bernstein(const json& j, const std::string& where) {
  detail::check_keys(j, {"drift", "stable_alpha", "stable_scale", "gamma_shape", "gamma_rate", "cp_rate", "cp_law", "cp_jump"},
                     where);
  BernsteinSpec s;
  s.drift = detail::get_num(j, "drift", where, 0.0);
  s.stable_alpha = detail::get_num(j, "stable_alpha", where, 0.5);
  s.stable_scale = detail::get_num(j, "stable_scale", where, j.contains("stable_alpha") ? 1.0 : 0.0);
  s.gamma_shape = detail::get_num(j, "gamma_shape", where, 0.0);
  s.gamma_rate = detail::get_num(j, "gamma_rate", where, 1.0);
  s.cp_rate = detail::get_num(j, "cp_rate", where, 0.0);
  const auto law = detail::get_str(j, "cp_law", where, std::string("exponential"));
  if (law == "exponential")
    s.cp_law = JumpLaw::exponential;
  else if (law == "deterministic")
    s.cp_law = JumpLaw::deterministic;
  else
    throw ConfigError(where + ".cp_law: expected 'exponential' or 'deterministic'");
  s.cp_jump = detail::get_num(j, "cp_jump", where, 1.0);
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return s;
}

inline ClockSpec parse_clock(const json& j, const std::string& where) {
  const std::string kind = detail::get_str(j, "kind", where);
  ClockSpec c;
  try {
    if (kind == "deterministic") {
      detail::check_keys(j, {"kind", "rate", "table_t", "table_z"}, where);
      if (j.contains("table_t") || j.contains("table_z")) {
        if (!j.contains("table_t") || !j.contains("table_z")) throw ConfigError(where + ": table needs table_t and table_z");
        c = ClockSpec::table(detail::get_vec(j, "table_t", where), detail::get_vec(j, "table_z", where));
      } else {
        c = ClockSpec::linear(detail::get_num(j, "rate", where, 1.0));
      }
    } else if (kind == "subordinator" || kind == "inverse_subordinator") {
      detail::check_keys(j, {"kind", "bernstein"}, where);
      if (!j.contains("bernstein")) throw ConfigError(where + ": missing 'bernstein'");
      const auto b = parse_bernstein(j.at("bernstein"), where + ".bernstein");
      c = kind == "subordinator" ? ClockSpec::subordinator(b) : ClockSpec::inverse_subordinator(b);
    } else {
      throw ConfigError(where + ".kind: expected deterministic, subordinator or inverse_subordinator");
    }
    c.validate();
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

inline DriftSpec parse_drift(const json& j, std::size_t d, const std::string& where) {
  detail::check_keys(j, {"kind", "rate", "certificate"}, where);
  const std::string kind = detail::get_str(j, "kind", where);
  const std::string cert = detail::get_str(j, "certificate", where, std::string("one_sided"));
  Certificate c;
  if (cert == "one_sided")
    c = Certificate::one_sided;
  else if (cert == "yamada_watanabe")
    c = Certificate::yamada_watanabe;
  else
    throw ConfigError(where + ".certificate: expected one_sided or yamada_watanabe");
  const double rate = detail::get_num(j, "rate", where, 1.0);
  if (kind == "zero") return zero_drift(d, c);
  if (kind == "linear") return linear_drift(d, rate, c);
  if (kind == "cubic") {
    if (c != Certificate::one_sided) throw ConfigError(where + ": cubic drift only has a one-sided Lipschitz certificate");
    return cubic_drift(d, rate);
  }
  throw ConfigError(where + ".kind: expected zero, linear or cubic");
}

struct RunConfig {
  double T = 1.0;
  std::size_t steps = 64;
  std::size_t n_paths = 10000;
  std::size_t n_z_samples = 10000;
  std::uint64_t seed = 1;
  double epsilon = 0.1;
  double delta = 0.99;
  double coupling_tolerance = 1e-8;
  std::size_t coupling_cells = 256;
  std::size_t z_cells = 256;
  std::vector<double> x{0.0}, y{1.0};
  double p = 2.0;
  InequalityKind inequality = InequalityKind::log;
  FunctionDescriptor f;
  double fd_step = 1e-3;
  std::vector<double> T_values{0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> theta{0.2, 0.5};
  std::optional<double> regime_index;
  double slope_tolerance = 0.1;
  std::string method = "cholesky";
};

struct ExperimentConfig {
  std::string task;
  NoiseModel model;
  DriftSpec drift;
  RunConfig run;
  json source;  ///< parsed document after command-line overrides

  std::uint64_t hash() const { return fnv1a64(source.dump()); }
};

inline const std::set<std::string>& known_tasks() {
  static const std::set<std::string> t{"simulate-fbm", "simulate-clock", "solve-sde", "couple",
                                       "verify-harnack", "moment-bounds", "exponent-sweep"};
  return t;
}

/// Strict parse; every violation is a ConfigError naming the offending field.
inline ExperimentConfig parse_config(const json& doc) {
  using namespace detail;
  ExperimentConfig cfg;
  cfg.source = doc;
  check_keys(doc, {"task", "model", "run"}, "config");
  cfg.task = get_str(doc, "task", "config");
  if (!known_tasks().count(cfg.task)) throw ConfigError("config.task: unknown task '" + cfg.task + "'");

  const json model = doc.contains("model") ? doc.at("model") : json::object();
  check_keys(model, {"dimension", "hurst", "noise_scale", "drift", "clock", "clocks", "v"}, "model");
  auto& m = cfg.model;
  m.dim = get_count(model, "dimension", "model", 1, 1, 64);
  if (model.contains("hurst")) m.hurst = get_vec(model, "hurst", "model");
  for (double h : m.hurst)
    if (!(h > 0.0 && h < 0.5))
      throw ConfigError("model.hurst: Hurst exponent must lie in (0,1/2), got " + fmt12(h));
  if (m.hurst.size() != 1 && m.hurst.size() != m.dim)
    throw ConfigError("model.hurst: give one value or one per coordinate");
  const std::string scale = get_str(model, "noise_scale", "model", std::string(cfg.task == "simulate-fbm" ? "unit" : "representation"));
  if (scale == "unit")
    m.scale = NoiseScale::unit_fbm;
  else if (scale == "representation")
    m.scale = NoiseScale::representation;
  else
    throw ConfigError("model.noise_scale: expected unit or representation");
  if (model.contains("clock") && model.contains("clocks")) throw ConfigError("model: give either 'clock' or 'clocks'");
  if (model.contains("clock")) m.clocks = {parse_clock(model.at("clock"), "model.clock")};
  if (model.contains("clocks")) {
    const auto& cs = model.at("clocks");
    if (!cs.is_array() || (cs.size() != 1 && cs.size() != m.dim))
      throw ConfigError("model.clocks: expected an array with one entry or one per coordinate");
    m.clocks.clear();
    for (std::size_t i = 0; i < cs.size(); ++i) m.clocks.push_back(parse_clock(cs[i], "model.clocks[" + std::to_string(i) + "]"));
  }
  if (model.contains("v")) {
    const auto& v = model.at("v");
    const std::string kind = get_str(v, "kind", "model.v");
    if (kind == "zero") {
      check_keys(v, {"kind"}, "model.v");
    } else if (kind == "jump") {
      check_keys(v, {"kind", "rate", "scale"}, "model.v");
      const double r = get_num(v, "rate", "model.v"), s = get_num(v, "scale", "model.v", 1.0);
      if (r < 0.0 || s < 0.0) throw ConfigError("model.v: rate and scale must be nonnegative");
      m.v = VSpec::jumps(r, s);
    } else {
      throw ConfigError("model.v.kind: expected zero or jump");
    }
  }
  cfg.drift = model.contains("drift") ? parse_drift(model.at("drift"), m.dim, "model.drift") : zero_drift(m.dim);
  try {
    m.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }

  const json run = doc.contains("run") ? doc.at("run") : json::object();
  check_keys(run, {"T", "steps", "n_paths", "n_z_samples", "seed", "epsilon", "delta", "coupling_tolerance",
                   "coupling_cells", "z_cells", "x", "y", "p", "inequality", "f", "fd_step", "T_values", "theta",
                   "regime_index", "slope_tolerance", "method"},
             "run");
  auto& r = cfg.run;
  r.T = get_num(run, "T", "run", 1.0);
  if (!(r.T > 0.0)) throw ConfigError("run.T: must be positive");
  r.steps = get_count(run, "steps", "run", 64, 1, 100000);
  r.n_paths = get_count(run, "n_paths", "run", 10000, 1, 100000000);
  r.n_z_samples = get_count(run, "n_z_samples", "run", 10000, 64, 100000000);
  if (run.contains("seed")) {
    const auto& s = run.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      throw ConfigError("run.seed: expected a nonnegative integer");
    r.seed = s.get<std::uint64_t>();
  }
  r.epsilon = get_num(run, "epsilon", "run", 0.1);
  if (!(r.epsilon > 0.0 && r.epsilon < 1.0)) throw ConfigError("run.epsilon: must lie in (0,1)");
  r.delta = get_num(run, "delta", "run", 0.99);
  if (!(r.delta > 0.0 && r.delta < 1.0)) throw ConfigError("run.delta: must lie in (0,1)");
  r.coupling_tolerance = get_num(run, "coupling_tolerance", "run", 1e-8);
  if (!(r.coupling_tolerance > 0.0 && r.coupling_tolerance < 1.0)) throw ConfigError("run.coupling_tolerance: must lie in (0,1)");
  r.coupling_cells = get_count(run, "coupling_cells", "run", 256, 8, 65536);
  r.z_cells = get_count(run, "z_cells", "run", 256, 1, 1000000);
  if (run.contains("x")) r.x = get_vec(run, "x", "run");
  if (run.contains("y")) r.y = get_vec(run, "y", "run");
  if (!run.contains("x")) r.x.assign(m.dim, 0.0);
  if (!run.contains("y")) {
    r.y.assign(m.dim, 0.0);
    r.y[0] = 1.0;
  }
  if (r.x.size() != m.dim || r.y.size() != m.dim) throw ConfigError("run.x/run.y: need one entry per coordinate");
  r.p = get_num(run, "p", "run", 2.0);
  if (!(r.p > 1.0)) throw ConfigError("run.p: must exceed 1");
  const std::string ineq = get_str(run, "inequality", "run", std::string("log"));
  if (ineq == "log")
    r.inequality = InequalityKind::log;
  else if (ineq == "power")
    r.inequality = InequalityKind::power;
  else if (ineq == "gradient")
    r.inequality = InequalityKind::gradient;
  else
    throw ConfigError("run.inequality: expected log, power or gradient");
  if (run.contains("f")) {
    r.f = parse_function(run.at("f"), "run.f");
    if (r.f.min_dimension() > m.dim) throw ConfigError("run.f: refers to a coordinate beyond the model dimension");
  } else {
    r.f = FunctionDescriptor::constant(1.0) + FunctionDescriptor::clamp(FunctionDescriptor::coord(0), 0.0, 1.0);
  }
  r.fd_step = get_num(run, "fd_step", "run", 1e-3);
  if (!(r.fd_step > 0.0)) throw ConfigError("run.fd_step: must be positive");
  if (run.contains("T_values")) r.T_values = get_vec(run, "T_values", "run");
  for (double t : r.T_values)
    if (!(t > 0.0)) throw ConfigError("run.T_values: entries must be positive");
  if (run.contains("theta")) r.theta = get_vec(run, "theta", "run");
  for (double t : r.theta)
    if (!(t > 0.0 && t < 1.0)) throw ConfigError("run.theta: entries must lie in (0,1)");
  if (run.contains("regime_index")) {
    r.regime_index = get_num(run, "regime_index", "run");
    if (!(*r.regime_index > 0.0)) throw ConfigError("run.regime_index: must be positive");
  }
  r.slope_tolerance = get_num(run, "slope_tolerance", "run", 0.1);
  if (!(r.slope_tolerance > 0.0)) throw ConfigError("run.slope_tolerance: must be positive");
  r.method = get_str(run, "method", "run", std::string("cholesky"));
  if (r.method != "cholesky" && r.method != "volterra") throw ConfigError("run.method: expected cholesky or volterra");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline json to_json(const Estimate& e) { return json{{"mean", num(e.mean)}, {"se", num(e.se)}, {"n", e.n}}; }

inline json to_json(const HarnackBound& b) {
  json j;
  j["value"] = num(b.value);
  j["se"] = num(b.se);
  j["diverged"] = b.diverged;
  if (!b.message.empty()) j["message"] = b.message;
  j["theta"] = num(b.theta);
  if (!b.theta_i.empty()) {
    json t = json::array();
    for (double v : b.theta_i) t.push_back(num(v));
    j["theta_i"] = t;
  }
  j["expectation"] = to_json(b.expectation);
  if (!b.expectation_i.empty()) {
    json t = json::array();
    for (const auto& v : b.expectation_i) t.push_back(to_json(v));
    j["expectation_i"] = t;
  }
  j["displacement"] = num(b.displacement);
  if (b.exp_moment.n) j["exp_moment"] = to_json(b.exp_moment);
  j["convention_gap"] = num(b.convention_gap);
  j["divergence_failures"] = b.divergence.failures;
  return j;
}

inline json to_json(const HarnackReport& r) {
  json j;
  j["kind"] = to_string(r.kind);
  j["anisotropic"] = r.anisotropic;
  j["lhs"] = to_json(r.lhs);
  j["rhs_expectation"] = to_json(r.rhs_expectation);
  j["bound"] = to_json(r.bound);
  j["rhs"] = num(r.rhs);
  j["rhs_se"] = num(r.rhs_se);
  j["combined_se"] = num(r.combined_se);
  j["margin"] = num(r.margin);
  j["pass"] = r.pass;
  j["diverged"] = r.diverged;
  if (!r.message.empty()) j["message"] = r.message;
  j["T"] = num(r.T);
  if (r.kind == InequalityKind::power) j["p"] = num(r.p);
  json x = json::array(), y = json::array();
  for (double v : r.x) x.push_back(num(v));
  for (double v : r.y) y.push_back(num(v));
  j["x"] = x;
  j["y"] = y;
  j["n_paths"] = r.n_paths;
  j["n_z_samples"] = r.n_z_samples;
  j["seeds"] = json{{"seed", r.seed}, {"lhs", r.lhs_seed}, {"rhs", r.rhs_seed}, {"z", r.z_seed}};
  return j;
}

/// CSV with a provenance comment line; numbers in 12 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header, std::uint64_t config_hash,
            std::uint64_t seed)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path);
    out_ << "# config_hash=" << hex64(config_hash) << " seed=" << seed << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }

  void row(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << fmt12(v[i]);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace tcfbm
