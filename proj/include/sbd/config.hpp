#pragma once

// JSON experiment configuration: parsing with full error collection,
// built-in presets, rate-law construction and the config hash.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbd/chain.hpp"
#include "sbd/error.hpp"
#include "sbd/kinetics.hpp"

namespace sbd {

using json = nlohmann::json;

struct RateLawSpec {
  std::string type = "constant";  ///< constant | linear | power | zero
  double value = 1.0;             ///< constant
  double c0 = 0.0, c1 = 1.0;      ///< linear: c0 + c1 x
  double coef = 1.0, exponent = 0.0;  ///< power: coef x^exponent
  double eps_power = 0.0;         ///< raw chain only: multiply by eps^p
};

struct GridSpec {
  std::size_t J = 800;
  double x_max = 0.0;  ///< 0: automatic
  double cfl = 0.9;
};

struct EnsembleBlock {
  std::size_t n_traj = 50;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::size_t n_outputs = 64;
};

struct ExperimentConfig {
  std::string experiment = "custom";  ///< fig1 | fig2 | fig3 | convergence | stationary | custom
  RateLawSpec a, b;
  double alpha = 1.0, beta = 1.0;
  double alpha_eps_power = 0.0, beta_eps_power = 0.0;
  std::vector<double> eps;
  double m = 3.0;
  std::string initial = "pure_monomer";
  double T = 1.0;
  GridSpec grid;
  EnsembleBlock ensemble;
  std::string output_dir;
  double budget = 1e10;  ///< ceiling on the predicted event count of a run

  std::optional<double> snapshot_eps;  ///< fig1: one extra trajectory snapshotted at T
  double rho_tilde = 0.01;             ///< fig2
  double horizon = 1e6;                ///< fig2 / fig3 censoring time
  double threshold = 0.5;              ///< fig3: switch when u < (1 - threshold) m
  double band = 0.1;                   ///< fig3
  double path_dt = 0.05;               ///< fig3: spacing of recorded u paths
  double c = 1.0;                      ///< stationary: frozen concentration
  double burn_in = 20.0;
  double window = 1500.0;
  std::size_t n_max = 5;
  std::size_t batches = 20;
  double burn_in_tolerance = 0.15;

  json source;  ///< the document as given (after preset expansion)
};

// ---------------------------------------------------------------------------
// Presets

inline json law_json(const std::string& type, std::initializer_list<std::pair<const std::string, json>> fields) {
  json j = json::object();
  j["type"] = type;
  for (const auto& [k, v] : fields) j[k] = v;
  return j;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig1", "fig2", "fig3"};
  return names;
}

inline json preset(const std::string& name) {
  json j;
  if (name == "fig1") {
    j["experiment"] = "fig1";
    j["model"] = {{"a", law_json("constant", {{"value", 1.0}})},
                  {"b", law_json("constant", {{"value", 2.0}})},
                  {"alpha", 1.0},
                  {"beta", 1.0}};
    j["eps"] = {0.04, 0.02, 0.01};
    j["m"] = 3.0;
    j["T"] = 1.0;
    j["grid"] = {{"J", 800}, {"x_max", 0.0}, {"cfl", 0.9}};
    j["ensemble"] = {{"n_traj", 50}, {"seed", 20140601}, {"workers", 1}, {"n_outputs", 64}};
    j["snapshot_eps"] = 0.001;
    j["output_dir"] = "fig1";
  } else if (name == "fig2") {
    j["experiment"] = "fig2";
    j["model"] = {{"a", law_json("constant", {{"value", 5.0}, {"eps_power", 2.0}})},
                  {"b", law_json("power", {{"coef", 1.0}, {"exponent", 1.0}})},
                  {"alpha", 1.0},
                  {"alpha_eps_power", 4.0},
                  {"beta", 1.0},
                  {"beta_eps_power", 2.0}};
    j["eps"] = {0.1, 0.07, 0.05, 0.035, 0.025};
    j["m"] = 1.0;
    j["ensemble"] = {{"n_traj", 200}, {"seed", 20140602}, {"workers", 1}};
    j["rho_tilde"] = 0.01;
    j["horizon"] = 1e6;
    j["output_dir"] = "fig2";
  } else if (name == "fig3") {
    j["experiment"] = "fig3";
    j["model"] = {{"a", law_json("power", {{"coef", 1.0}, {"exponent", 1.0}})},
                  {"b", law_json("constant", {{"value", 1.0}})},
                  {"alpha", 1.0},
                  {"beta", 1.0}};
    j["eps"] = {0.04, 0.025};
    j["m"] = 3.0;
    j["ensemble"] = {{"n_traj", 10}, {"seed", 20140603}, {"workers", 1}};
    j["threshold"] = 0.5;
    j["band"] = 0.1;
    j["horizon"] = 5000.0;
    j["path_dt"] = 0.05;
    j["output_dir"] = "fig3";
  } else {
    fail(ErrorKind::ConfigError, "unknown preset '" + name + "' (expected fig1, fig2 or fig3)");
  }
  return j;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Reader {
 public:
  Reader(const json& j, std::string path, std::vector<std::string>& errors) : j_(j), path_(std::move(path)), errors_(errors) {}

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  void number(const std::string& key, double& out, bool required = false) {
    if (!has(key)) {
      if (required) missing(key);
      return;
    }
    const auto& v = j_.at(key);
    if (!v.is_number()) return bad(key, "must be a number");
    out = v.get<double>();
    if (!std::isfinite(out)) bad(key, "must be finite");
  }

  template <class I>
  void integer(const std::string& key, I& out, bool required = false) {
    if (!has(key)) {
      if (required) missing(key);
      return;
    }
    const auto& v = j_.at(key);
    if (!v.is_number_integer() && !(v.is_number_float() && v.get<double>() == std::floor(v.get<double>())))
      return bad(key, "must be an integer");
    const double d = v.get<double>();
    if (d < 0.0) return bad(key, "must be nonnegative");
    out = static_cast<I>(v.is_number_unsigned() ? v.get<std::uint64_t>() : static_cast<std::uint64_t>(d));
  }

  void string(const std::string& key, std::string& out, bool required = false) {
    if (!has(key)) {
      if (required) missing(key);
      return;
    }
    const auto& v = j_.at(key);
    if (!v.is_string()) return bad(key, "must be a string");
    out = v.get<std::string>();
  }

  void check(bool ok, const std::string& key, const std::string& what) {
    if (!ok) bad(key, what);
  }

  void unknown_keys(const std::set<std::string>& allowed) {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items())
      if (!allowed.count(k)) errors_.push_back(path_ + k + ": unknown key");
  }

  Reader child(const std::string& key) const { return Reader(j_.at(key), path_ + key + ".", errors_); }
  const json& at(const std::string& key) const { return j_.at(key); }
  std::string where(const std::string& key) const { return path_ + key; }

 private:
  void missing(const std::string& key) { errors_.push_back(path_ + key + ": required"); }
  void bad(const std::string& key, const std::string& what) { errors_.push_back(path_ + key + ": " + what); }

  const json& j_;
  std::string path_;
  std::vector<std::string>& errors_;
};

inline void parse_law(Reader r, RateLawSpec& law, std::vector<std::string>& errors, const std::string& where) {
  r.unknown_keys({"type", "value", "c0", "c1", "coef", "exponent", "eps_power"});
  r.string("type", law.type, true);
  r.number("eps_power", law.eps_power);
  if (law.type == "constant") {
    r.number("value", law.value, true);
    r.check(law.value > 0.0, "value", "must be > 0");
  } else if (law.type == "linear") {
    r.number("c0", law.c0);
    r.number("c1", law.c1);
    r.check(law.c0 >= 0.0 && law.c1 >= 0.0 && law.c0 + law.c1 > 0.0, "c0", "linear law needs c0, c1 >= 0, not both 0");
  } else if (law.type == "power") {
    r.number("coef", law.coef, true);
    r.number("exponent", law.exponent, true);
    r.check(law.coef > 0.0, "coef", "must be > 0");
    r.check(law.exponent >= 0.0, "exponent", "must be >= 0");
  } else if (law.type != "zero") {
    errors.push_back(where + ".type: expected constant, linear, power or zero");
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& doc) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  if (!doc.is_object()) fail(ErrorKind::ConfigError, "config must be a JSON object");
  detail::Reader r(doc, "", errors);
  r.unknown_keys({"experiment", "model", "eps", "m", "initial", "T", "grid", "ensemble", "output_dir", "budget",
                  "snapshot_eps", "rho_tilde", "horizon", "threshold", "band", "path_dt", "c", "burn_in", "window",
                  "n_max", "batches", "burn_in_tolerance"});
  r.string("experiment", cfg.experiment, true);
  static const std::set<std::string> kinds{"fig1", "fig2", "fig3", "convergence", "stationary", "custom"};
  if (!kinds.count(cfg.experiment)) errors.push_back("experiment: expected one of fig1, fig2, fig3, convergence, stationary, custom");

  if (!r.has("model")) {
    errors.push_back("model: required");
  } else if (!r.at("model").is_object()) {
    errors.push_back("model: must be an object");
  } else {
    auto mr = r.child("model");
    mr.unknown_keys({"a", "b", "alpha", "beta", "alpha_eps_power", "beta_eps_power"});
    for (const char* key : {"a", "b"}) {
      if (!mr.has(key))
        errors.push_back(std::string("model.") + key + ": required");
      else if (!mr.at(key).is_object())
        errors.push_back(std::string("model.") + key + ": must be an object");
      else
        detail::parse_law(mr.child(key), key[0] == 'a' ? cfg.a : cfg.b, errors, std::string("model.") + key);
    }
    mr.number("alpha", cfg.alpha, true);
    mr.number("beta", cfg.beta, true);
    mr.number("alpha_eps_power", cfg.alpha_eps_power);
    mr.number("beta_eps_power", cfg.beta_eps_power);
    mr.check(cfg.alpha >= 0.0, "alpha", "must be >= 0");
    mr.check(cfg.beta >= 0.0, "beta", "must be >= 0");
  }

  if (!r.has("eps")) {
    errors.push_back("eps: required");
  } else if (!r.at("eps").is_array() || r.at("eps").empty()) {
    errors.push_back("eps: must be a nonempty array");
  } else {
    for (const auto& v : r.at("eps")) {
      if (!v.is_number() || !(v.get<double>() > 0.0) || !(v.get<double>() < 1.0)) {
        errors.push_back("eps: every entry must be a number in (0, 1)");
        break;
      }
      cfg.eps.push_back(v.get<double>());
    }
    for (std::size_t k = 0; k + 1 < cfg.eps.size(); ++k)
      if (!(cfg.eps[k + 1] < cfg.eps[k])) {
        errors.push_back("eps: entries must be strictly decreasing");
        break;
      }
  }

  r.number("m", cfg.m);
  r.check(cfg.m > 0.0, "m", "must be > 0");
  r.string("initial", cfg.initial);
  r.check(cfg.initial == "pure_monomer", "initial", "only pure_monomer is supported");
  r.number("T", cfg.T);
  r.check(cfg.T > 0.0, "T", "must be > 0");
  r.string("output_dir", cfg.output_dir);
  r.number("budget", cfg.budget);
  r.check(cfg.budget > 0.0, "budget", "must be > 0");

  if (r.has("grid")) {
    auto g = r.child("grid");
    g.unknown_keys({"J", "x_max", "cfl"});
    g.integer("J", cfg.grid.J);
    g.number("x_max", cfg.grid.x_max);
    g.number("cfl", cfg.grid.cfl);
    g.check(cfg.grid.J >= 2, "J", "must be >= 2");
    g.check(cfg.grid.x_max >= 0.0, "x_max", "must be >= 0 (0 = automatic)");
    g.check(cfg.grid.cfl > 0.0 && cfg.grid.cfl <= 1.0, "cfl", "must be in (0, 1]");
  }
  if (r.has("ensemble")) {
    auto e = r.child("ensemble");
    e.unknown_keys({"n_traj", "seed", "workers", "n_outputs"});
    e.integer("n_traj", cfg.ensemble.n_traj);
    e.integer("seed", cfg.ensemble.seed);
    e.integer("workers", cfg.ensemble.workers);
    e.integer("n_outputs", cfg.ensemble.n_outputs);
    e.check(cfg.ensemble.n_traj >= 2, "n_traj", "must be >= 2");
    e.check(cfg.ensemble.workers >= 1, "workers", "must be >= 1");
    e.check(cfg.ensemble.n_outputs >= 1, "n_outputs", "must be >= 1");
  }

  if (r.has("snapshot_eps")) {
    double s = 0.0;
    r.number("snapshot_eps", s);
    r.check(s > 0.0 && s < 1.0, "snapshot_eps", "must be in (0, 1)");
    cfg.snapshot_eps = s;
  }
  r.number("rho_tilde", cfg.rho_tilde);
  r.check(cfg.rho_tilde > 0.0, "rho_tilde", "must be > 0");
  r.number("horizon", cfg.horizon);
  r.check(cfg.horizon > 0.0, "horizon", "must be > 0");
  r.number("threshold", cfg.threshold);
  r.check(cfg.threshold > 0.0 && cfg.threshold <= 1.0, "threshold", "must be in (0, 1]");
  r.number("band", cfg.band);
  r.check(cfg.band > 0.0, "band", "must be > 0");
  r.number("path_dt", cfg.path_dt);
  r.check(cfg.path_dt >= 0.0, "path_dt", "must be >= 0 (0 disables paths)");
  r.number("c", cfg.c);
  r.check(cfg.c >= 0.0, "c", "must be >= 0");
  r.number("burn_in", cfg.burn_in);
  r.check(cfg.burn_in >= 0.0, "burn_in", "must be >= 0");
  r.number("window", cfg.window);
  r.check(cfg.window >= 0.0, "window", "must be >= 0");
  r.integer("n_max", cfg.n_max);
  r.check(cfg.n_max >= 1, "n_max", "must be >= 1");
  r.integer("batches", cfg.batches);
  r.check(cfg.batches >= 2, "batches", "must be >= 2");
  r.number("burn_in_tolerance", cfg.burn_in_tolerance);
  r.check(cfg.burn_in_tolerance > 0.0, "burn_in_tolerance", "must be > 0");

  if (cfg.experiment == "fig2") {
    for (const auto& e : cfg.eps)
      if (std::floor(1.0 / e + 1e-9) < 2.0) {
        errors.push_back("eps: fig2 needs floor(1/eps) >= 2");
        break;
      }
  }

  if (!errors.empty()) {
    std::string msg = std::to_string(errors.size()) + " configuration error(s)";
    for (const auto& e : errors) msg += "\n  " + e;
    fail(ErrorKind::ConfigError, msg);
  }
  cfg.source = doc;
  return cfg;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::IOError, "cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Models

inline RateLaw make_law(const RateLawSpec& s) {
  if (s.type == "constant") return constant_law(s.value);
  if (s.type == "linear") return linear_law(s.c0, s.c1);
  if (s.type == "power") return power_law(s.coef, s.exponent);
  if (s.type == "zero") return zero_law();
  fail(ErrorKind::ConfigError, "unknown rate law type '" + s.type + "'");
}

inline RateModel make_model(const ExperimentConfig& cfg) { return RateModel{make_law(cfg.a), make_law(cfg.b), cfg.alpha, cfg.beta}; }

/// Unscaled chain coefficients at eps: a_i = a(eps i) eps^pa, b_i = b(eps i) eps^pb,
/// a_1 = alpha eps^p_alpha, b_2 = beta eps^p_beta.
inline RawCoefficients make_raw_coefficients(const ExperimentConfig& cfg, double eps) {
  const RateLaw a = make_law(cfg.a), b = make_law(cfg.b);
  const double sa = std::pow(eps, cfg.a.eps_power), sb = std::pow(eps, cfg.b.eps_power);
  return RawCoefficients{[a, sa, eps](Count i) { return a(eps * static_cast<double>(i)) * sa; },
                         [b, sb, eps](Count i) { return b(eps * static_cast<double>(i)) * sb; },
                         cfg.alpha * std::pow(eps, cfg.alpha_eps_power), cfg.beta * std::pow(eps, cfg.beta_eps_power)};
}

// ---------------------------------------------------------------------------
// Hash

/// 64-bit FNV-1a over the compact dump (object keys sorted).
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const json& doc) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a64(doc.dump());
  return os.str();
}

}  // namespace sbd
