#include "sdg/cli.hpp"

#include "sdg/game.hpp"
#include "sdg/grid.hpp"
#include "sdg/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace sdg::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw SchemaError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get(const json& obj, const std::string& key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw SchemaError(where + "." + key + " must be a string");
    return v.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw SchemaError(where + "." + key + " must be a number");
    return v.get<double>();
  } else {
    if (!v.is_number_integer() && !(v.is_number() && std::floor(v.get<double>()) == v.get<double>()))
      throw SchemaError(where + "." + key + " must be an integer");
    return static_cast<T>(v.get<double>());
  }
}

InlineCoefficients parse_inline(const json& j) {
  static const std::set<std::string> keys = {
      "drift_const", "drift_theta", "drift_gamma", "drift_cross", "drift_sin", "sigma",
      "driver_y",    "driver_z",    "driver_cos",  "terminal",    "lipschitz", "horizon",
      "theta",       "gamma"};
  reject_unknown(j, keys, "inline_problem");
  InlineCoefficients c;
  const std::string w = "inline_problem";
  c.drift_const = get(j, "drift_const", c.drift_const, w);
  c.drift_theta = get(j, "drift_theta", c.drift_theta, w);
  c.drift_gamma = get(j, "drift_gamma", c.drift_gamma, w);
  c.drift_cross = get(j, "drift_cross", c.drift_cross, w);
  c.drift_sin = get(j, "drift_sin", c.drift_sin, w);
  c.sigma = get(j, "sigma", c.sigma, w);
  c.driver_y = get(j, "driver_y", c.driver_y, w);
  c.driver_z = get(j, "driver_z", c.driver_z, w);
  c.driver_cos = get(j, "driver_cos", c.driver_cos, w);
  c.terminal = get(j, "terminal", c.terminal, w);
  c.lipschitz = get(j, "lipschitz", c.lipschitz, w);
  c.horizon = get(j, "horizon", c.horizon, w);
  auto grid = [&](const char* name, double& lo, double& hi, int& n) {
    if (!j.contains(name)) return;
    const json& g = j.at(name);
    if (!g.is_array() || g.size() != 3 || !g[0].is_number() || !g[1].is_number() ||
        !g[2].is_number_integer())
      throw SchemaError(w + "." + name + " must be [lo, hi, points]");
    lo = g[0].get<double>();
    hi = g[1].get<double>();
    n = g[2].get<int>();
  };
  grid("theta", c.theta_lo, c.theta_hi, c.theta_points);
  grid("gamma", c.gamma_lo, c.gamma_hi, c.gamma_points);
  return c;
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

json scalar_json(const ResultScalar& s) {
  json j;
  j["suite"] = s.suite;
  j["name"] = s.name;
  if (std::isfinite(s.value))
    j["value"] = s.value;
  else
    j["value"] = format_double(s.value);
  j["check"] = s.check;
  j["threshold"] = s.threshold;
  j["passed"] = s.passed;
  j["regression_tolerance"] = s.regression_tolerance;
  return j;
}

void write_table(const fs::path& path, const ResultTable& t) {
  std::ofstream f(path);
  f << "schema_version";
  for (const auto& c : t.columns) f << ',' << c;
  f << '\n';
  for (const auto& row : t.rows) {
    f << kSchemaVersion;
    for (double v : row) f << ',' << format_double(v);
    f << '\n';
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SchemaError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string results_file(const std::string& path) {
  return fs::is_directory(path) ? (fs::path(path) / "results.json").string() : path;
}

void diagnostic(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"schema_version", kSchemaVersion}, {"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("config is not valid JSON: ") + e.what());
  }
  static const std::set<std::string> keys = {
      "schema_version", "problem",     "inline_problem", "solver",     "n_steps",
      "branching",      "n_paths",     "seed",           "node_budget", "theta_points",
      "gamma_points",   "x0",          "isaacs_mode",    "suites",     "output_dir"};
  reject_unknown(j, keys, "config");
  const std::string w = "config";
  if (!j.contains("schema_version")) throw SchemaError("config.schema_version is required");
  if (get<int>(j, "schema_version", 0, w) != kSchemaVersion)
    throw SchemaError("config.schema_version must be " + std::to_string(kSchemaVersion));

  ExperimentConfig c;
  RunSettings& s = c.settings;
  if (j.contains("problem") == j.contains("inline_problem"))
    throw SchemaError("config needs exactly one of 'problem' and 'inline_problem'");
  if (j.contains("problem")) {
    s.problem = get(j, "problem", s.problem, w);
    bool known = false;
    for (const auto& p : catalog()) known = known || p.key == s.problem;
    if (!known) throw SchemaError("unknown problem '" + s.problem + "'");
  } else {
    s.inline_coefficients = parse_inline(j.at("inline_problem"));
    s.problem = "inline";
  }
  const std::string solver = get<std::string>(j, "solver", "lattice-exact", w);
  if (solver == "lattice-exact")
    s.solver = Solver::lattice_exact;
  else if (solver == "lsmc")
    s.solver = Solver::lsmc;
  else
    throw SchemaError("config.solver must be 'lattice-exact' or 'lsmc'");
  s.n_steps = get(j, "n_steps", s.n_steps, w);
  s.branching = get(j, "branching", s.branching, w);
  s.n_paths = get(j, "n_paths", s.n_paths, w);
  s.seed = get<std::uint64_t>(j, "seed", s.seed, w);
  s.node_budget = get<long>(j, "node_budget", s.node_budget, w);
  s.options.theta_points = get(j, "theta_points", 0, w);
  s.options.gamma_points = get(j, "gamma_points", 0, w);
  s.x0 = get(j, "x0", s.x0, w);
  s.isaacs_mode = get(j, "isaacs_mode", s.isaacs_mode, w);
  if (s.isaacs_mode != "auto" && s.isaacs_mode != "expect-isaacs" && s.isaacs_mode != "expect-gap")
    throw SchemaError("config.isaacs_mode must be auto, expect-isaacs or expect-gap");
  if (s.n_steps < 1 || s.branching < 2 || s.n_paths < 1 || s.node_budget < 1)
    throw SchemaError("config sizes must be positive (branching >= 2)");
  if (s.options.theta_points < 0 || s.options.gamma_points < 0)
    throw SchemaError("config control grid sizes must be non-negative");

  if (!j.contains("suites") || !j.at("suites").is_array() || j.at("suites").empty())
    throw SchemaError("config.suites must be a non-empty array");
  const auto& names = suite_names();
  for (const auto& v : j.at("suites")) {
    if (!v.is_string()) throw SchemaError("config.suites entries must be strings");
    const std::string name = v.get<std::string>();
    if (std::find(names.begin(), names.end(), name) == names.end())
      throw SchemaError("unknown suite '" + name + "'");
    c.suites.push_back(name);
  }
  c.output_dir = get(j, "output_dir", c.output_dir, w);
  if (c.output_dir.empty()) throw SchemaError("config.output_dir must not be empty");
  return c;
}

int run(const std::string& config_path, const std::string& output_override, std::ostream& out,
        std::ostream& err) {
  ExperimentConfig config;
  ProblemSpec spec;
  try {
    config = parse_config(read_file(config_path));
    const NamedProblem problem = config.settings.inline_coefficients
                                     ? inline_problem(*config.settings.inline_coefficients)
                                     : find_problem(config.settings.problem);
    spec = problem.make(config.settings.options);
    spec.check();
  } catch (const SchemaError& e) {
    diagnostic(err, "schema", e.what());
    return kSchemaError;
  } catch (const InvalidArgument& e) {
    diagnostic(err, "schema", e.what());
    return kSchemaError;
  }
  if (!output_override.empty()) config.output_dir = output_override;

  const auto started = std::chrono::steady_clock::now();
  json scalars = json::array();
  json notes = json::array();
  json tables = json::array();
  std::vector<std::pair<std::string, ResultTable>> pending_tables;
  bool passed = true;
  int code = kPass;
  std::string failure;
  for (const auto& name : config.suites) {
    try {
      const SuiteOutput res = run_suite(name, config.settings);
      for (const auto& s : res.scalars) scalars.push_back(scalar_json(s));
      for (const auto& n : res.notes) notes.push_back(name + ": " + n);
      for (const auto& t : res.tables) pending_tables.emplace_back(name, t);
      passed = passed && res.passed();
    } catch (const BudgetExceeded& e) {
      failure = name + ": " + e.what();
      code = kBudgetExceeded;
      break;
    } catch (const std::exception& e) {
      // Settings accepted by the schema but refused by a solver.
      failure = name + ": " + e.what();
      code = kSchemaError;
      break;
    }
  }
  if (code == kSchemaError) {
    diagnostic(err, "schema", failure);
    return code;
  }
  if (code == kPass && !passed) code = kAssertionFailure;
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  for (const auto& [suite, t] : pending_tables) {
    const std::string file = suite + "__" + t.name + ".csv";
    write_table(dir / file, t);
    tables.push_back({{"suite", suite}, {"name", t.name}, {"file", file}});
  }
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, spec.horizon, config.settings.n_steps), spec.m,
                                         config.settings.branching);
  json meta = {
      {"version", kVersion},
      {"problem", config.settings.problem},
      {"spec_hash", std::to_string(fingerprint(spec))},
      {"lattice_hash", std::to_string(lattice_fingerprint(lat))},
      {"seed", config.settings.seed},
      {"n_steps", config.settings.n_steps},
      {"branching", config.settings.branching},
      {"n_paths", config.settings.n_paths},
      {"solver", config.settings.solver == Solver::lsmc ? "lsmc" : "lattice-exact"},
      {"threads", thread_count()},
      {"wall_time_seconds", wall},
      {"suites", config.suites},
  };
  json doc = {{"schema_version", kSchemaVersion}, {"metadata", meta}, {"passed", code == kPass},
              {"exit_code", code}, {"scalars", scalars}, {"tables", tables}, {"notes", notes}};
  if (!failure.empty()) doc["error"] = failure;
  std::ofstream(dir / "results.json") << doc.dump(2) << '\n';

  for (const auto& s : scalars) {
    if (!s["passed"].get<bool>()) {
      diagnostic(err, "assertion", s["suite"].get<std::string>() + "/" + s["name"].get<std::string>() +
                                       " = " + s["value"].dump() + " fails " + s["check"].get<std::string>() +
                                       " " + s["threshold"].dump());
    }
  }
  if (code == kBudgetExceeded) diagnostic(err, "budget", failure);
  out << (code == kPass ? "PASS" : "FAIL") << ' ' << (dir / "results.json").string() << '\n';
  return code;
}

std::vector<GoldenDiff> golden_diff(const std::string& results_json, const std::string& golden_json) {
  json r, g;
  try {
    r = json::parse(results_json);
    g = json::parse(golden_json);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("results file is not valid JSON: ") + e.what());
  }
  for (const json* doc : {&r, &g})
    if (!doc->is_object() || !doc->contains("schema_version") || !doc->contains("scalars") ||
        !(*doc)["scalars"].is_array())
      throw SchemaError("results file lacks schema_version or scalars");
  if (r["schema_version"] != g["schema_version"]) throw SchemaError("schema_version mismatch");

  std::map<std::string, double> have;
  for (const auto& s : r["scalars"]) {
    const std::string key = s.at("suite").get<std::string>() + "/" + s.at("name").get<std::string>();
    have[key] = s.at("value").is_number() ? s.at("value").get<double>() : NAN;
  }
  std::vector<GoldenDiff> diffs;
  for (const auto& s : g["scalars"]) {
    GoldenDiff d;
    d.key = s.at("suite").get<std::string>() + "/" + s.at("name").get<std::string>();
    d.golden = s.at("value").is_number() ? s.at("value").get<double>() : NAN;
    d.tolerance = s.at("regression_tolerance").get<double>();
    const auto it = have.find(d.key);
    if (it == have.end()) {
      d.result = NAN;
      d.reason = "missing";
      diffs.push_back(d);
      continue;
    }
    d.result = it->second;
    if (!std::isfinite(d.result) || !std::isfinite(d.golden)) {
      if (std::isfinite(d.result) || std::isfinite(d.golden)) {
        d.reason = "non-finite";
        diffs.push_back(d);
      }
      continue;
    }
    if (std::abs(d.result - d.golden) > d.tolerance) {
      d.reason = "tolerance";
      diffs.push_back(d);
    }
  }
  return diffs;
}

int golden_check(const std::string& results_path, const std::string& golden_path, std::ostream& out,
                 std::ostream& err) {
  std::vector<GoldenDiff> diffs;
  try {
    diffs = golden_diff(read_file(results_file(results_path)), read_file(results_file(golden_path)));
  } catch (const SchemaError& e) {
    diagnostic(err, "schema", e.what());
    return kSchemaError;
  } catch (const json::exception& e) {
    diagnostic(err, "schema", e.what());
    return kSchemaError;
  }
  json report = {{"schema_version", kSchemaVersion}, {"diffs", json::array()}};
  for (const auto& d : diffs)
    report["diffs"].push_back({{"scalar", d.key},
                               {"reason", d.reason},
                               {"result", format_double(d.result)},
                               {"golden", format_double(d.golden)},
                               {"tolerance", d.tolerance}});
  out << report.dump(2) << '\n';
  return diffs.empty() ? kPass : kAssertionFailure;
}

int list_problems(std::ostream& out) {
  for (const auto& p : catalog())
    out << p.key << "\t" << (p.isaacs_expected ? "isaacs" : "non-isaacs") << "\t" << p.summary << '\n';
  return kPass;
}

int list_suites(std::ostream& out) {
  for (const auto& s : suite_names()) out << s << "\t" << suite_description(s) << '\n';
  return kPass;
}

}  // namespace sdg::cli
