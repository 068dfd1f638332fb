#include <doctest.h>

#include "sdg/cli.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace sdg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sdg_cli_" + std::to_string(getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

fs::path write_config(const fs::path& dir, const json& cfg) {
  fs::create_directories(dir);
  const fs::path path = dir / "config.json";
  std::ofstream(path) << cfg.dump(2);
  return path;
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

int run_config(const json& cfg, const fs::path& out, std::string* err_text = nullptr) {
  const fs::path cfg_path = write_config(out.string() + "_cfg", cfg);
  std::ostringstream o, e;
  const int code = cli::run(cfg_path.string(), out.string(), o, e);
  if (err_text) *err_text = e.str();
  return code;
}

double scalar(const json& results, const std::string& name) {
  for (const auto& s : results["scalars"])
    if (s["name"] == name) return s["value"].get<double>();
  FAIL("scalar not found: " << name);
  return 0.0;
}

json base_config(const std::string& problem, const std::string& suite) {
  return {{"schema_version", 1}, {"problem", problem}, {"suites", {suite}}};
}

}  // namespace

TEST_CASE("config schema rejects unknown keys and bad values") {
  CHECK_NOTHROW(cli::parse_config(base_config("cancel-drift", "dpp").dump()));
  json bad = base_config("cancel-drift", "dpp");
  bad["n_stepz"] = 3;
  CHECK_THROWS_AS(cli::parse_config(bad.dump()), cli::SchemaError);
  CHECK_THROWS_AS(cli::parse_config("{ not json"), cli::SchemaError);
  CHECK_THROWS_AS(cli::parse_config(base_config("nope", "dpp").dump()), cli::SchemaError);
  CHECK_THROWS_AS(cli::parse_config(base_config("cancel-drift", "nope").dump()), cli::SchemaError);
  json wrong_type = base_config("cancel-drift", "dpp");
  wrong_type["n_steps"] = "twelve";
  CHECK_THROWS_AS(cli::parse_config(wrong_type.dump()), cli::SchemaError);
  json version = base_config("cancel-drift", "dpp");
  version["schema_version"] = 2;
  CHECK_THROWS_AS(cli::parse_config(version.dump()), cli::SchemaError);
  json both = base_config("cancel-drift", "dpp");
  both["inline_problem"] = json::object();
  CHECK_THROWS_AS(cli::parse_config(both.dump()), cli::SchemaError);
  json inl = {{"schema_version", 1}, {"suites", {"isaacs"}}, {"inline_problem", {{"drift_gamma", 1.0}, {"colour", 2}}}};
  CHECK_THROWS_AS(cli::parse_config(inl.dump()), cli::SchemaError);
}

TEST_CASE("malformed config exits 2 without output") {
  const fs::path out = scratch("malformed");
  json cfg = base_config("cancel-drift", "dpp");
  cfg["mystery"] = true;
  std::string err;
  CHECK(run_config(cfg, out, &err) == cli::kSchemaError);
  CHECK_FALSE(fs::exists(out));
  CHECK(json::parse(err)["error"] == "schema");
}

TEST_CASE("dpp on cancel-drift passes with a vanishing residual") {
  const fs::path out = scratch("dpp");
  json cfg = base_config("cancel-drift", "dpp");
  cfg["n_steps"] = 6;
  cfg["n_paths"] = 5000;
  REQUIRE(run_config(cfg, out) == cli::kPass);
  const json r = read_json(out / "results.json");
  CHECK(r["schema_version"] == cli::kSchemaVersion);
  CHECK(scalar(r, "lower_residual") <= 1e-10);
  CHECK(scalar(r, "upper_residual") <= 1e-10);
  CHECK(r["metadata"].contains("spec_hash"));
  CHECK(r["metadata"].contains("lattice_hash"));
  // Tables carry the schema version column.
  std::ifstream csv(out / r["tables"][0]["file"].get<std::string>());
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("schema_version,", 0) == 0);
}

TEST_CASE("isaacs-gap with expect-gap records a gap of two") {
  const fs::path out = scratch("gap");
  json cfg = base_config("isaacs-gap", "isaacs");
  cfg["isaacs_mode"] = "expect-gap";
  REQUIRE(run_config(cfg, out) == cli::kPass);
  CHECK(scalar(read_json(out / "results.json"), "gap") == 2.0);
  cfg["isaacs_mode"] = "expect-isaacs";
  CHECK(run_config(cfg, scratch("gap_fail")) == cli::kAssertionFailure);
}

TEST_CASE("node budget overrun exits 3") {
  const fs::path out = scratch("budget");
  json cfg = base_config("pursuit-1d", "value");
  cfg["node_budget"] = 100;
  std::string err;
  CHECK(run_config(cfg, out, &err) == cli::kBudgetExceeded);
  CHECK(err.find("budget") != std::string::npos);
}

TEST_CASE("golden comparison: identical, perturbed, missing, reseeded") {
  const fs::path a = scratch("golden_a"), b = scratch("golden_b");
  json cfg = base_config("cancel-drift", "value");
  cfg["n_steps"] = 8;
  REQUIRE(run_config(cfg, a) == cli::kPass);
  REQUIRE(run_config(cfg, b) == cli::kPass);
  const std::string ra = (a / "results.json").string(), rb = (b / "results.json").string();
  std::ostringstream o, e;
  CHECK(cli::golden_check(ra, rb, o, e) == cli::kPass);

  json perturbed = read_json(ra);
  for (auto& s : perturbed["scalars"])
    if (s["name"] == "V_root") s["value"] = s["value"].get<double>() + 1e-6;
  auto diffs = cli::golden_diff(perturbed.dump(), read_json(rb).dump());
  REQUIRE(diffs.size() == 1);
  CHECK(diffs[0].key == "value/V_root");
  CHECK(diffs[0].reason == "tolerance");

  json missing = read_json(ra);
  missing["scalars"].erase(missing["scalars"].begin());
  diffs = cli::golden_diff(missing.dump(), read_json(rb).dump());
  REQUIRE(diffs.size() == 1);
  CHECK(diffs[0].reason == "missing");

  json versioned = read_json(ra);
  versioned["schema_version"] = 7;
  CHECK_THROWS_AS(cli::golden_diff(versioned.dump(), read_json(rb).dump()), cli::SchemaError);

  // A Monte Carlo suite rerun with another seed stays inside its error bands.
  const fs::path m1 = scratch("mc1"), m2 = scratch("mc2");
  json mc = base_config("one-player", "bsde-lsmc");
  mc["n_paths"] = 5000;
  REQUIRE(run_config(mc, m1) == cli::kPass);
  mc["seed"] = 99;
  REQUIRE(run_config(mc, m2) == cli::kPass);
  diffs = cli::golden_diff(read_json(m2 / "results.json").dump(), read_json(m1 / "results.json").dump());
  for (const auto& d : diffs) CHECK_MESSAGE(d.key.empty(), d.key);
}

TEST_CASE("lattice scalars are byte-identical across runs and worker counts") {
  json cfg = base_config("pursuit-1d", "value");
  cfg["n_steps"] = 6;
  setenv("SDG_THREADS", "1", 1);
  const fs::path a = scratch("det_a");
  REQUIRE(run_config(cfg, a) == cli::kPass);
  setenv("SDG_THREADS", "4", 1);
  const fs::path b = scratch("det_b");
  REQUIRE(run_config(cfg, b) == cli::kPass);
  unsetenv("SDG_THREADS");
  CHECK(read_json(a / "results.json")["scalars"].dump() == read_json(b / "results.json")["scalars"].dump());
}

TEST_CASE("listings") {
  std::ostringstream p, s;
  CHECK(cli::list_problems(p) == cli::kPass);
  CHECK(p.str().find("isaacs-gap\tnon-isaacs") != std::string::npos);
  CHECK(cli::list_suites(s) == cli::kPass);
  CHECK(s.str().find("pde-cross") != std::string::npos);
}
