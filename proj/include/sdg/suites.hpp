#pragma once

#include "sdg/bsde.hpp"
#include "sdg/problems.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sdg {

/// One judged number. `check` is "<=", ">=", "==" or "info" (reported only).
struct ResultScalar {
  std::string name;
  std::string suite;
  double value = 0.0;
  std::string check = "info";
  double threshold = 0.0;
  bool passed = true;
  double regression_tolerance = 1e-10;  // allowed drift against a golden run
};

struct ResultTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct SuiteOutput {
  std::vector<ResultScalar> scalars;
  std::vector<ResultTable> tables;
  std::vector<std::string> notes;

  bool passed() const;
};

struct RunSettings {
  std::string problem = "cancel-drift";
  ProblemOptions options;
  Solver solver = Solver::lattice_exact;
  int n_steps = 12;
  int branching = 2;
  int n_paths = 20000;
  std::uint64_t seed = 1;
  long node_budget = 2'000'000;
  double x0 = 0.0;                // root state, broadcast over coordinates
  std::string isaacs_mode = "auto";  // auto | expect-isaacs | expect-gap
  std::optional<InlineCoefficients> inline_coefficients;  // replaces `problem` when set
};

const std::vector<std::string>& suite_names();
std::string suite_description(const std::string& name);

/// Runs one suite. Throws InvalidArgument for unusable settings and
/// BudgetExceeded when a size bound is hit.
SuiteOutput run_suite(const std::string& name, const RunSettings& settings);

}  // namespace sdg
