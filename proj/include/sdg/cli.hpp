#pragma once

#include "sdg/suites.hpp"

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdg::cli {

inline constexpr int kPass = 0;
inline constexpr int kAssertionFailure = 1;
inline constexpr int kSchemaError = 2;
inline constexpr int kBudgetExceeded = 3;

inline constexpr int kSchemaVersion = 1;

/// Config or results file that does not match the schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  RunSettings settings;
  std::vector<std::string> suites;
  std::string output_dir = "results";
};

/// Validates the whole document before anything runs. Unknown keys,
/// wrong types and unknown problem or suite names raise SchemaError.
ExperimentConfig parse_config(const std::string& text);

int run(const std::string& config_path, const std::string& output_override, std::ostream& out,
        std::ostream& err);

struct GoldenDiff {
  std::string key;  // suite/name
  double result = 0.0;
  double golden = 0.0;
  double tolerance = 0.0;
  std::string reason;  // "missing", "tolerance" or "non-finite"
};

/// Scalar-by-scalar comparison; throws SchemaError on malformed files or
/// mismatched schema versions.
std::vector<GoldenDiff> golden_diff(const std::string& results_json, const std::string& golden_json);

int golden_check(const std::string& results_path, const std::string& golden_path, std::ostream& out,
                 std::ostream& err);
int list_problems(std::ostream& out);
int list_suites(std::ostream& out);

}  // namespace sdg::cli
