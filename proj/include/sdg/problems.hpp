#pragma once

#include "sdg/hamiltonian.hpp"
#include "sdg/problem.hpp"

#include <functional>
#include <string>
#include <vector>

namespace sdg {

/// How a catalogued fact is known.
enum class FactSource {
  by_construction,     // forced by the problem data
  published_result,    // a bound or identity stated in the literature
  independent_oracle,  // computed by a separate method in the tests
};

std::string to_string(FactSource source);

struct KnownFact {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  FactSource source = FactSource::by_construction;
  std::string note;
};

/// Grid overrides for problems built on uniform control grids (0 keeps the default).
struct ProblemOptions {
  int theta_points = 0;
  int gamma_points = 0;
};

struct NamedProblem {
  std::string key;
  std::string summary;
  std::function<ProblemSpec(const ProblemOptions&)> make;
  bool isaacs_expected = true;
  std::vector<KnownFact> facts;
};

/// Scalar game assembled from config numbers:
///   b = c0 + c_theta theta + c_gamma gamma + c_cross theta gamma + c_sin sin(x),
///   sigma constant, f = a_y y + a_z z + a_cos cos(x), Phi by name.
struct InlineCoefficients {
  double drift_const = 0.0;
  double drift_theta = 0.0;
  double drift_gamma = 0.0;
  double drift_cross = 0.0;
  double drift_sin = 0.0;
  double sigma = 1.0;
  double driver_y = 0.0;
  double driver_z = 0.0;
  double driver_cos = 0.0;
  std::string terminal = "tanh";  // tanh | sin | cos | clip | identity
  double lipschitz = 0.0;         // 0 picks a bound from the coefficients
  double horizon = 1.0;
  double theta_lo = -1.0, theta_hi = 1.0;
  int theta_points = 3;
  double gamma_lo = -1.0, gamma_hi = 1.0;
  int gamma_points = 3;
};

/// Wraps the coefficients as a catalog-style entry with key "inline".
NamedProblem inline_problem(const InlineCoefficients& c);

const std::vector<NamedProblem>& catalog();
const NamedProblem& find_problem(const std::string& key);
ProblemSpec make_problem(const std::string& key, const ProblemOptions& options = {});

/// Hamiltonian argument with A = 0, B = 0, p = e_1, y = 0, z = 0.
HamiltonianPoint unit_gradient_point(const ProblemSpec& spec);

/// Smooth field phi(t, x) = sin(x_1 + 0.3) used for the driver-freezing tests.
TestField freezing_test_field(int d, int m);

struct TraceRow {
  std::string anchor;
  std::string description;
  std::string suite;
  std::string tolerance;
};

/// Rows of docs/traceability.csv.
std::vector<TraceRow> read_traceability(const std::string& path);

/// Anchors that must each appear exactly once in the matrix.
const std::vector<std::string>& required_anchors();

}  // namespace sdg
