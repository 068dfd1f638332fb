#pragma once

#include "sdg/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sdg {

/// Finite discretisation of a compact control set. Points are the columns.
class ControlGrid {
 public:
  enum class Label { theta, gamma };

  ControlGrid() = default;
  ControlGrid(Matrix points, Label label);

  /// Uniform grid on [lo, hi] with `count` points (count == 1 gives the midpoint).
  static ControlGrid uniform(double lo, double hi, int count, Label label);
  static ControlGrid singleton(const Vector& point, Label label);

  int size() const { return static_cast<int>(points_.cols()); }
  int dim() const { return static_cast<int>(points_.rows()); }
  Vector point(int i) const { return points_.col(i); }
  const Matrix& points() const { return points_; }
  Label label() const { return label_; }

 private:
  Matrix points_;
  Label label_ = Label::theta;
};

enum class Randomness { markovian, discrete_random };

// Coefficient signatures. `hist` is the stopped noise history
// (W_{t_1 ^ t}, ..., W_{t_N ^ t}) stacked into one vector; it is empty for
// Markovian problems. All callables must be pure and thread-safe.
using DriftFn = std::function<Vector(double t, const Vector& x, const Vector& theta,
                                     const Vector& gamma, const Vector& hist)>;
using DiffusionFn = std::function<Matrix(double t, const Vector& x, const Vector& theta,
                                         const Vector& gamma, const Vector& hist)>;
using DriverFn = std::function<double(double t, const Vector& x, double y, const Vector& z,
                                      const Vector& theta, const Vector& gamma,
                                      const Vector& hist)>;
using TerminalFn = std::function<double(const Vector& x, const Vector& hist)>;

struct ProblemSpec {
  std::string name;
  int d = 1;
  int m = 1;
  double horizon = 1.0;
  double L = 1.0;

  DriftFn b;
  DiffusionFn sigma;
  DriverFn f;
  TerminalFn Phi;

  ControlGrid theta_grid;
  ControlGrid gamma_grid;

  Randomness randomness = Randomness::markovian;
  std::vector<double> partition;  // noise-history times (discrete_random only)

  /// |Phi| <= L holds, so the value bound L(T+1) applies.
  bool bounded_terminal = true;
  /// sigma does not depend on x (nor on the noise history).
  bool state_free_sigma = false;

  int history_size() const { return static_cast<int>(partition.size()) * m; }

  /// History at the initial time given the current cumulative noise.
  Vector initial_history(const Vector& w) const;
  /// Update the stopped history in place after stepping to t_next with noise w_next.
  void advance_history(Vector& hist, double t_next, const Vector& w_next) const;

  /// Throws InvalidArgument when dimensions or callables are inconsistent.
  void check() const;
};

/// Hash of the problem data: scalar fields, grids and coefficient values at
/// a fixed set of probe points (coefficients are opaque callables).
std::uint64_t fingerprint(const ProblemSpec& spec);

struct A1Report {
  double max_bound = 0.0;           // sup |(b, sigma)| + |f|
  double max_quotient = 0.0;        // sup of coefficient difference quotients
  double terminal_lipschitz = 0.0;  // sup |Phi(x) - Phi(x')| / |x - x'|
  double terminal_sup = 0.0;        // sup |Phi| on the probes (reported only)
  bool passed = false;
  std::string witness;              // description of the worst violating probe
};

/// Probe-based check of the boundedness and Lipschitz conditions on the
/// coefficients: pass iff max_bound <= L and every quotient <= 1.01 L.
A1Report validate_a1(const ProblemSpec& spec, int probes, std::uint64_t seed);

}  // namespace sdg
