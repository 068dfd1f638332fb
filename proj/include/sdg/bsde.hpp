#pragma once

#include "sdg/grid.hpp"
#include "sdg/hamiltonian.hpp"
#include "sdg/problem.hpp"
#include "sdg/sde.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace sdg {

inline constexpr int kFixedPointIterations = 50;
inline constexpr double kFixedPointTolerance = 1e-13;

struct StepResult {
  double y = 0.0;
  Vector z;
  double residual = 0.0;
};

/// One backward step: Z = E[Y' dW] / dt, then Y = E[Y'] + f(t, x, Y, Z) dt
/// solved by fixed-point iteration in Y. `next` holds the child values in
/// outcome order.
StepResult backward_step(const DriverFn& f, double t, const Vector& x, const Vector& theta,
                         const Vector& gamma, const Vector& hist,
                         const Eigen::Ref<const Vector>& next, const StepOutcomes& step,
                         double dt);

struct BsdeSolution {
  enum class Scheme { lattice_exact, lsmc };

  Scheme scheme = Scheme::lattice_exact;
  int start = 0;
  std::vector<Vector> Y;  // per slice, nodes (lattice) or paths (lsmc)
  std::vector<Matrix> Z;  // per slice < end, m x N (lattice) or N x m (lsmc)
  double max_residual = 0.0;

  // Lattice a-priori bound (|Phi|_inf + |f(.,0,0)|_inf T) e^{2LT} and whether it held.
  double apriori_bound = 0.0;
  bool apriori_ok = true;

  // LSMC extras.
  int degree = 0;
  std::vector<double> regression_residuals;  // RMS per slice
  double y0 = 0.0;                           // mean of Y at the start slice
  double y0_se = 0.0;                        // bootstrap standard error
  bool ridge_used = false;

  const Vector& at(int k) const { return Y[k - start]; }
};

/// Refuses dt * L >= 1 and names the smallest admissible step count.
void check_step_size(const ProblemSpec& spec, const TimeGrid& grid);

/// Exact-expectation backward recursion on a tree. The driver defaults to
/// spec.f with the controls stored on the tree.
BsdeSolution solve_lattice(const ProblemSpec& spec, const Tree& tree, const Vector& terminal,
                           const DriverFn* driver = nullptr);

/// Backward semigroup on a tree: solves from slice `end` (values eta) back
/// to slice `s` and returns the slice-s values.
Vector semigroup_apply(const ProblemSpec& spec, const Tree& tree, int s, int end,
                       const Vector& eta, const DriverFn* driver = nullptr);

struct LsmcOptions {
  int degree = 2;
  int end_slice = -1;  // -1: grid end
  int bootstrap = 100;
  std::uint64_t seed = 1;
  const DriverFn* driver = nullptr;
};

/// Regression Monte Carlo: conditional expectations of Y' and Y' dW / dt by
/// least squares on total-degree polynomials in X_k (plus the noise history
/// linearly for discrete-random problems). Rank-deficient designs fall back
/// to ridge with lambda = 1e-8 trace and set ridge_used.
BsdeSolution solve_lsmc(const ProblemSpec& spec, const PathEnsemble& ens,
                        const StateTrajectory& traj, const Vector& terminal,
                        const LsmcOptions& options = {});

enum class Solver { lattice_exact, lsmc };

struct PayoffOptions {
  Solver solver = Solver::lattice_exact;
  int branching = 2;
  int n_steps = 12;
  int n_paths = 20000;
  std::uint64_t seed = 7;
};

/// J(t_k, x; theta, gamma) = Y at (t_k, x) for the payoff BSDE under the
/// given feedback controls. On the lattice |J| <= L(T+1) is asserted for
/// problems with bounded terminal data.
double payoff_J(const ProblemSpec& spec, int k, const Vector& x, const ControlProcess& controls,
                const PayoffOptions& options = {});

struct ComparisonResult {
  long violations = 0;
  double max_excess = -INFINITY;  // max of Y1 - Y2 over nodes
};

/// Solves two BSDEs on the same tree and counts nodes with Y1 > Y2 + 1e-10.
ComparisonResult compare_bsde(const ProblemSpec& spec, const Tree& tree, const Vector& terminal1,
                              const DriverFn& driver1, const Vector& terminal2,
                              const DriverFn& driver2);

/// Largest L * |dW_j| over one-step outcomes; the one-step map is monotone
/// (and the discrete comparison principle holds) when this is <= 1.
double monotonicity_index(double lipschitz, const StepOutcomes& step);

struct FreezingGap {
  std::vector<double> deltas;
  std::vector<double> gaps;  // |Y1_tau - Y2_tau|
  double slope = 0.0;        // least-squares slope of log gap vs log delta
};

/// Gap between the BSDE driven by F along X^{tau, xi} and the one with X
/// frozen at xi, both with zero terminal value on [0, delta]. Each interval
/// is resolved with `substeps` binomial steps under constant controls.
FreezingGap freezing_gap(const ProblemSpec& spec, const TestField& field, const Vector& xi,
                         const std::vector<double>& deltas, ControlChoice controls = {},
                         int substeps = 8);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sdg
