#pragma once

#include "sdg/bsde.hpp"
#include "sdg/grid.hpp"
#include "sdg/problem.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace sdg {

enum class Direction { upper, lower };

/// Nonlinear conditional expectation between two grid slices, driven by
/// +K(|y| + |z|) (upper) or -K(|y| + |z|) (lower). |z| is Euclidean.
struct SublinearQuery {
  double K = 0.0;
  int start = 0;
  int end = 0;
  Vector xi;  // values at the end slice
  Direction direction = Direction::upper;
};

DriverFn sublinear_driver(double K, Direction direction);

/// Exact backward recursion on a tree; returns the values at the start slice.
Vector sublinear_eval(const SublinearQuery& query, const Tree& tree);

/// Regression estimate on a path ensemble (state = W - W_start); returns
/// the per-path values at the start slice.
Vector sublinear_eval(const SublinearQuery& query, const PathEnsemble& ens,
                      const LsmcOptions& options = {});

/// Value of either functional on a payoff known at the start time:
/// upper: xi+ e^{K delta} - xi- e^{-K delta}; lower: xi+ e^{-K delta} - xi- e^{K delta}.
template <typename Scalar>
Scalar closed_form_measurable(Scalar xi, double K, double delta, Direction direction) {
  require(delta >= 0.0, "interval length must be nonnegative");
  using std::exp;
  using std::max;
  const Scalar pos = max(xi, Scalar(0));
  const Scalar neg = max(-xi, Scalar(0));
  const double grow = exp(K * delta);
  const double shrink = exp(-K * delta);
  return direction == Direction::upper ? pos * grow - neg * shrink : pos * shrink - neg * grow;
}

/// Piecewise-constant density process: one (h0, h) per node of each slice
/// in [start, end).
struct Tilt {
  std::vector<Vector> h0;  // per slice, N_k
  std::vector<Matrix> h;   // per slice, m x N_k

  double sup_norm() const;
};

struct TiltResult {
  Vector value;      // tilted expectation at the start slice
  double tolerance;  // 5 dt K |xi|_inf
};

/// E[xi exp(sum h dW - 1/2 sum (|h|^2 + 2 h0) dt) | start node] computed
/// exactly on the tree. Requires |h0| <= K and |h| <= K nodewise.
TiltResult tilt_bound(const SublinearQuery& query, const Tree& tree, const Tilt& tilt);

/// Independent uniform tilt with |h0|, |h| <= K on every node.
Tilt random_tilt(const Tree& tree, int start, int end, double K, std::uint64_t seed);

struct DominationReport {
  bool chain = false;      // lower^L[d] <= G[xi1] - G[xi2] <= upper^L[d]
  bool inf_bound = false;  // E sqrt|d| <= sqrt(lower^K[|d|] e^{(K+2)K Delta})
  bool sup_bound = false;  // upper^K[|d|] <= sqrt(e^{(K+2)K Delta} E|d|^2)
  double chain_margin = 0.0;  // min slack of the chain over nodes (>= -1e-9 passes)
  double inf_margin = 0.0;
  double sup_margin = 0.0;
  double tolerance = 0.0;     // c dt for the two moment bounds
  long chain_violations = 0;
  std::string witness;
};

/// Domination checks on a controlled tree between slices start and end.
/// The chain uses K = spec.L; the moment bounds use `K`.
DominationReport domination_suite(const ProblemSpec& spec, const Tree& tree, int start,
                                  const Vector& xi1, const Vector& xi2, double K);

}  // namespace sdg
