#pragma once

#include "sdg/game.hpp"
#include "sdg/problem.hpp"

#include <string>
#include <vector>

namespace sdg {

enum class Boundary { clamped, one_sided };

/// Tensor grid on [lo, hi]^d with n_x intervals per axis.
struct PdeGrid {
  int d = 1;
  double lo = -5.0;
  double hi = 5.0;
  int n_x = 200;
  int n_t = 0;  // 0: smallest count allowed by the stability bound
  Boundary boundary = Boundary::clamped;

  double dx() const { return (hi - lo) / n_x; }
  long node_count() const;
  Vector node(long flat) const;
  bool on_boundary(long flat) const;
};

struct PdeSolution {
  PdeGrid grid;
  Side side = Side::lower;
  double horizon = 1.0;
  double dt = 0.0;
  std::vector<Vector> u;  // per time slice, flattened nodes
  double max_driver = 0.0;  // largest |f| met by the scheme

  int n_t() const { return static_cast<int>(u.size()) - 1; }
  double time(int k) const { return k == n_t() ? horizon : k * dt; }
  /// Multilinear interpolation in space and linear in time.
  double value(double t, const Vector& x) const;
};

/// Largest explicit step keeping the scheme monotone:
/// 1 / (sum a_ii / dx^2 + (sum |b_i| + L sum |sigma_i.|) / dx + L).
double stable_time_step(const ProblemSpec& spec, const PdeGrid& grid);

/// Explicit monotone scheme u_k = u_{k+1} + dt H(t, x, D^2 u, Du, u) with
/// central second differences and first differences upwinded per control
/// pair. The discrete maximum principle is checked at every step.
PdeSolution solve_hjbi_fd(const ProblemSpec& spec, const PdeGrid& grid, Side side);

/// sup over field nodes inside the box (at least 2 dx from its boundary and
/// with |x|_inf <= radius) of |V - u|.
double compare_game_vs_pde(const ValueField& field, const PdeSolution& pde, double radius);

struct SubSuperReport {
  double gap = 0.0;            // min over grid and time of (super - sub)
  double sub_residual = 0.0;   // min of S(u_{k+1}) - u_k for the subsolution
  double super_residual = 0.0; // max of S(u_{k+1}) - u_k for the supersolution
  bool sub_ok = false;
  bool super_ok = false;
  bool contract = false;       // gap >= -2 tol T
  std::string witness;
};

/// Residuals are the scheme operator reapplied to each field.
SubSuperReport sub_super_gap(const ProblemSpec& spec, const PdeSolution& sub,
                             const PdeSolution& super, double tolerance = 1e-12);

}  // namespace sdg
