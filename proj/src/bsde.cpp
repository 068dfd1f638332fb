#include "sdg/bsde.hpp"

#include "sdg/parallel.hpp"
#include "sdg/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace sdg {

StepResult backward_step(const DriverFn& f, double t, const Vector& x, const Vector& theta,
                         const Vector& gamma, const Vector& hist,
                         const Eigen::Ref<const Vector>& next, const StepOutcomes& step,
                         double dt) {
  StepResult out;
  const Vector weighted = step.prob.cwiseProduct(next);
  const double ey = weighted.sum();
  out.z = step.increments * weighted / dt;
  double y = ey;
  for (int it = 0; it < kFixedPointIterations; ++it) {
    const double y_new = ey + f(t, x, y, out.z, theta, gamma, hist) * dt;
    const double change = std::abs(y_new - y);
    y = y_new;
    if (change <= kFixedPointTolerance * std::max(1.0, std::abs(y))) break;
  }
  if (!std::isfinite(y)) throw NumericalError("non-finite driver output at t = " + std::to_string(t));
  out.y = y;
  out.residual = std::abs(y - ey - f(t, x, y, out.z, theta, gamma, hist) * dt);
  return out;
}

void check_step_size(const ProblemSpec& spec, const TimeGrid& grid) {
  if (grid.dt() * spec.L >= 1.0) {
    const int need =
        static_cast<int>(std::floor((grid.horizon() - grid.t0()) * spec.L)) + 1;
    throw InvalidArgument("time step too large: dt * L = " + std::to_string(grid.dt() * spec.L) +
                          " >= 1; use n_steps >= " + std::to_string(need));
  }
}

namespace {

Vector tree_theta(const ProblemSpec& spec, const Tree& tree, int k, long i) {
  return tree.has_controls() ? spec.theta_grid.point(tree.theta_index[k - tree.start](i))
                             : spec.theta_grid.point(0);
}
Vector tree_gamma(const ProblemSpec& spec, const Tree& tree, int k, long i) {
  return tree.has_controls() ? spec.gamma_grid.point(tree.gamma_index[k - tree.start](i))
                             : spec.gamma_grid.point(0);
}

}  // namespace

Vector semigroup_apply(const ProblemSpec& spec, const Tree& tree, int s, int end,
                       const Vector& eta, const DriverFn* driver) {
  require(end >= s, "semigroup end slice precedes start slice");
  require(s >= tree.start && end <= tree.end(), "semigroup slices outside the tree");
  require(eta.size() == tree.nodes(end), "terminal values do not match the end slice");
  const DriverFn& f = driver ? *driver : spec.f;
  const int B = tree.branching();
  const double dt = tree.grid.dt();
  Vector next = eta;
  for (int k = end - 1; k >= s; --k) {
    const long N = tree.nodes(k);
    Vector cur(N);
    parallel_for(N, [&](long i) {
      Vector child(B);
      for (int j = 0; j < B; ++j) child(j) = next(tree.child(k, i, j));
      cur(i) = backward_step(f, tree.grid.time(k), tree.states_at(k).col(i),
                             tree_theta(spec, tree, k, i), tree_gamma(spec, tree, k, i),
                             tree.history_at(k).col(i), child, tree.step, dt)
                   .y;
    });
    next = std::move(cur);
  }
  return next;
}

BsdeSolution solve_lattice(const ProblemSpec& spec, const Tree& tree, const Vector& terminal,
                           const DriverFn* driver) {
  check_step_size(spec, tree.grid);
  const int n = tree.end();
  require(terminal.size() == tree.nodes(n), "terminal values do not match the leaves");
  const DriverFn& f = driver ? *driver : spec.f;
  const int B = tree.branching();
  const double dt = tree.grid.dt();

  BsdeSolution sol;
  sol.scheme = BsdeSolution::Scheme::lattice_exact;
  sol.start = tree.start;
  const int S = tree.slice_count();
  sol.Y.resize(S);
  sol.Z.resize(S - 1);
  sol.Y[S - 1] = terminal;

  double f00 = 0.0;
  const Vector zero_z = Vector::Zero(tree.step.dim());
  for (int k = n - 1; k >= tree.start; --k) {
    const long N = tree.nodes(k);
    Vector cur(N);
    Matrix z(tree.step.dim(), N);
    Vector res(N), f0(N);
    const Vector& next = sol.Y[k + 1 - tree.start];
    parallel_for(N, [&](long i) {
      Vector child(B);
      for (int j = 0; j < B; ++j) child(j) = next(tree.child(k, i, j));
      const Vector x = tree.states_at(k).col(i);
      const Vector th = tree_theta(spec, tree, k, i);
      const Vector ga = tree_gamma(spec, tree, k, i);
      const Vector hist = tree.history_at(k).col(i);
      const StepResult r = backward_step(f, tree.grid.time(k), x, th, ga, hist, child, tree.step, dt);
      cur(i) = r.y;
      z.col(i) = r.z;
      res(i) = r.residual;
      f0(i) = std::abs(f(tree.grid.time(k), x, 0.0, zero_z, th, ga, hist));
    });
    sol.Y[k - tree.start] = std::move(cur);
    sol.Z[k - tree.start] = std::move(z);
    sol.max_residual = std::max(sol.max_residual, N ? res.maxCoeff() : 0.0);
    if (N) f00 = std::max(f00, f0.maxCoeff());
  }

  const double T = tree.grid.horizon() - tree.grid.time(tree.start);
  sol.apriori_bound =
      (terminal.cwiseAbs().maxCoeff() + f00 * T) * std::exp(2.0 * spec.L * T);
  double ymax = 0.0;
  for (const auto& y : sol.Y) ymax = std::max(ymax, y.cwiseAbs().maxCoeff());
  sol.apriori_ok = ymax <= sol.apriori_bound * (1.0 + 1e-12) + 1e-12;
  return sol;
}

namespace {

// Exponents of the total-degree monomials in `vars` variables up to `degree`.
std::vector<std::vector<int>> monomials(int vars, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(vars, 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == vars) {
      out.push_back(cur);
      return;
    }
    for (int e = 0; e <= left; ++e) {
      cur[pos] = e;
      self(self, pos + 1, left - e);
    }
    cur[pos] = 0;
  };
  rec(rec, 0, degree);
  return out;
}

Matrix design_matrix(const Matrix& X, const Matrix& hist, int degree) {
  const long n = X.rows();
  const int d = static_cast<int>(X.cols());
  const auto mono = monomials(d, degree);
  Matrix A(n, static_cast<long>(mono.size()) + hist.cols());
  for (std::size_t c = 0; c < mono.size(); ++c) {
    for (long p = 0; p < n; ++p) {
      double v = 1.0;
      for (int i = 0; i < d; ++i)
        for (int e = 0; e < mono[c][i]; ++e) v *= X(p, i);
      A(p, static_cast<long>(c)) = v;
    }
  }
  if (hist.cols()) A.rightCols(hist.cols()) = hist;
  return A;
}

bool is_constant(const Matrix& M) {
  if (M.rows() == 0 || M.cols() == 0) return true;
  for (Eigen::Index c = 0; c < M.cols(); ++c)
    if ((M.col(c).array() != M(0, c)).any()) return false;
  return true;
}

// Least squares fit of targets (n x q) on A; returns fitted values.
Matrix regress(const Matrix& A, const Matrix& targets, bool& ridge_used) {
  Matrix G = A.transpose() * A;
  Matrix rhs = A.transpose() * targets;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(G, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  if (!(top > 0.0) || bottom <= 1e-12 * top) {
    ridge_used = true;
    G.diagonal().array() += 1e-8 * G.trace();
  }
  return A * G.ldlt().solve(rhs);
}

struct LsmcPass {
  std::vector<Vector> Y;
  std::vector<Matrix> Z;
  std::vector<double> residuals;
  bool ridge = false;
};

LsmcPass lsmc_pass(const ProblemSpec& spec, const PathEnsemble& ens, const StateTrajectory& traj,
                   const Vector& terminal, int degree, int end, const DriverFn& f) {
  const int r = traj.start;
  const double dt = ens.grid.dt();
  const bool with_hist = spec.randomness == Randomness::discrete_random;
  LsmcPass pass;
  pass.Y.resize(end - r + 1);
  pass.Z.resize(end - r);
  pass.residuals.assign(end - r + 1, 0.0);
  pass.Y[end - r] = terminal;
  for (int k = end - 1; k >= r; --k) {
    const Matrix& X = traj.at(k);
    const Matrix hist = with_hist ? traj.hist[k - r] : Matrix(X.rows(), 0);
    const bool degenerate = is_constant(X) && is_constant(hist);
    const Matrix A = degenerate ? Matrix::Ones(X.rows(), 1)
                                : design_matrix(X, hist, degree);
    const Vector& next = pass.Y[k + 1 - r];
    Matrix targets(X.rows(), 1 + spec.m);
    targets.col(0) = next;
    for (int c = 0; c < spec.m; ++c)
      targets.col(1 + c) = next.cwiseProduct(ens.dW[k].col(c)) / dt;
    const Matrix fitted = regress(A, targets, pass.ridge);
    pass.residuals[k - r] = std::sqrt((targets.col(0) - fitted.col(0)).squaredNorm() / X.rows());

    Vector cur(X.rows());
    Matrix z = fitted.rightCols(spec.m);
    const double t = ens.grid.time(k);
    for (long p = 0; p < X.rows(); ++p) {
      const Vector x = X.row(p).transpose();
      const Vector th = spec.theta_grid.point(traj.ctrl[k - r](p, 0));
      const Vector ga = spec.gamma_grid.point(traj.ctrl[k - r](p, 1));
      const Vector h = traj.hist[k - r].row(p).transpose();
      const Vector zp = z.row(p).transpose();
      double y = fitted(p, 0);
      for (int it = 0; it < kFixedPointIterations; ++it) {
        const double y_new = fitted(p, 0) + f(t, x, y, zp, th, ga, h) * dt;
        const double change = std::abs(y_new - y);
        y = y_new;
        if (change <= kFixedPointTolerance * std::max(1.0, std::abs(y))) break;
      }
      if (!std::isfinite(y)) throw NumericalError("non-finite driver output in regression solve");
      cur(p) = y;
    }
    pass.Y[k - r] = std::move(cur);
    pass.Z[k - r] = std::move(z);
  }
  return pass;
}

StateTrajectory select_rows(const StateTrajectory& traj, const std::vector<int>& rows) {
  StateTrajectory out;
  out.grid = traj.grid;
  out.start = traj.start;
  for (const auto& X : traj.X) out.X.push_back(X(rows, Eigen::all));
  for (const auto& H : traj.hist) out.hist.push_back(H(rows, Eigen::all));
  for (const auto& C : traj.ctrl) out.ctrl.push_back(C(rows, Eigen::all));
  return out;
}

}  // namespace

BsdeSolution solve_lsmc(const ProblemSpec& spec, const PathEnsemble& ens,
                        const StateTrajectory& traj, const Vector& terminal,
                        const LsmcOptions& options) {
  check_step_size(spec, ens.grid);
  const int end = options.end_slice < 0 ? ens.grid.n_steps() : options.end_slice;
  require(end >= traj.start && end <= ens.grid.n_steps(), "regression end slice out of range");
  require(terminal.size() == ens.n_paths, "terminal values must be one per path");
  const bool with_hist = spec.randomness == Randomness::discrete_random;
  const long basis =
      static_cast<long>(monomials(spec.d, options.degree).size()) + (with_hist ? spec.history_size() : 0);
  require(ens.n_paths >= 10 * basis, "regression needs n_paths >= 10 x basis size");
  const DriverFn& f = options.driver ? *options.driver : spec.f;

  LsmcPass pass = lsmc_pass(spec, ens, traj, terminal, options.degree, end, f);
  BsdeSolution sol;
  sol.scheme = BsdeSolution::Scheme::lsmc;
  sol.start = traj.start;
  sol.degree = options.degree;
  sol.regression_residuals = pass.residuals;
  sol.ridge_used = pass.ridge;
  sol.y0 = pass.Y.front().mean();

  if (options.bootstrap > 1) {
    Xoshiro256 rng(derive_seed(options.seed, 0xb00757ULL));
    std::vector<double> draws;
    draws.reserve(options.bootstrap);
    std::vector<int> rows(ens.n_paths);
    for (int b = 0; b < options.bootstrap; ++b) {
      for (auto& r : rows) r = static_cast<int>(rng() % static_cast<std::uint64_t>(ens.n_paths));
      const PathEnsemble sub_ens = ens.select(rows);
      const StateTrajectory sub_traj = select_rows(traj, rows);
      const Vector sub_terminal = terminal(rows);
      bool ridge = false;
      LsmcPass bp = lsmc_pass(spec, sub_ens, sub_traj, sub_terminal, options.degree, end, f);
      ridge |= bp.ridge;
      draws.push_back(bp.Y.front().mean());
    }
    double mean = 0.0;
    for (double v : draws) mean += v;
    mean /= draws.size();
    double var = 0.0;
    for (double v : draws) var += (v - mean) * (v - mean);
    sol.y0_se = std::sqrt(var / (draws.size() - 1));
  }
  sol.Y = std::move(pass.Y);
  sol.Z = std::move(pass.Z);
  return sol;
}

double payoff_J(const ProblemSpec& spec, int k, const Vector& x, const ControlProcess& controls,
                const PayoffOptions& options) {
  const TimeGrid grid(0.0, spec.horizon, options.n_steps);
  require(k >= 0 && k <= options.n_steps, "payoff slice outside the grid");
  if (options.solver == Solver::lattice_exact) {
    const NoiseLattice lat = build_lattice(grid, spec.m, options.branching);
    const Tree tree = lattice_forward(spec, lat, TreeRoot{k, x, {}, {}}, controls);
    const int n = grid.n_steps();
    Vector terminal(tree.nodes(n));
    for (long i = 0; i < terminal.size(); ++i)
      terminal(i) = spec.Phi(tree.states_at(n).col(i), tree.history_at(n).col(i));
    const BsdeSolution sol = solve_lattice(spec, tree, terminal);
    const double J = sol.at(k)(0);
    if (spec.bounded_terminal && std::abs(J) > spec.L * (spec.horizon + 1.0) + 1e-12)
      throw NumericalError("payoff exceeds the bound L(T+1)");
    return J;
  }
  const PathEnsemble ens = sample_paths(grid, spec.m, options.n_paths, options.seed);
  const StateTrajectory traj = euler_forward(spec, ens, {k, x.transpose()}, controls);
  const int n = grid.n_steps();
  Vector terminal(ens.n_paths);
  for (int p = 0; p < ens.n_paths; ++p)
    terminal(p) = spec.Phi(traj.at(n).row(p).transpose(), traj.hist.back().row(p).transpose());
  LsmcOptions opt;
  opt.bootstrap = 0;
  return solve_lsmc(spec, ens, traj, terminal, opt).y0;
}

double monotonicity_index(double lipschitz, const StepOutcomes& step) {
  return lipschitz * step.max_norm();
}

ComparisonResult compare_bsde(const ProblemSpec& spec, const Tree& tree, const Vector& terminal1,
                              const DriverFn& driver1, const Vector& terminal2,
                              const DriverFn& driver2) {
  check_step_size(spec, tree.grid);
  require(monotonicity_index(spec.L, tree.step) <= 1.0,
          "comparison needs L * max|dW| <= 1 for a monotone one-step map");
  const BsdeSolution a = solve_lattice(spec, tree, terminal1, &driver1);
  const BsdeSolution b = solve_lattice(spec, tree, terminal2, &driver2);
  ComparisonResult out;
  for (std::size_t s = 0; s < a.Y.size(); ++s) {
    const Vector diff = a.Y[s] - b.Y[s];
    out.violations += (diff.array() > 1e-10).count();
    out.max_excess = std::max(out.max_excess, diff.maxCoeff());
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "slope fit needs two or more points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

FreezingGap freezing_gap(const ProblemSpec& spec, const TestField& field, const Vector& xi,
                         const std::vector<double>& deltas, ControlChoice controls,
                         int substeps) {
  require(spec.randomness == Randomness::markovian, "freezing gap needs a Markovian problem");
  FreezingGap out;
  const DriverFn moving = f_driver_fn(field, spec);
  const DriverFn frozen = [moving, xi](double s, const Vector&, double y, const Vector& z,
                                       const Vector& th, const Vector& ga, const Vector& h) {
    return moving(s, xi, y, z, th, ga, h);
  };
  const ControlProcess fixed = ControlProcess::constant(controls.theta, controls.gamma);
  for (double delta : deltas) {
    require(delta > 0.0, "freezing gap needs delta > 0");
    ProblemSpec local = spec;
    local.horizon = delta;
    const TimeGrid grid(0.0, delta, substeps);
    const NoiseLattice lat = build_lattice(grid, spec.m, 2);
    const Tree tree = lattice_forward(local, lat, TreeRoot{0, xi, {}, {}}, fixed);
    const Vector zero = Vector::Zero(tree.nodes(substeps));
    const double y1 = solve_lattice(local, tree, zero, &moving).at(0)(0);
    const double y2 = solve_lattice(local, tree, zero, &frozen).at(0)(0);
    out.deltas.push_back(delta);
    out.gaps.push_back(std::abs(y1 - y2));
  }
  if (out.deltas.size() >= 2) out.slope = loglog_slope(out.deltas, out.gaps);
  return out;
}

}  // namespace sdg
