#include "sdg/sde.hpp"

#include "sdg/parallel.hpp"

#include <cmath>
#include <sstream>

namespace sdg {

ControlProcess ControlProcess::constant(int theta_index, int gamma_index) {
  ControlProcess c;
  c.kind = Kind::feedback;
  c.feedback = [theta_index, gamma_index](int, const Vector&, const Vector&) {
    return ControlChoice{theta_index, gamma_index};
  };
  return c;
}

ControlProcess ControlProcess::open_loop(Eigen::MatrixXi theta, Eigen::MatrixXi gamma) {
  require(theta.rows() == gamma.rows() && theta.cols() == gamma.cols(),
          "open-loop control arrays must have equal shape");
  ControlProcess c;
  c.kind = Kind::open_loop;
  c.theta = std::move(theta);
  c.gamma = std::move(gamma);
  return c;
}

ControlProcess ControlProcess::from_feedback(Feedback fn) {
  ControlProcess c;
  c.kind = Kind::feedback;
  c.feedback = std::move(fn);
  return c;
}

ControlChoice ControlProcess::at(long path, int k, const Vector& x, const Vector& hist) const {
  if (kind == Kind::open_loop) return {theta(path, k), gamma(path, k)};
  return feedback(k, x, hist);
}

void ControlProcess::check(const ProblemSpec& spec) const {
  if (kind == Kind::open_loop) {
    require(theta.size() == 0 || (theta.minCoeff() >= 0 && theta.maxCoeff() < spec.theta_grid.size()),
            "open-loop theta index outside the control grid");
    require(gamma.size() == 0 || (gamma.minCoeff() >= 0 && gamma.maxCoeff() < spec.gamma_grid.size()),
            "open-loop gamma index outside the control grid");
  } else {
    require(static_cast<bool>(feedback), "feedback control map is empty");
  }
}

namespace {

void check_choice(const ProblemSpec& spec, const ControlChoice& c) {
  if (c.theta < 0 || c.theta >= spec.theta_grid.size() || c.gamma < 0 ||
      c.gamma >= spec.gamma_grid.size())
    throw InvalidArgument("control choice outside the control grids");
}

}  // namespace

StateTrajectory euler_forward(const ProblemSpec& spec, const PathEnsemble& ens,
                              const InitialState& start, const ControlProcess& controls) {
  spec.check();
  controls.check(spec);
  const int n = ens.grid.n_steps();
  const int r = start.slice;
  require(r >= 0 && r < n, "start step must be < n_steps");
  require(start.states.cols() == spec.d, "initial state dimension does not match the problem");
  require(start.states.rows() == 1 || start.states.rows() == ens.n_paths,
          "initial states must be one row or one row per path");
  require(ens.m == spec.m, "ensemble Wiener dimension does not match the problem");
  if (controls.kind == ControlProcess::Kind::open_loop)
    require(controls.theta.rows() == ens.n_paths && controls.theta.cols() >= n,
            "open-loop controls must be n_paths x n_steps");

  const double dt = ens.grid.dt();
  StateTrajectory out;
  out.grid = ens.grid;
  out.start = r;
  out.X.assign(n - r + 1, Matrix(ens.n_paths, spec.d));
  out.hist.assign(n - r + 1, Matrix(ens.n_paths, spec.history_size()));
  out.ctrl.assign(n - r, Eigen::MatrixXi(ens.n_paths, 2));

  const long blocks = (ens.n_paths + kBlockSize - 1) / kBlockSize;
  parallel_for(blocks, [&](long blk) {
    const long lo = blk * kBlockSize;
    const long hi = std::min<long>(ens.n_paths, lo + kBlockSize);
    for (long p = lo; p < hi; ++p) {
      Vector x = start.states.row(start.states.rows() == 1 ? 0 : p).transpose();
      Vector hist = spec.initial_history(ens.W[r].row(p).transpose());
      out.X[0].row(p) = x.transpose();
      if (hist.size()) out.hist[0].row(p) = hist.transpose();
      for (int k = r; k < n; ++k) {
        const ControlChoice c = controls.at(p, k, x, hist);
        check_choice(spec, c);
        const Vector th = spec.theta_grid.point(c.theta);
        const Vector ga = spec.gamma_grid.point(c.gamma);
        const double t = ens.grid.time(k);
        const Vector drift = spec.b(t, x, th, ga, hist);
        const Matrix vol = spec.sigma(t, x, th, ga, hist);
        if (!drift.allFinite() || !vol.allFinite()) {
          std::ostringstream os;
          os << "non-finite coefficient on path " << p << " at step " << k;
          throw NumericalError(os.str());
        }
        x += drift * dt + vol * ens.dW[k].row(p).transpose();
        spec.advance_history(hist, ens.grid.time(k + 1), ens.W[k + 1].row(p).transpose());
        out.ctrl[k - r](p, 0) = c.theta;
        out.ctrl[k - r](p, 1) = c.gamma;
        out.X[k - r + 1].row(p) = x.transpose();
        if (hist.size()) out.hist[k - r + 1].row(p) = hist.transpose();
      }
    }
  });
  return out;
}

Tree lattice_forward(const ProblemSpec& spec, const NoiseLattice& lat, const TreeRoot& root,
                     const ControlProcess& controls, long node_budget) {
  spec.check();
  controls.check(spec);
  require(controls.kind == ControlProcess::Kind::feedback,
          "lattice trees need feedback controls");
  require(lat.dim() == spec.m, "lattice Wiener dimension does not match the problem");
  require(root.x.size() == spec.d, "root state dimension does not match the problem");
  const TimeGrid& grid = lat.time_grid();
  const int n = grid.n_steps();
  const int r = root.slice;
  require(r >= 0 && r <= n, "root slice outside the time grid");

  const StepOutcomes& step = lat.increments();
  const int B = step.size();
  long estimate = 0;
  long level = 1;
  for (int k = r; k <= n; ++k) {
    estimate += level;
    if (estimate > node_budget)
      throw BudgetExceeded("tree from slice " + std::to_string(r) + " with branching " +
                           std::to_string(B) + " exceeds the node budget of " +
                           std::to_string(node_budget));
    level *= B;
  }

  Tree tree;
  tree.grid = grid;
  tree.start = r;
  tree.step = step;
  const int S = n - r + 1;
  tree.state.resize(S);
  tree.noise.resize(S);
  tree.history.resize(S);
  tree.weight.resize(S);
  tree.parent.resize(S);
  tree.children.resize(S);
  tree.theta_index.resize(S);
  tree.gamma_index.resize(S);

  const Vector w0 = root.w.size() ? root.w : Vector::Zero(spec.m);
  const Vector h0 = root.hist.size() ? root.hist : spec.initial_history(w0);
  tree.state[0] = root.x;
  tree.noise[0] = w0;
  tree.history[0] = h0;
  tree.weight[0] = Vector::Ones(1);
  tree.parent[0] = IndexVector::Constant(1, -1);

  const double dt = grid.dt();
  for (int k = r; k < n; ++k) {
    const int s = k - r;
    const long N = tree.weight[s].size();
    const long M = N * B;
    tree.state[s + 1].resize(spec.d, M);
    tree.noise[s + 1].resize(spec.m, M);
    tree.history[s + 1].resize(spec.history_size(), M);
    tree.weight[s + 1].resize(M);
    tree.parent[s + 1].resize(M);
    tree.theta_index[s].resize(N);
    tree.gamma_index[s].resize(N);
    const double t = grid.time(k);
    const double t_next = grid.time(k + 1);
    for (long i = 0; i < N; ++i) {
      const Vector x = tree.state[s].col(i);
      const Vector hist = tree.history[s].col(i);
      const ControlChoice c = controls.feedback(k, x, hist);
      check_choice(spec, c);
      tree.theta_index[s](i) = c.theta;
      tree.gamma_index[s](i) = c.gamma;
      const Vector th = spec.theta_grid.point(c.theta);
      const Vector ga = spec.gamma_grid.point(c.gamma);
      const Vector drift = spec.b(t, x, th, ga, hist);
      const Matrix vol = spec.sigma(t, x, th, ga, hist);
      if (!drift.allFinite() || !vol.allFinite())
        throw NumericalError("non-finite coefficient at slice " + std::to_string(k) + ", node " +
                             std::to_string(i));
      const Vector base = x + drift * dt;
      for (int j = 0; j < B; ++j) {
        const long child = i * B + j;
        tree.state[s + 1].col(child) = base + vol * step.increments.col(j);
        const Vector w_next = tree.noise[s].col(i) + step.increments.col(j);
        tree.noise[s + 1].col(child) = w_next;
        Vector h_next = hist;
        spec.advance_history(h_next, t_next, w_next);
        tree.history[s + 1].col(child) = h_next;
        tree.weight[s + 1](child) = tree.weight[s](i) * step.prob(j);
        tree.parent[s + 1](child) = static_cast<int>(i);
      }
    }
  }
  return tree;
}

double check_flow_property(const ProblemSpec& spec, const NoiseLattice& lat, int r, int t,
                           const Vector& x, const ControlProcess& controls) {
  const int n = lat.time_grid().n_steps();
  require(0 <= r && r < t && t <= n, "flow property needs r < t <= T on the grid");
  const Tree full = lattice_forward(spec, lat, TreeRoot{r, x, {}, {}}, controls);
  const int B = full.branching();
  long span = 1;
  for (int k = t; k < n; ++k) span *= B;
  const Matrix& leaves = full.states_at(n);
  double worst = 0.0;
  for (long i = 0; i < full.nodes(t); ++i) {
    TreeRoot restart{t, full.states_at(t).col(i), full.noise_at(t).col(i),
                     full.history_at(t).col(i)};
    const Tree sub = lattice_forward(spec, lat, restart, controls);
    const Matrix& sub_leaves = sub.states_at(n);
    for (long j = 0; j < span; ++j)
      worst = std::max(worst, (leaves.col(i * span + j) - sub_leaves.col(j)).norm());
  }
  return worst;
}

MomentEstimates moment_estimates(const ProblemSpec& spec, const PathEnsemble& ens,
                                 const MomentQuery& q, const ControlProcess& controls) {
  require(q.p == 2 || q.p == 4, "moment order must be 2 or 4");
  const int n = ens.grid.n_steps();
  require(q.start <= q.t_slice && q.t_slice <= q.s_slice && q.s_slice <= n,
          "moment slices must satisfy start <= t <= s <= n");
  const Vector xi_hat = q.xi_hat.size() ? q.xi_hat : q.xi;
  const StateTrajectory a = euler_forward(spec, ens, {q.start, q.xi.transpose()}, controls);
  const StateTrajectory b = euler_forward(spec, ens, {q.start, xi_hat.transpose()}, controls);

  auto pw = [p = q.p](double v) { return p == 2 ? v * v : v * v * v * v; };
  MomentEstimates out;
  for (int path = 0; path < ens.n_paths; ++path) {
    double sup_x = 0.0, sup_diff = 0.0;
    for (int k = q.start; k <= n; ++k) {
      sup_x = std::max(sup_x, a.at(k).row(path).norm());
      sup_diff = std::max(sup_diff, (a.at(k).row(path) - b.at(k).row(path)).norm());
    }
    out.sup_moment += pw(sup_x);
    out.sensitivity += pw(sup_diff);
    out.increment_moment += pw((a.at(q.s_slice).row(path) - a.at(q.t_slice).row(path)).norm());
  }
  out.sup_moment /= ens.n_paths;
  out.sensitivity /= ens.n_paths;
  out.increment_moment /= ens.n_paths;
  return out;
}

}  // namespace sdg
