#include "sdg/sublinear.hpp"

#include "sdg/random.hpp"
#include "sdg/sde.hpp"

#include <sstream>

namespace sdg {

DriverFn sublinear_driver(double K, Direction direction) {
  const double sign = direction == Direction::upper ? 1.0 : -1.0;
  return [K, sign](double, const Vector&, double y, const Vector& z, const Vector&, const Vector&,
                   const Vector&) { return sign * K * (std::abs(y) + z.norm()); };
}

namespace {

void check_query(const SublinearQuery& q, int start_slice, int end_slice) {
  require(q.K >= 0.0, "K must be nonnegative");
  require(q.start <= q.end, "start slice after end slice");
  require(q.start >= start_slice && q.end <= end_slice, "query slices outside the tree");
}

}  // namespace

Vector sublinear_eval(const SublinearQuery& query, const Tree& tree) {
  check_query(query, tree.start, tree.end());
  require(query.xi.size() == tree.nodes(query.end), "xi does not match the end slice");
  require(query.K * tree.grid.dt() < 1.0, "time step too large: dt * K >= 1");
  const DriverFn f = sublinear_driver(query.K, query.direction);
  const int B = tree.branching();
  const double dt = tree.grid.dt();
  const Vector none;
  Vector next = query.xi;
  for (int k = query.end - 1; k >= query.start; --k) {
    Vector cur(tree.nodes(k));
    for (long i = 0; i < cur.size(); ++i) {
      Vector child(B);
      for (int j = 0; j < B; ++j) child(j) = next(tree.child(k, i, j));
      cur(i) = backward_step(f, tree.grid.time(k), none, none, none, none, child, tree.step, dt).y;
    }
    next = std::move(cur);
  }
  return next;
}

Vector sublinear_eval(const SublinearQuery& query, const PathEnsemble& ens,
                      const LsmcOptions& options) {
  check_query(query, 0, ens.grid.n_steps());
  require(query.xi.size() == ens.n_paths, "xi must be one value per path");
  ProblemSpec brownian;
  brownian.name = "brownian";
  brownian.d = ens.m;
  brownian.m = ens.m;
  brownian.horizon = ens.grid.horizon();
  brownian.L = std::max(query.K, 1e-12);
  brownian.b = [m = ens.m](double, const Vector&, const Vector&, const Vector&, const Vector&) {
    return Vector::Zero(m).eval();
  };
  brownian.sigma = [m = ens.m](double, const Vector&, const Vector&, const Vector&, const Vector&) {
    return Matrix::Identity(m, m).eval();
  };
  brownian.f = sublinear_driver(query.K, query.direction);
  brownian.Phi = [](const Vector&, const Vector&) { return 0.0; };
  brownian.theta_grid = ControlGrid::uniform(0.0, 0.0, 1, ControlGrid::Label::theta);
  brownian.gamma_grid = ControlGrid::uniform(0.0, 0.0, 1, ControlGrid::Label::gamma);
  const StateTrajectory traj = euler_forward(brownian, ens, {query.start, Matrix::Zero(1, ens.m)},
                                             ControlProcess::constant(0, 0));
  LsmcOptions opt = options;
  opt.end_slice = query.end;
  return solve_lsmc(brownian, ens, traj, query.xi, opt).Y.front();
}

double Tilt::sup_norm() const {
  double s = 0.0;
  for (const auto& v : h0)
    if (v.size()) s = std::max(s, v.cwiseAbs().maxCoeff());
  for (const auto& v : h)
    if (v.cols()) s = std::max(s, v.colwise().norm().maxCoeff());
  return s;
}

TiltResult tilt_bound(const SublinearQuery& query, const Tree& tree, const Tilt& tilt) {
  check_query(query, tree.start, tree.end());
  require(query.xi.size() == tree.nodes(query.end), "xi does not match the end slice");
  require(static_cast<int>(tilt.h0.size()) == query.end - query.start &&
              tilt.h.size() == tilt.h0.size(),
          "tilt must cover every slice of the query");
  require(tilt.sup_norm() <= query.K * (1.0 + 1e-12), "tilt exceeds the bound K");
  const int B = tree.branching();
  const double dt = tree.grid.dt();
  Vector next = query.xi;
  for (int k = query.end - 1; k >= query.start; --k) {
    const Vector& h0 = tilt.h0[k - query.start];
    const Matrix& h = tilt.h[k - query.start];
    Vector cur(tree.nodes(k));
    for (long i = 0; i < cur.size(); ++i) {
      double acc = 0.0;
      for (int j = 0; j < B; ++j) {
        const double expo = h.col(i).dot(tree.step.increments.col(j)) -
                            0.5 * (h.col(i).squaredNorm() + 2.0 * h0(i)) * dt;
        acc += tree.step.prob(j) * std::exp(expo) * next(tree.child(k, i, j));
      }
      cur(i) = acc;
    }
    next = std::move(cur);
  }
  return {next, 5.0 * dt * query.K * query.xi.cwiseAbs().maxCoeff()};
}

Tilt random_tilt(const Tree& tree, int start, int end, double K, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  Tilt t;
  const int m = tree.step.dim();
  for (int k = start; k < end; ++k) {
    const long N = tree.nodes(k);
    Vector h0(N);
    Matrix h(m, N);
    for (long i = 0; i < N; ++i) {
      h0(i) = K * (2.0 * rng.uniform() - 1.0);
      Vector dir(m);
      for (int c = 0; c < m; ++c) dir(c) = rng.normal();
      const double len = dir.norm();
      h.col(i) = len > 0 ? (dir / len * K * rng.uniform()).eval() : Vector::Zero(m).eval();
    }
    t.h0.push_back(h0);
    t.h.push_back(h);
  }
  return t;
}

DominationReport domination_suite(const ProblemSpec& spec, const Tree& tree, int start,
                                  const Vector& xi1, const Vector& xi2, double K) {
  const int end = tree.end();
  require(monotonicity_index(std::max(spec.L, K), tree.step) <= 1.0,
          "domination needs max(L, K) * max|dW| <= 1");
  DominationReport rep;
  const Vector g1 = semigroup_apply(spec, tree, start, end, xi1);
  const Vector g2 = semigroup_apply(spec, tree, start, end, xi2);
  const Vector diff = xi1 - xi2;
  const Vector lo = sublinear_eval({spec.L, start, end, diff, Direction::lower}, tree);
  const Vector hi = sublinear_eval({spec.L, start, end, diff, Direction::upper}, tree);
  const Vector gap = g1 - g2;
  rep.chain_margin = std::min((gap - lo).minCoeff(), (hi - gap).minCoeff());
  rep.chain_violations = ((gap - lo).array() < -1e-9).count() + ((hi - gap).array() < -1e-9).count();
  rep.chain = rep.chain_violations == 0;
  if (!rep.chain) {
    std::ostringstream os;
    Eigen::Index where = 0;
    (gap - lo).cwiseMin(hi - gap).minCoeff(&where);
    os << "node " << where << ": lower " << lo(where) << ", G-gap " << gap(where) << ", upper "
       << hi(where);
    rep.witness = os.str();
  }

  const double delta = tree.grid.time(end) - tree.grid.time(start);
  const double growth = std::exp((K + 2.0) * K * delta);
  const Vector a = diff.cwiseAbs();
  const Vector e_sqrt = sublinear_eval({0.0, start, end, a.cwiseSqrt(), Direction::upper}, tree);
  const Vector e_sq = sublinear_eval({0.0, start, end, a.cwiseAbs2(), Direction::upper}, tree);
  const Vector lo_abs = sublinear_eval({K, start, end, a, Direction::lower}, tree);
  const Vector hi_abs = sublinear_eval({K, start, end, a, Direction::upper}, tree);
  rep.tolerance = 5.0 * tree.grid.dt() * std::max(K, 1.0) * std::max(1.0, a.maxCoeff());
  rep.inf_margin = ((lo_abs * growth).cwiseMax(0.0).cwiseSqrt() - e_sqrt).minCoeff();
  rep.sup_margin = ((e_sq * growth).cwiseSqrt() - hi_abs).minCoeff();
  rep.inf_bound = rep.inf_margin >= -rep.tolerance;
  rep.sup_bound = rep.sup_margin >= -rep.tolerance;
  return rep;
}

}  // namespace sdg
