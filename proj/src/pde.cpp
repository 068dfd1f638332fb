#include "sdg/pde.hpp"

#include "sdg/hamiltonian.hpp"
#include "sdg/parallel.hpp"

#include <cmath>
#include <sstream>

namespace sdg {

long PdeGrid::node_count() const {
  long n = 1;
  for (int i = 0; i < d; ++i) n *= n_x + 1;
  return n;
}

Vector PdeGrid::node(long flat) const {
  Vector x(d);
  for (int i = 0; i < d; ++i) {
    x(i) = lo + (flat % (n_x + 1)) * dx();
    flat /= n_x + 1;
  }
  return x;
}

bool PdeGrid::on_boundary(long flat) const {
  for (int i = 0; i < d; ++i) {
    const long c = flat % (n_x + 1);
    if (c == 0 || c == n_x) return true;
    flat /= n_x + 1;
  }
  return false;
}

namespace {

void check_oracle_problem(const ProblemSpec& spec, const PdeGrid& grid) {
  spec.check();
  require(spec.randomness == Randomness::markovian, "the PDE oracle needs a Markovian problem");
  require(spec.d == grid.d, "grid dimension does not match the problem");
  require(grid.d == 1 || grid.d == 2, "the PDE oracle supports d = 1 or 2");
  require(grid.n_x >= 4 && grid.hi > grid.lo, "PDE grid needs hi > lo and n_x >= 4");
}

// Coefficient scan over grid nodes, control pairs and a few times.
struct CoefficientScan {
  Vector a_max;   // max diagonal of sigma sigma'
  Vector b_max;   // max |b_i|
  Vector s_max;   // max row norm of sigma
  double off_diagonal = 0.0;
  double min_eigen = INFINITY;
};

CoefficientScan scan(const ProblemSpec& spec, const PdeGrid& grid) {
  CoefficientScan sc{Vector::Zero(spec.d), Vector::Zero(spec.d), Vector::Zero(spec.d)};
  const Vector hist;
  for (double t : {0.0, 0.5 * spec.horizon, spec.horizon}) {
    for (long n = 0; n < grid.node_count(); ++n) {
      const Vector x = grid.node(n);
      for (int a = 0; a < spec.theta_grid.size(); ++a) {
        for (int c = 0; c < spec.gamma_grid.size(); ++c) {
          const Vector th = spec.theta_grid.point(a), ga = spec.gamma_grid.point(c);
          const Matrix s = spec.sigma(t, x, th, ga, hist);
          const Matrix cov = s * s.transpose();
          const Vector b = spec.b(t, x, th, ga, hist);
          sc.a_max = sc.a_max.cwiseMax(cov.diagonal());
          sc.b_max = sc.b_max.cwiseMax(b.cwiseAbs());
          sc.s_max = sc.s_max.cwiseMax(s.rowwise().norm());
          for (int i = 0; i < spec.d; ++i)
            for (int j = 0; j < spec.d; ++j)
              if (i != j) sc.off_diagonal = std::max(sc.off_diagonal, std::abs(cov(i, j)));
          sc.min_eigen = std::min(sc.min_eigen, cov.diagonal().minCoeff());
        }
      }
      if (spec.state_free_sigma && n > 0 && t > 0.0) break;
    }
  }
  return sc;
}

// One explicit step of the scheme. Returns the new slice and the largest |f|.
class SchemeStep {
 public:
  SchemeStep(const ProblemSpec& spec, const PdeGrid& grid, Side side, double dt)
      : spec_(spec), grid_(grid), side_(side), dt_(dt) {
    stride_.resize(grid.d);
    long s = 1;
    for (int i = 0; i < grid.d; ++i) {
      stride_[i] = s;
      s *= grid.n_x + 1;
    }
  }

  Vector apply(const Vector& next, double t, double& f_max) const {
    const long N = grid_.node_count();
    const double dx = grid_.dx();
    const int d = grid_.d;
    Vector out(N);
    Vector fmax = Vector::Zero(N);
    parallel_for(N, [&](long n) {
      const Vector x = grid_.node(n);
      if (grid_.on_boundary(n)) {
        out(n) = grid_.boundary == Boundary::clamped ? spec_.Phi(x, Vector()) : next(n);
        return;
      }
      HamiltonianPoint pt;
      pt.t = t;
      pt.x = x;
      pt.A = Matrix::Zero(d, d);
      pt.B = Matrix::Zero(spec_.m, d);
      pt.y = next(n);
      pt.z = Vector::Zero(spec_.m);
      Vector forward(d), backward(d);
      for (int i = 0; i < d; ++i) {
        const double up = next(n + stride_[i]);
        const double down = next(n - stride_[i]);
        pt.A(i, i) = (up - 2.0 * next(n) + down) / (dx * dx);
        forward(i) = (up - next(n)) / dx;
        backward(i) = (next(n) - down) / dx;
      }
      Matrix table(spec_.theta_grid.size(), spec_.gamma_grid.size());
      double local_f = 0.0;
      for (int a = 0; a < table.rows(); ++a) {
        const Vector th = spec_.theta_grid.point(a);
        for (int c = 0; c < table.cols(); ++c) {
          const Vector ga = spec_.gamma_grid.point(c);
          const Vector b = spec_.b(t, x, th, ga, pt.hist);
          pt.p = (b.array() >= 0.0).select(forward, backward);
          table(a, c) = ell(pt, th, ga, spec_);
          const Matrix s = spec_.sigma(t, x, th, ga, pt.hist);
          local_f = std::max(local_f, std::abs(spec_.f(t, x, pt.y, s.transpose() * pt.p, th, ga, pt.hist)));
        }
      }
      const double h = side_ == Side::lower ? sup_inf(table).value : inf_sup(table).value;
      out(n) = next(n) + dt_ * h;
      fmax(n) = local_f;
    });
    if (grid_.boundary == Boundary::one_sided) extrapolate(out);
    f_max = fmax.maxCoeff();
    return out;
  }

 private:
  // Linear extrapolation of boundary nodes along each axis in turn.
  void extrapolate(Vector& u) const {
    const long N = grid_.node_count();
    for (int i = 0; i < grid_.d; ++i) {
      for (long n = 0; n < N; ++n) {
        const long c = (n / stride_[i]) % (grid_.n_x + 1);
        if (c == 0) u(n) = 2.0 * u(n + stride_[i]) - u(n + 2 * stride_[i]);
        if (c == grid_.n_x) u(n) = 2.0 * u(n - stride_[i]) - u(n - 2 * stride_[i]);
      }
    }
  }

  const ProblemSpec& spec_;
  const PdeGrid& grid_;
  Side side_;
  double dt_;
  std::vector<long> stride_;
};

Vector terminal_slice(const ProblemSpec& spec, const PdeGrid& grid) {
  Vector u(grid.node_count());
  for (long n = 0; n < u.size(); ++n) u(n) = spec.Phi(grid.node(n), Vector());
  return u;
}

}  // namespace

double stable_time_step(const ProblemSpec& spec, const PdeGrid& grid) {
  check_oracle_problem(spec, grid);
  const CoefficientScan sc = scan(spec, grid);
  const double dx = grid.dx();
  return 1.0 / (sc.a_max.sum() / (dx * dx) + (sc.b_max.sum() + spec.L * sc.s_max.sum()) / dx +
                spec.L);
}

PdeSolution solve_hjbi_fd(const ProblemSpec& spec, const PdeGrid& grid, Side side) {
  check_oracle_problem(spec, grid);
  const CoefficientScan sc = scan(spec, grid);
  if (grid.d == 2 && sc.off_diagonal > 0.0)
    throw InvalidArgument("the PDE oracle needs a diagonal diffusion matrix");
  if (!spec.state_free_sigma && sc.min_eigen < 1e-8)
    throw InvalidArgument("degenerate state-dependent diffusion is not supported by the PDE oracle");
  const double dt_max = stable_time_step(spec, grid);
  int n_t = grid.n_t;
  if (n_t == 0) n_t = static_cast<int>(std::ceil(spec.horizon / dt_max));
  if (spec.horizon / n_t > dt_max * (1.0 + 1e-12))
    throw InvalidArgument("explicit step violates the stability bound; use n_t >= " +
                          std::to_string(static_cast<int>(std::ceil(spec.horizon / dt_max))));

  PdeSolution sol;
  sol.grid = grid;
  sol.grid.n_t = n_t;
  sol.side = side;
  sol.horizon = spec.horizon;
  sol.dt = spec.horizon / n_t;
  sol.u.resize(n_t + 1);
  sol.u[n_t] = terminal_slice(spec, grid);
  const SchemeStep step(spec, grid, side, sol.dt);
  for (int k = n_t - 1; k >= 0; --k) {
    double f_max = 0.0;
    sol.u[k] = step.apply(sol.u[k + 1], sol.time(k + 1), f_max);
    sol.max_driver = std::max(sol.max_driver, f_max);
    const double slack = sol.dt * f_max + 1e-12;
    Vector interior_new(sol.u[k].size()), interior_old(sol.u[k].size());
    double lo = INFINITY, hi = -INFINITY, new_lo = INFINITY, new_hi = -INFINITY;
    for (long n = 0; n < sol.u[k].size(); ++n) {
      lo = std::min(lo, sol.u[k + 1](n));
      hi = std::max(hi, sol.u[k + 1](n));
      if (grid.boundary == Boundary::one_sided && grid.on_boundary(n)) continue;
      new_lo = std::min(new_lo, sol.u[k](n));
      new_hi = std::max(new_hi, sol.u[k](n));
    }
    if (!std::isfinite(new_lo) || new_lo < lo - slack || new_hi > hi + slack)
      throw NumericalError("discrete maximum principle violated at time step " + std::to_string(k));
  }
  return sol;
}

double PdeSolution::value(double t, const Vector& x) const {
  require(x.size() == grid.d, "probe dimension does not match the grid");
  const double tau = std::clamp(t / dt, 0.0, static_cast<double>(n_t()));
  const int k0 = std::min(static_cast<int>(std::floor(tau)), n_t() - 1);
  const double wt = tau - k0;
  const double dx = grid.dx();
  std::vector<long> base(grid.d);
  std::vector<double> frac(grid.d);
  for (int i = 0; i < grid.d; ++i) {
    const double s = std::clamp((x(i) - grid.lo) / dx, 0.0, static_cast<double>(grid.n_x));
    base[i] = std::min(static_cast<long>(std::floor(s)), static_cast<long>(grid.n_x - 1));
    frac[i] = s - base[i];
  }
  auto spatial = [&](const Vector& slice) {
    double acc = 0.0;
    for (int corner = 0; corner < (1 << grid.d); ++corner) {
      long flat = 0, stride = 1;
      double w = 1.0;
      for (int i = 0; i < grid.d; ++i) {
        const int bit = (corner >> i) & 1;
        flat += (base[i] + bit) * stride;
        stride *= grid.n_x + 1;
        w *= bit ? frac[i] : 1.0 - frac[i];
      }
      acc += w * slice(flat);
    }
    return acc;
  };
  return (1.0 - wt) * spatial(u[k0]) + wt * spatial(u[k0 + 1]);
}

double compare_game_vs_pde(const ValueField& field, const PdeSolution& pde, double radius) {
  const GameTree& tree = *field.tree;
  const double margin = 2.0 * pde.grid.dx();
  double worst = 0.0;
  for (int k = tree.start; k <= tree.end(); ++k) {
    const Matrix& xs = tree.state[k - tree.start];
    for (long i = 0; i < xs.cols(); ++i) {
      const Vector x = xs.col(i);
      if (x.cwiseAbs().maxCoeff() > radius) continue;
      if ((x.array() < pde.grid.lo + margin).any() || (x.array() > pde.grid.hi - margin).any())
        continue;
      worst = std::max(worst, std::abs(field.at(k)(i) - pde.value(tree.grid.time(k), x)));
    }
  }
  return worst;
}

SubSuperReport sub_super_gap(const ProblemSpec& spec, const PdeSolution& sub,
                             const PdeSolution& super, double tolerance) {
  require(sub.grid.n_x == super.grid.n_x && sub.grid.d == super.grid.d &&
              sub.grid.lo == super.grid.lo && sub.grid.hi == super.grid.hi &&
              sub.n_t() == super.n_t() && sub.side == super.side,
          "sub and super fields must share the grid");
  SubSuperReport rep;
  rep.sub_residual = INFINITY;
  rep.super_residual = -INFINITY;
  rep.gap = INFINITY;
  const SchemeStep step(spec, sub.grid, sub.side, sub.dt);
  long sub_where = -1, super_where = -1;
  int sub_k = -1, super_k = -1;
  for (int k = sub.n_t(); k >= 0; --k) {
    rep.gap = std::min(rep.gap, (super.u[k] - sub.u[k]).minCoeff());
    if (k == sub.n_t()) continue;
    double unused = 0.0;
    const Vector rs = step.apply(sub.u[k + 1], sub.time(k + 1), unused) - sub.u[k];
    const Vector rp = step.apply(super.u[k + 1], super.time(k + 1), unused) - super.u[k];
    Eigen::Index at = 0;
    if (const double v = rs.minCoeff(&at); v < rep.sub_residual) {
      rep.sub_residual = v;
      sub_where = at;
      sub_k = k;
    }
    if (const double v = rp.maxCoeff(&at); v > rep.super_residual) {
      rep.super_residual = v;
      super_where = at;
      super_k = k;
    }
  }
  // Subsolution: u_k <= S(u_{k+1}); supersolution: u_k >= S(u_{k+1}).
  rep.sub_ok = rep.sub_residual >= -tolerance;
  rep.super_ok = rep.super_residual <= tolerance;
  rep.contract = rep.gap >= -2.0 * tolerance * sub.horizon / sub.dt;
  std::ostringstream os;
  if (!rep.sub_ok) os << "subsolution residual " << rep.sub_residual << " at step " << sub_k << ", node " << sub_where << "; ";
  if (!rep.super_ok) os << "supersolution residual " << rep.super_residual << " at step " << super_k << ", node " << super_where;
  rep.witness = os.str();
  return rep;
}

}  // namespace sdg
