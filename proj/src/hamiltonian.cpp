#include "sdg/hamiltonian.hpp"

#include "sdg/random.hpp"

#include <cmath>

namespace sdg {

double ell(const HamiltonianPoint& pt, const Vector& theta, const Vector& gamma,
           const ProblemSpec& spec) {
  const Matrix sigma = spec.sigma(pt.t, pt.x, theta, gamma, pt.hist);
  const Vector drift = spec.b(pt.t, pt.x, theta, gamma, pt.hist);
  const double second = 0.5 * (sigma * sigma.transpose() * pt.A).trace() + (sigma * pt.B).trace();
  const Vector z = pt.z + sigma.transpose() * pt.p;
  return second + drift.dot(pt.p) + spec.f(pt.t, pt.x, pt.y, z, theta, gamma, pt.hist);
}

Matrix ell_table(const HamiltonianPoint& pt, const ProblemSpec& spec,
                 const ControlGrid& theta_grid, const ControlGrid& gamma_grid) {
  Matrix table(theta_grid.size(), gamma_grid.size());
  for (int i = 0; i < theta_grid.size(); ++i)
    for (int j = 0; j < gamma_grid.size(); ++j)
      table(i, j) = ell(pt, theta_grid.point(i), gamma_grid.point(j), spec);
  return table;
}

Saddle h_minus(const HamiltonianPoint& pt, const ProblemSpec& spec,
               const ControlGrid& theta_grid, const ControlGrid& gamma_grid) {
  return sup_inf(ell_table(pt, spec, theta_grid, gamma_grid));
}

Saddle h_plus(const HamiltonianPoint& pt, const ProblemSpec& spec,
              const ControlGrid& theta_grid, const ControlGrid& gamma_grid) {
  return inf_sup(ell_table(pt, spec, theta_grid, gamma_grid));
}

std::vector<HamiltonianPoint> sample_points(const ProblemSpec& spec, int count,
                                            std::uint64_t seed, double scale) {
  Xoshiro256 rng(seed);
  std::vector<HamiltonianPoint> out(count);
  for (auto& pt : out) {
    pt.t = spec.horizon * rng.uniform();
    pt.x.resize(spec.d);
    pt.p.resize(spec.d);
    pt.z.resize(spec.m);
    pt.A.resize(spec.d, spec.d);
    pt.B.resize(spec.m, spec.d);
    pt.hist.resize(spec.history_size());
    for (auto& v : pt.x) v = scale * rng.normal();
    for (auto& v : pt.p) v = scale * rng.normal();
    for (auto& v : pt.z) v = scale * rng.normal();
    for (Eigen::Index i = 0; i < pt.A.size(); ++i) pt.A.data()[i] = scale * rng.normal();
    pt.A = (0.5 * (pt.A + pt.A.transpose())).eval();
    for (Eigen::Index i = 0; i < pt.B.size(); ++i) pt.B.data()[i] = scale * rng.normal();
    for (auto& v : pt.hist) v = rng.normal();
    pt.y = scale * rng.normal();
  }
  return out;
}

IsaacsReport isaacs_check(const ProblemSpec& spec, const std::vector<HamiltonianPoint>& sample,
                          const ControlGrid& theta_grid, const ControlGrid& gamma_grid,
                          double tolerance) {
  IsaacsReport rep;
  rep.max_gap = -INFINITY;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Matrix table = ell_table(sample[i], spec, theta_grid, gamma_grid);
    const double gap = inf_sup(table).value - sup_inf(table).value;
    if (gap > rep.max_gap) {
      rep.max_gap = gap;
      rep.worst = static_cast<long>(i);
    }
  }
  if (sample.empty()) rep.max_gap = 0.0;
  rep.holds = rep.max_gap <= tolerance;
  return rep;
}

TestField TestField::markovian(std::function<double(double, const Vector&)> phi,
                               std::function<Vector(double, const Vector&)> grad,
                               std::function<Matrix(double, const Vector&)> hess,
                               std::function<double(double, const Vector&)> dphi_dt, int m) {
  TestField tf;
  tf.phi = std::move(phi);
  tf.grad = std::move(grad);
  tf.hess = std::move(hess);
  tf.time_derivative = std::move(dphi_dt);
  tf.omega_derivative = [m](double, const Vector&) { return Vector::Zero(m); };
  tf.omega_gradient = [m](double, const Vector& x) { return Matrix::Zero(m, x.size()); };
  return tf;
}

double derivative_mismatch(const TestField& field, int d, double horizon, int probes,
                           std::uint64_t seed) {
  Xoshiro256 rng(seed);
  const double h = 1e-4;
  double worst = 0.0;
  for (int n = 0; n < probes; ++n) {
    const double t = horizon * rng.uniform();
    Vector x(d);
    for (auto& v : x) v = 2.0 * rng.normal();
    const Vector g = field.grad(t, x);
    const Matrix H = field.hess(t, x);
    for (int i = 0; i < d; ++i) {
      Vector e = Vector::Zero(d);
      e(i) = h;
      const double fd = (field.phi(t, x + e) - field.phi(t, x - e)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - g(i)));
      const Vector gd = (field.grad(t, x + e) - field.grad(t, x - e)) / (2.0 * h);
      worst = std::max(worst, (gd - H.col(i)).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

double f_driver(const TestField& field, const ProblemSpec& spec, double s, const Vector& x,
                double y, const Vector& z, const Vector& theta, const Vector& gamma,
                const Vector& hist) {
  const Matrix sigma = spec.sigma(s, x, theta, gamma, hist);
  const Vector drift = spec.b(s, x, theta, gamma, hist);
  const Vector dphi = field.grad(s, x);
  const Matrix trace_arg =
      0.5 * sigma * sigma.transpose() * field.hess(s, x) + sigma * field.omega_gradient(s, x);
  const Vector z_shift = z + sigma.transpose() * dphi + field.omega_derivative(s, x);
  return field.time_derivative(s, x) + trace_arg.trace() + drift.dot(dphi) +
         spec.f(s, x, y + field.phi(s, x), z_shift, theta, gamma, hist);
}

DriverFn f_driver_fn(const TestField& field, const ProblemSpec& spec) {
  return [field, spec](double s, const Vector& x, double y, const Vector& z, const Vector& th,
                       const Vector& ga, const Vector& hist) {
    return f_driver(field, spec, s, x, y, z, th, ga, hist);
  };
}

DriverModulus estimate_f_modulus(const TestField& field, const ProblemSpec& spec, int probes,
                                 std::uint64_t seed, double box) {
  Xoshiro256 rng(seed);
  DriverModulus out;
  for (int n = 0; n < probes; ++n) {
    const double t = spec.horizon * rng.uniform();
    Vector x(spec.d), xb(spec.d), z(spec.m), hist = Vector::Zero(spec.history_size());
    for (auto& v : x) v = box * (2.0 * rng.uniform() - 1.0);
    const double scale = std::pow(10.0, -3.0 * rng.uniform());
    for (int i = 0; i < spec.d; ++i) xb(i) = x(i) + scale * rng.normal();
    for (auto& v : z) v = rng.normal();
    const double y = rng.normal();
    const Vector th = spec.theta_grid.point(static_cast<int>(rng() % spec.theta_grid.size()));
    const Vector ga = spec.gamma_grid.point(static_cast<int>(rng() % spec.gamma_grid.size()));
    const double a = f_driver(field, spec, t, x, y, z, th, ga, hist);
    const double b = f_driver(field, spec, t, xb, y, z, th, ga, hist);
    out.sup_abs = std::max({out.sup_abs, std::abs(a), std::abs(b)});
    const double dx = (x - xb).norm();
    if (dx > 0.0) out.lipschitz_x = std::max(out.lipschitz_x, std::abs(a - b) / dx);
  }
  return out;
}

FZeroOne f_zero_f_one(const TestField& field, const ProblemSpec& spec, double s, const Vector& x,
                      double y, const Vector& z, const Vector& hist) {
  Matrix table(spec.theta_grid.size(), spec.gamma_grid.size());
  for (int i = 0; i < spec.theta_grid.size(); ++i)
    for (int j = 0; j < spec.gamma_grid.size(); ++j)
      table(i, j) = f_driver(field, spec, s, x, y, z, spec.theta_grid.point(i),
                             spec.gamma_grid.point(j), hist);
  const Saddle saddle = sup_inf(table);
  FZeroOne out;
  out.f0 = saddle.value;
  out.gamma_choice = saddle.inner;
  out.f1.resize(table.rows());
  for (Eigen::Index i = 0; i < table.rows(); ++i) out.f1(i) = table(i, saddle.inner(i));
  return out;
}

}  // namespace sdg
