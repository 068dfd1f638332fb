#include "sdg/smoothing.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace sdg {

GaussLegendre gauss_legendre(int n) {
  require(n >= 1, "Gauss-Legendre rule needs n >= 1");
  Matrix J = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double beta = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = beta;
    J(i - 1, i) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(J);
  GaussLegendre rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = 2.0 * eig.eigenvectors().row(0).transpose().array().square();
  // Symmetrise so that odd moments vanish to rounding.
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (rule.nodes(n - 1 - i) - rule.nodes(i));
    const double w = 0.5 * (rule.weights(i) + rule.weights(n - 1 - i));
    rule.nodes(i) = -x;
    rule.nodes(n - 1 - i) = x;
    rule.weights(i) = w;
    rule.weights(n - 1 - i) = w;
  }
  if (n % 2 == 1) rule.nodes(n / 2) = 0.0;
  return rule;
}

namespace {

double radial_integral(int d) {
  // int_0^1 r^{d-1} exp(1/(r^2-1)) dr by composite Gauss-Legendre.
  const GaussLegendre gl = gauss_legendre(20);
  const int panels = 400;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double a = static_cast<double>(p) / panels;
    const double h = 1.0 / panels;
    for (int i = 0; i < gl.nodes.size(); ++i) {
      const double r = a + 0.5 * h * (gl.nodes(i) + 1.0);
      sum += 0.5 * h * gl.weights(i) * std::pow(r, d - 1) * std::exp(1.0 / (r * r - 1.0));
    }
  }
  return sum;
}

}  // namespace

double bump_constant(int d) {
  static const std::array<double, 4> table = [] {
    std::array<double, 4> out{};
    for (int dim = 1; dim <= 4; ++dim) {
      const double sphere =
          2.0 * std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim);
      out[dim - 1] = 1.0 / (sphere * radial_integral(dim));
    }
    return out;
  }();
  require(d >= 1 && d <= 4, "bump kernel supports 1 <= d <= 4");
  return table[d - 1];
}

const KernelRule& kernel_rule(int d, int points_per_axis) {
  require(d == 1 || d == 2, "kernel quadrature supports d <= 2");
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<KernelRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{d, points_per_axis}];
  if (slot) return *slot;

  const GaussLegendre gl = gauss_legendre(points_per_axis);
  const int n = points_per_axis;
  std::vector<Vector> pts;
  std::vector<double> w;
  std::vector<Vector> grads;
  const long total = d == 1 ? n : static_cast<long>(n) * n;
  for (long idx = 0; idx < total; ++idx) {
    Vector u(d);
    double qw = 1.0;
    long rest = idx;
    for (int c = 0; c < d; ++c) {
      u(c) = gl.nodes(rest % n);
      qw *= gl.weights(rest % n);
      rest /= n;
    }
    const double r2 = u.squaredNorm();
    if (r2 >= 1.0) continue;
    const double rho = bump(u);
    if (rho <= 0.0) continue;
    pts.push_back(u);
    w.push_back(qw * rho);
    // D rho(u) = rho(u) * (-2u / (|u|^2 - 1)^2)
    grads.push_back(qw * rho * (-2.0 / ((r2 - 1.0) * (r2 - 1.0))) * u);
  }
  auto rule = std::make_unique<KernelRule>();
  rule->points.resize(d, pts.size());
  rule->weights.resize(pts.size());
  rule->gradients.resize(d, pts.size());
  double total_w = 0.0;
  for (double v : w) total_w += v;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    rule->points.col(i) = pts[i];
    rule->weights(i) = w[i] / total_w;
    rule->gradients.col(i) = grads[i] / total_w;
  }
  slot = std::move(rule);
  return *slot;
}

BarrierValue barrier_g(const Vector& x, int points_per_axis) {
  const int d = static_cast<int>(x.size());
  const KernelRule& rule = kernel_rule(d, points_per_axis);
  const long q = rule.weights.size();
  BarrierValue out;
  out.grad = Vector::Zero(d);
  out.hess = Matrix::Zero(d, d);
  Vector y(d);
  for (long i = 0; i < q; ++i) {
    for (long j = 0; j < q; ++j) {
      y = x - rule.points.col(i) - rule.points.col(j);
      const double r = y.norm();
      if (r <= 2.0) continue;
      const double h = r - 2.0;
      out.value += rule.weights(i) * rule.weights(j) * h;
      out.grad += h * rule.weights(i) * rule.gradients.col(j);
      out.hess += h * rule.gradients.col(i) * rule.gradients.col(j).transpose();
    }
  }
  out.hess = 0.5 * (out.hess + out.hess.transpose()).eval();
  return out;
}

ScalarField mollify(ScalarField phi, int d, const MollifierConfig& config) {
  require(config.delta > 0.0, "mollifier radius must be positive");
  const KernelRule& rule = kernel_rule(d, config.points_per_axis);
  const double delta = config.delta;
  return [phi = std::move(phi), &rule, delta](const Vector& x) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < rule.weights.size(); ++i)
      sum += rule.weights(i) * phi(x - delta * rule.points.col(i));
    return sum;
  };
}

}  // namespace sdg
