#pragma once

#include "sdg/problem.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace sdg {

/// Argument of the pointwise Hamiltonians.
struct HamiltonianPoint {
  double t = 0.0;
  Vector x;
  Matrix A;  // d x d, symmetric
  Matrix B;  // m x d
  Vector p;  // d
  double y = 0.0;
  Vector z;  // m
  Vector hist;
};

/// tr(1/2 sigma sigma' A + sigma B) + b' p + f(t, x, y, z + sigma' p, theta, gamma).
double ell(const HamiltonianPoint& pt, const Vector& theta, const Vector& gamma,
           const ProblemSpec& spec);

/// Result of an exact finite max-min (or min-max) over a payoff table.
/// `outer` is the optimiser of the outer operation and inner(i) the
/// optimiser of the inner one for outer choice i. Ties go to the lowest index.
struct Saddle {
  double value = 0.0;
  int outer = 0;
  IndexVector inner;
};

/// max over rows of min over columns.
template <typename Derived>
Saddle sup_inf(const Eigen::MatrixBase<Derived>& payoff) {
  Saddle s;
  s.inner.resize(payoff.rows());
  for (Eigen::Index i = 0; i < payoff.rows(); ++i) {
    Eigen::Index j = 0;
    for (Eigen::Index c = 1; c < payoff.cols(); ++c)
      if (payoff(i, c) < payoff(i, j)) j = c;
    s.inner(i) = static_cast<int>(j);
    if (i == 0 || payoff(i, j) > s.value) {
      s.value = payoff(i, j);
      s.outer = static_cast<int>(i);
    }
  }
  return s;
}

/// min over columns of max over rows; inner(j) is the maximising row for column j.
template <typename Derived>
Saddle inf_sup(const Eigen::MatrixBase<Derived>& payoff) {
  Saddle s;
  s.inner.resize(payoff.cols());
  for (Eigen::Index j = 0; j < payoff.cols(); ++j) {
    Eigen::Index i = 0;
    for (Eigen::Index r = 1; r < payoff.rows(); ++r)
      if (payoff(r, j) > payoff(i, j)) i = r;
    s.inner(j) = static_cast<int>(i);
    if (j == 0 || payoff(i, j) < s.value) {
      s.value = payoff(i, j);
      s.outer = static_cast<int>(j);
    }
  }
  return s;
}

/// Table of ell over theta (rows) x gamma (columns).
Matrix ell_table(const HamiltonianPoint& pt, const ProblemSpec& spec,
                 const ControlGrid& theta_grid, const ControlGrid& gamma_grid);

/// H_- = sup_theta inf_gamma ell; outer = argmax theta, inner = argmin gamma per theta.
Saddle h_minus(const HamiltonianPoint& pt, const ProblemSpec& spec,
               const ControlGrid& theta_grid, const ControlGrid& gamma_grid);
/// H_+ = inf_gamma sup_theta ell; outer = argmin gamma, inner = argmax theta per gamma.
Saddle h_plus(const HamiltonianPoint& pt, const ProblemSpec& spec,
              const ControlGrid& theta_grid, const ControlGrid& gamma_grid);

/// Random Hamiltonian arguments with entries of size ~scale.
std::vector<HamiltonianPoint> sample_points(const ProblemSpec& spec, int count,
                                            std::uint64_t seed, double scale = 2.0);

struct IsaacsReport {
  double max_gap = 0.0;  // max of H_+ - H_-
  long worst = -1;       // index of the witnessing point
  bool holds = false;
};

IsaacsReport isaacs_check(const ProblemSpec& spec, const std::vector<HamiltonianPoint>& sample,
                          const ControlGrid& theta_grid, const ControlGrid& gamma_grid,
                          double tolerance = 1e-9);

/// Smooth synthetic test function with analytically supplied derivatives.
/// The pathwise derivatives are inputs: `time_derivative` stands for the
/// drift part of phi's time differential and `omega_derivative` for its
/// martingale integrand, with `omega_gradient` its spatial gradient (m x d).
struct TestField {
  std::function<double(double, const Vector&)> phi;
  std::function<Vector(double, const Vector&)> grad;
  std::function<Matrix(double, const Vector&)> hess;
  std::function<double(double, const Vector&)> time_derivative;
  std::function<Vector(double, const Vector&)> omega_derivative;
  std::function<Matrix(double, const Vector&)> omega_gradient;

  /// Markovian field: omega parts vanish and time_derivative is d phi / dt.
  static TestField markovian(std::function<double(double, const Vector&)> phi,
                             std::function<Vector(double, const Vector&)> grad,
                             std::function<Matrix(double, const Vector&)> hess,
                             std::function<double(double, const Vector&)> dphi_dt, int m);
};

/// Max mismatch between the supplied D phi, D^2 phi and central differences.
double derivative_mismatch(const TestField& field, int d, double horizon, int probes,
                           std::uint64_t seed);

/// F(s, x, y, z, theta, gamma) built from the test field and the coefficients.
double f_driver(const TestField& field, const ProblemSpec& spec, double s, const Vector& x,
                double y, const Vector& z, const Vector& theta, const Vector& gamma,
                const Vector& hist);

/// F as a driver callable (for the backward solvers).
DriverFn f_driver_fn(const TestField& field, const ProblemSpec& spec);

/// Probe estimate of the x-Lipschitz modulus of F and of sup |F|.
struct DriverModulus {
  double lipschitz_x = 0.0;
  double sup_abs = 0.0;
};
DriverModulus estimate_f_modulus(const TestField& field, const ProblemSpec& spec, int probes,
                                 std::uint64_t seed, double box = 5.0);

struct FZeroOne {
  double f0 = 0.0;          // sup_theta inf_gamma F
  Vector f1;                // inf_gamma F per theta
  IndexVector gamma_choice; // minimising gamma per theta
};

FZeroOne f_zero_f_one(const TestField& field, const ProblemSpec& spec, double s, const Vector& x,
                      double y, const Vector& z, const Vector& hist);

}  // namespace sdg
