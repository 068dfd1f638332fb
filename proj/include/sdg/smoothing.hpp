#pragma once

#include "sdg/types.hpp"

#include <functional>

namespace sdg {

/// Gauss-Legendre nodes and weights on [-1, 1] (Golub-Welsch).
struct GaussLegendre {
  Vector nodes;
  Vector weights;
};
GaussLegendre gauss_legendre(int n);

/// Normalising constant of the bump kernel in dimension d (1 <= d <= 4),
/// computed once by radial quadrature to near machine precision.
double bump_constant(int d);

/// Smooth compactly supported unit-mass kernel: c exp(1 / (|x|^2 - 1)) on the
/// open unit ball, zero elsewhere.
template <typename Derived>
double bump(const Eigen::MatrixBase<Derived>& x) {
  const double r2 = x.squaredNorm();
  if (r2 >= 1.0) return 0.0;
  return bump_constant(static_cast<int>(x.size())) * std::exp(1.0 / (r2 - 1.0));
}

/// Tensor-product quadrature for the bump kernel on [-1, 1]^d. Weights are
/// positive and rescaled to sum to one, so convolutions against this rule
/// are exact convex combinations.
struct KernelRule {
  Matrix points;     // d x Q
  Vector weights;    // Q, sums to 1
  Matrix gradients;  // d x Q, quadrature weight times D rho, same scaling
};
const KernelRule& kernel_rule(int d, int points_per_axis = 32);

struct BarrierValue {
  double value = 0.0;
  Vector grad;
  Matrix hess;
};

/// Convex barrier g = h * rho * rho with h(y) = (|y| - 2)^+, d <= 2.
/// Derivatives are moved onto the kernels and evaluated by the same rule.
BarrierValue barrier_g(const Vector& x, int points_per_axis = 32);

using ScalarField = std::function<double(const Vector&)>;

struct MollifierConfig {
  double delta = 0.1;
  int points_per_axis = 32;
};

/// Identity approximation phi_delta(x) = sum_i w_i phi(x - delta u_i), d <= 2.
ScalarField mollify(ScalarField phi, int d, const MollifierConfig& config);

}  // namespace sdg
