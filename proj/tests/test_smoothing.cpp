#include <doctest.h>

#include "sdg/random.hpp"
#include "sdg/smoothing.hpp"

#include <cmath>

using namespace sdg;

TEST_CASE("Gauss-Legendre is exact to degree 2n - 1") {
  const GaussLegendre two = gauss_legendre(2);
  CHECK(std::abs(two.nodes.cwiseAbs().maxCoeff() - 1.0 / std::sqrt(3.0)) < 1e-15);
  for (int n : {3, 8, 20}) {
    const GaussLegendre g = gauss_legendre(n);
    for (int p = 0; p < 2 * n; ++p) {
      const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
      CHECK(g.weights.dot(g.nodes.array().pow(p).matrix()) == doctest::Approx(exact).epsilon(1e-13));
    }
  }
}

TEST_CASE("bump kernel has unit mass") {
  // Midpoint sums, independent of the radial quadrature behind the constant.
  const int cells = 100000;
  double m1 = 0.0;
  Vector x(1);
  for (int i = 0; i < cells; ++i) {
    x(0) = -1.0 + (i + 0.5) * 2.0 / cells;
    m1 += bump(x) * 2.0 / cells;
  }
  CHECK(std::abs(m1 - 1.0) < 1e-6);
  const int side = 600;
  double m2 = 0.0;
  Vector u(2);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      u << -1.0 + (i + 0.5) * 2.0 / side, -1.0 + (j + 0.5) * 2.0 / side;
      m2 += bump(u) * 4.0 / (side * side);
    }
  CHECK(std::abs(m2 - 1.0) < 1e-6);
  CHECK(bump(Vector::Constant(1, 1.0)) == 0.0);
}

TEST_CASE("kernel rule is a symmetric probability") {
  for (int d : {1, 2}) {
    const KernelRule& r = kernel_rule(d, 16);
    CHECK(r.weights.minCoeff() > 0.0);
    CHECK(r.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((r.points * r.weights).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("barrier: zero at the origin, floor, convexity, derivatives") {
  CHECK(barrier_g(Vector::Zero(1)).value == 0.0);
  CHECK(barrier_g(Vector::Zero(2), 16).value == 0.0);
  Xoshiro256 rng(8);
  for (int i = 0; i < 40; ++i) {
    Vector x(2), y(2);
    for (auto& v : x) v = 6.0 * rng.normal();
    for (auto& v : y) v = 6.0 * rng.normal();
    const BarrierValue gx = barrier_g(x, 16);
    CHECK(gx.value > x.norm() - 3.0);
    const double lam = rng.uniform();
    CHECK(barrier_g((lam * x + (1 - lam) * y).eval(), 16).value <=
          lam * gx.value + (1 - lam) * barrier_g(y, 16).value + 1e-9);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gx.hess);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
  }
  // Gradient against central differences of a much finer rule: the value
  // of a coarse rule is not smooth in x because h has a kink.
  for (double x0 : {-3.1, -0.5, 2.2, 4.0}) {
    const double h = 1e-3;
    const double fd = (barrier_g(Vector::Constant(1, x0 + h), 256).value -
                       barrier_g(Vector::Constant(1, x0 - h), 256).value) / (2 * h);
    CHECK(std::abs(barrier_g(Vector::Constant(1, x0)).grad(0) - fd) < 2e-3);
  }
}

TEST_CASE("mollification preserves affine maps and shrinks sup norms") {
  const ScalarField affine = [](const Vector& x) { return 2.0 * x(0) - 1.0; };
  const ScalarField sm = mollify(affine, 1, {0.3, 16});
  for (double x : {-2.0, 0.0, 1.7}) CHECK(sm(Vector::Constant(1, x)) == doctest::Approx(2 * x - 1).epsilon(1e-13));

  const ScalarField wave = [](const Vector& x) { return std::sin(3.0 * x(0)); };
  const ScalarField ws = mollify(wave, 1, {0.05, 32});
  double sup = 0.0, err = 0.0;
  for (int i = 0; i < 400; ++i) {
    const Vector x = Vector::Constant(1, -4.0 + 0.02 * i);
    sup = std::max(sup, std::abs(ws(x)));
    err = std::max(err, std::abs(ws(x) - wave(x)));
  }
  CHECK(sup <= 1.0);
  CHECK(err < 0.05);

  const ScalarField plane = [](const Vector& x) { return std::cos(x(0)) * std::sin(x(1)); };
  const ScalarField ps = mollify(plane, 2, {0.1, 12});
  CHECK(std::abs(ps(Vector::Constant(2, 0.4))) <= 1.0);
}
