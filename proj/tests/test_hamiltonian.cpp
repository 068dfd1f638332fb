#include <doctest.h>

#include "sdg/hamiltonian.hpp"
#include "sdg/problems.hpp"
#include "sdg/random.hpp"

#include <cmath>

using namespace sdg;

TEST_CASE("finite max-min and min-max on matching pennies") {
  Matrix pennies(2, 2);
  pennies << 1, -1, -1, 1;
  CHECK(sup_inf(pennies).value == -1.0);
  CHECK(inf_sup(pennies).value == 1.0);
  Matrix saddle(2, 3);
  saddle << 3, 1, 4, 2, 0, 5;
  const Saddle lo = sup_inf(saddle), hi = inf_sup(saddle);
  CHECK(lo.value == 1.0);
  CHECK(hi.value == 1.0);
  CHECK(lo.outer == 0);
  CHECK(lo.inner(0) == 1);
  CHECK(hi.outer == 1);
}

TEST_CASE("max-min never exceeds min-max") {
  Xoshiro256 rng(2);
  for (int t = 0; t < 1000; ++t) {
    Matrix m(1 + t % 4, 1 + (t / 4) % 5);
    for (auto& v : m.reshaped()) v = rng.normal();
    const double lo = sup_inf(m).value, hi = inf_sup(m).value;
    CHECK(lo <= hi);
    // Independent brute force.
    double best = -INFINITY;
    for (int i = 0; i < m.rows(); ++i) best = std::max(best, m.row(i).minCoeff());
    CHECK(lo == best);
  }
}

TEST_CASE("ell for the cancelling drift") {
  const ProblemSpec spec = make_problem("cancel-drift");
  HamiltonianPoint pt;
  pt.x = Vector::Constant(1, 0.4);
  pt.A = Matrix::Constant(1, 1, 2.0);
  pt.B = Matrix::Constant(1, 1, 0.5);
  pt.p = Vector::Constant(1, 3.0);
  pt.z = Vector::Zero(1);
  const Vector th = Vector::Constant(1, 0.5), ga = Vector::Constant(1, -1.0);
  // 1/2 * 2 + 0.5 + (0.5 - 1) * 3 + f = 0
  CHECK(ell(pt, th, ga, spec) == doctest::Approx(1.0 + 0.5 - 1.5));
}

TEST_CASE("Isaacs status of the catalogue") {
  for (const auto& p : catalog()) {
    const ProblemSpec spec = p.make({});
    const auto pts = sample_points(spec, 300, 4);
    const IsaacsReport rep = isaacs_check(spec, pts, spec.theta_grid, spec.gamma_grid);
    CHECK_MESSAGE(rep.holds == p.isaacs_expected, p.key);
    for (const auto& pt : pts)
      CHECK(h_minus(pt, spec, spec.theta_grid, spec.gamma_grid).value <=
            h_plus(pt, spec, spec.theta_grid, spec.gamma_grid).value);
  }
}

TEST_CASE("isaacs-gap Hamiltonians at the unit gradient") {
  const ProblemSpec spec = make_problem("isaacs-gap");
  const HamiltonianPoint pt = unit_gradient_point(spec);
  CHECK(h_minus(pt, spec, spec.theta_grid, spec.gamma_grid).value == -1.0);
  CHECK(h_plus(pt, spec, spec.theta_grid, spec.gamma_grid).value == 1.0);
  const Matrix table = ell_table(pt, spec, spec.theta_grid, spec.gamma_grid);
  CHECK(table.rows() == 2);
  CHECK(table.cols() == 2);
}

TEST_CASE("test field derivatives are consistent") {
  const TestField field = freezing_test_field(1, 1);
  CHECK(derivative_mismatch(field, 1, 1.0, 50, 3) < 1e-6);
}

TEST_CASE("F0 is the max over theta of F1") {
  const ProblemSpec spec = make_problem("pursuit-1d");
  const TestField field = freezing_test_field(1, 1);
  Xoshiro256 rng(6);
  for (int i = 0; i < 50; ++i) {
    const Vector x = Vector::Constant(1, 3.0 * rng.normal());
    const Vector z = Vector::Constant(1, rng.normal());
    const FZeroOne r = f_zero_f_one(field, spec, 0.2, x, 0.1, z, Vector());
    CHECK(r.f0 == r.f1.maxCoeff());
    for (int t = 0; t < spec.theta_grid.size(); ++t)
      for (int g = 0; g < spec.gamma_grid.size(); ++g)
        CHECK(r.f1(t) <= f_driver(field, spec, 0.2, x, 0.1, z, spec.theta_grid.point(t),
                                  spec.gamma_grid.point(g), Vector()) + 1e-12);
  }
}
