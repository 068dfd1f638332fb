#include <doctest.h>

#include "sdg/problems.hpp"
#include "sdg/random.hpp"
#include "sdg/sde.hpp"
#include "sdg/sublinear.hpp"

#include <cmath>

using namespace sdg;

namespace {

Vector random_payoff(long n, Xoshiro256& rng) {
  Vector v(n);
  for (auto& e : v) e = 2.0 * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("constant payoffs follow the implicit discrete growth law") {
  const int n = 20;
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, n), 1, 2);
  const double K = 0.5, dt = 1.0 / n;
  for (double c : {1.3, -0.7}) {
    const Vector xi = Vector::Constant(lat.nodes(n), c);
    const double up = sublinear_eval({K, 0, n, xi, Direction::upper}, lat.tree())(0);
    const double lo = sublinear_eval({K, 0, n, xi, Direction::lower}, lat.tree())(0);
    const double grow = std::pow(1.0 - K * dt, -n), shrink = std::pow(1.0 + K * dt, -n);
    CHECK(up == doctest::Approx(c > 0 ? c * grow : c * shrink).epsilon(1e-12));
    CHECK(lo == doctest::Approx(c > 0 ? c * shrink : c * grow).epsilon(1e-12));
    // Continuous closed form as n grows.
    CHECK(std::abs(up - closed_form_measurable(c, K, 1.0, Direction::upper)) < 0.02);
  }
}

TEST_CASE("Richardson extrapolation reaches the exponential") {
  double y[3];
  const int ns[3] = {25, 50, 100};
  for (int i = 0; i < 3; ++i) {
    const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, ns[i]), 1, 2);
    y[i] = sublinear_eval({0.5, 0, ns[i], Vector::Ones(lat.nodes(ns[i])), Direction::upper},
                          lat.tree())(0);
  }
  CHECK(std::abs((8.0 * y[2] - 6.0 * y[1] + y[0]) / 3.0 - std::exp(0.5)) < 1e-4);
}

TEST_CASE("sublinear functionals: duality, homogeneity, sub-additivity, monotonicity") {
  const int n = 6;
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, n), 2, 2);
  const Tree& tree = lat.tree();
  Xoshiro256 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector a = random_payoff(tree.nodes(n), rng), b = random_payoff(tree.nodes(n), rng);
    const double K = 0.1 + rng.uniform();
    auto up = [&](double k, const Vector& v) { return sublinear_eval({k, 0, n, v, Direction::upper}, tree); };
    auto lo = [&](double k, const Vector& v) { return sublinear_eval({k, 0, n, v, Direction::lower}, tree); };
    const Vector ua = up(K, a), ub = up(K, b), uab = up(K, (a + b).eval());
    CHECK((ua + lo(K, (-a).eval())).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((up(K, (2.5 * a).eval()) - 2.5 * ua).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((uab - ua - ub).maxCoeff() <= 1e-10);
    CHECK((lo(K, a) + lo(K, b) - lo(K, (a + b).eval())).maxCoeff() <= 1e-10);
    CHECK((ua - up(1.5 * K, a)).maxCoeff() <= 1e-10);
    CHECK((lo(K, a) - ua).maxCoeff() <= 1e-10);
    // Constants pass through when K = 0.
    CHECK((lo(0.0, (a.array() + 1.0).matrix()) - up(0.0, a)).cwiseAbs().maxCoeff() ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("tilted expectations lie between the sublinear bounds") {
  const int n = 8;
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, n), 1, 2);
  Xoshiro256 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector xi = random_payoff(lat.nodes(n), rng);
    const double K = 0.8;
    const Tilt tilt = random_tilt(lat.tree(), 0, n, K, 100 + trial);
    CHECK(tilt.sup_norm() <= K);
    const TiltResult t = tilt_bound({K, 0, n, xi, Direction::upper}, lat.tree(), tilt);
    const double up = sublinear_eval({K, 0, n, xi, Direction::upper}, lat.tree())(0);
    const double lo = sublinear_eval({K, 0, n, xi, Direction::lower}, lat.tree())(0);
    CHECK(t.value(0) <= up + t.tolerance);
    CHECK(t.value(0) >= lo - t.tolerance);
  }
}

TEST_CASE("regression estimate tracks the exact recursion") {
  const TimeGrid g(0.0, 1.0, 10);
  const PathEnsemble ens = sample_paths(g, 1, 20000, 9);
  Vector xi(ens.n_paths);
  for (int p = 0; p < ens.n_paths; ++p) xi(p) = std::tanh(ens.W[10](p, 0));
  const Vector mc = sublinear_eval({0.5, 0, 10, xi, Direction::upper}, ens);
  const NoiseLattice lat = build_lattice(g, 1, 2);
  Vector xt(lat.nodes(10));
  for (long i = 0; i < xt.size(); ++i) xt(i) = std::tanh(lat.tree().noise_at(10)(0, i));
  const double exact = sublinear_eval({0.5, 0, 10, xt, Direction::upper}, lat.tree())(0);
  CHECK(std::abs(mc.mean() - exact) < 0.03);
}

TEST_CASE("domination chain on short controlled trees") {
  ProblemSpec spec = make_problem("pursuit-1d");
  spec.horizon = 0.3;
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 0.3, 3), 1, 2);
  const Tree tree = lattice_forward(spec, lat, TreeRoot{0, Vector::Constant(1, 0.2), {}, {}},
                                    ControlProcess::constant(1, 0));
  Xoshiro256 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Vector a = random_payoff(8, rng), b = random_payoff(8, rng);
    const DominationReport rep = domination_suite(spec, tree, 0, a, b, 1.0);
    CHECK(rep.chain);
    CHECK(rep.chain_violations == 0);
    CHECK(rep.inf_bound);
    CHECK(rep.sup_bound);
  }
}

TEST_CASE("sublinear evaluation refuses K dt >= 1") {
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 2), 1, 2);
  CHECK_THROWS_AS(sublinear_eval({3.0, 0, 2, Vector::Ones(3), Direction::upper}, lat.tree()),
                  InvalidArgument);
}
