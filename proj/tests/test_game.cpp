#include <doctest.h>

#include "sdg/bsde.hpp"
#include "sdg/game.hpp"
#include "sdg/problems.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>

using namespace sdg;

namespace {

// Plain recursion over (theta, gamma, outcome) for drivers free of (y, z):
// V(k, x) = max_theta min_gamma [E V(k+1, x + b dt + dW) + f dt].
double brute_value(const ProblemSpec& spec, const StepOutcomes& step, double dt, int k, int n,
                   double x, bool lower) {
  const Vector xv = Vector::Constant(1, x);
  if (k == n) return spec.Phi(xv, Vector());
  const int nt = spec.theta_grid.size(), ng = spec.gamma_grid.size();
  Matrix table(nt, ng);
  for (int a = 0; a < nt; ++a)
    for (int c = 0; c < ng; ++c) {
      const Vector th = spec.theta_grid.point(a), ga = spec.gamma_grid.point(c);
      const double t = k * dt;
      const double drift = spec.b(t, xv, th, ga, Vector())(0);
      const double vol = spec.sigma(t, xv, th, ga, Vector())(0, 0);
      double mean = 0.0;
      for (int j = 0; j < step.size(); ++j)
        mean += step.prob(j) *
                brute_value(spec, step, dt, k + 1, n, x + drift * dt + vol * step.increments(0, j), lower);
      table(a, c) = mean + dt * spec.f(t, xv, 0.0, Vector::Zero(1), th, ga, Vector());
    }
  return lower ? sup_inf(table).value : inf_sup(table).value;
}

}  // namespace

TEST_CASE("cancel-drift values equal the state") {
  const ProblemSpec spec = make_problem("cancel-drift");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 12), 1, 2);
  auto tree = std::make_shared<const GameTree>(expand_game(spec, lat, TreeRoot{0, Vector::Constant(1, 0.3), {}, {}}));
  const ValueField V = solve_value(spec, lat, Side::lower, tree);
  const ValueField U = solve_value(spec, lat, Side::upper, tree);
  for (int k = 0; k <= 12; ++k) {
    CHECK((V.at(k) - tree->state[k].row(0).transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((U.at(k) - V.at(k)).cwiseAbs().maxCoeff() <= 1e-10);
  }
  CHECK(value_gap(V, U) <= 1e-10);
}

TEST_CASE("game values match a brute-force recursion") {
  for (const char* key : {"pursuit-1d", "isaacs-gap", "one-player"}) {
    const ProblemSpec spec = make_problem(key);
    const int n = 3;
    const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, n), 1, 2);
    for (Side side : {Side::lower, Side::upper}) {
      const ValueField V = solve_value(spec, lat, side, TreeRoot{0, Vector::Constant(1, 0.2), {}, {}});
      const double oracle = brute_value(spec, lat.increments(), 1.0 / n, 0, n, 0.2, side == Side::lower);
      CHECK_MESSAGE(V.root_value() == doctest::Approx(oracle).epsilon(1e-12), key);
    }
  }
}

TEST_CASE("lower value never exceeds upper value, strict without Isaacs") {
  const ProblemSpec spec = make_problem("isaacs-gap");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 8), 1, 2);
  auto tree = std::make_shared<const GameTree>(expand_game(spec, lat, TreeRoot{0, Vector::Zero(1), {}, {}}));
  const ValueField V = solve_value(spec, lat, Side::lower, tree);
  const ValueField U = solve_value(spec, lat, Side::upper, tree);
  for (int k = 0; k <= 8; ++k) CHECK((V.at(k) - U.at(k)).maxCoeff() <= 1e-12);
  CHECK(U.root_value() - V.root_value() > 0.1);
  CHECK(V.bound_ok);
  CHECK(U.bound_ok);
}

TEST_CASE("single-agent values sandwich the game") {
  const ProblemSpec spec = make_problem("pursuit-1d");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 6), 1, 2);
  auto tree = std::make_shared<const GameTree>(expand_game(spec, lat, TreeRoot{0, Vector::Zero(1), {}, {}}));
  const auto lo = single_agent_values(spec, *tree, false);
  const auto hi = single_agent_values(spec, *tree, true);
  for (Side side : {Side::lower, Side::upper}) {
    const ValueField V = solve_value(spec, lat, side, tree);
    for (int k = 0; k <= 6; ++k) {
      CHECK((lo[k] - V.at(k)).maxCoeff() <= 1e-12);
      CHECK((V.at(k) - hi[k]).maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("merged game trees respect the node budget") {
  const ProblemSpec spec = make_problem("pursuit-1d");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 12), 1, 2);
  CHECK_THROWS_AS(expand_game(spec, lat, TreeRoot{0, Vector::Zero(1), {}, {}}, 500), BudgetExceeded);
}

TEST_CASE("dynamic programming residuals vanish") {
  const ProblemSpec spec = make_problem("isaacs-gap");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 6), 1, 2);
  for (Side side : {Side::lower, Side::upper}) {
    const ValueField V = solve_value(spec, lat, side, TreeRoot{0, Vector::Zero(1), {}, {}});
    const DppReport one = dpp_residual(spec, V, lat, 2, 3);
    CHECK(one.mode == DppMode::enumeration);
    CHECK(one.residual <= 1e-12);
    const DppReport two = dpp_residual(spec, V, lat, 0, 2);
    CHECK(two.mode == DppMode::enumeration);
    CHECK(two.evaluations > 100);
    CHECK(two.residual <= 1e-10);
    const DppReport full = dpp_residual(spec, V, lat, 0, 6);
    CHECK(full.residual <= 1e-10);
  }
}

TEST_CASE("longer windows use the unmerged minimax and catch planted errors") {
  const ProblemSpec spec = make_problem("isaacs-gap");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 6), 1, 2);
  ValueField V = solve_value(spec, lat, Side::lower, TreeRoot{0, Vector::Zero(1), {}, {}});
  const DppReport four = dpp_residual(spec, V, lat, 0, 4);
  CHECK(four.mode == DppMode::expansion);
  CHECK(four.residual <= 1e-10);
  V.values[0](0) += 1e-3;
  CHECK(dpp_residual(spec, V, lat, 0, 4).residual == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(dpp_residual(spec, V, lat, 0, 1).residual == doctest::Approx(1e-3).epsilon(1e-6));
  V.values[0](0) -= 1e-3;
  V.values[4].array() += 0.01;  // shifting the window end shifts every root by about as much
  CHECK(dpp_residual(spec, V, lat, 0, 4).residual > 0.005);
}

TEST_CASE("dynamic programming checks the lattice identity") {
  const ProblemSpec spec = make_problem("isaacs-gap");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 4), 1, 2);
  const NoiseLattice other = build_lattice(TimeGrid(0.0, 1.0, 4), 1, 3);
  const ValueField V = solve_value(spec, lat, Side::lower, TreeRoot{0, Vector::Zero(1), {}, {}});
  CHECK_THROWS_AS(dpp_residual(spec, V, other, 0, 2), InvalidArgument);
  CHECK_THROWS_AS(dpp_residual(make_problem("pursuit-1d"), V, lat, 0, 2), InvalidArgument);
}

TEST_CASE("greedy profiles are optimal and deviations do not pay") {
  for (const char* key : {"isaacs-gap", "pursuit-1d"}) {
    const ProblemSpec spec = make_problem(key);
    const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 6), 1, 2);
    for (Side side : {Side::lower, Side::upper}) {
      const ValueField V = solve_value(spec, lat, side, TreeRoot{0, Vector::Constant(1, 0.1), {}, {}});
      const StrategyProfile prof = extract_epsilon_optimal(spec, V, lat);
      CHECK(prof.epsilon <= 1e-10);
      const DeviationReport dev = deviation_test(spec, prof, lat, 40, 5);
      CHECK(dev.nodes_tested == 40);
      CHECK(dev.profitable == 0);
    }
  }
}

TEST_CASE("values are independent of the worker count") {
  const ProblemSpec spec = make_problem("pursuit-1d");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 6), 1, 2);
  setenv("SDG_THREADS", "1", 1);
  const ValueField a = solve_value(spec, lat, Side::lower, TreeRoot{0, Vector::Zero(1), {}, {}});
  setenv("SDG_THREADS", "3", 1);
  const ValueField b = solve_value(spec, lat, Side::lower, TreeRoot{0, Vector::Zero(1), {}, {}});
  unsetenv("SDG_THREADS");
  for (std::size_t s = 0; s < a.values.size(); ++s) CHECK((a.values[s] - b.values[s]).norm() == 0.0);
}

TEST_CASE("regularity: bound and stable quotients on the clipped game") {
  const ProblemSpec spec = make_problem("clipped-cancel");
  std::vector<Vector> probes;
  for (int i = 0; i <= 8; ++i) probes.push_back(Vector::Constant(1, -1.0 + 0.25 * i));
  const RegularityReport a = regularity_suite(spec, Side::lower, probes, 8, 2, false);
  const RegularityReport b = regularity_suite(spec, Side::lower, probes, 16, 2, false);
  CHECK(a.bound_ok);
  CHECK(a.sup_bound <= 2.0);
  CHECK(b.lipschitz <= 1.1 * a.lipschitz + 0.01);
  CHECK(a.lipschitz <= 1.0 + 1e-12);
}

TEST_CASE("value drift is linear in the perturbation size") {
  const ProblemSpec spec = make_problem("cancel-drift", {3, 3});
  const DriftFn one = [](double, const Vector&, const Vector&, const Vector&, const Vector&) {
    return Vector::Ones(1).eval();
  };
  const DriverFn wave = [](double, const Vector& x, double, const Vector&, const Vector&,
                           const Vector&, const Vector&) { return std::cos(x(0)); };
  const StabilityReport rep = stability_suite(spec, {0.0, 0.2, 0.1, 0.05}, one, wave,
                                              {Vector::Zero(1)}, 8, Side::lower);
  CHECK(rep.drift[0] == 0.0);
  CHECK(rep.slope >= 0.9);
}
