#include <doctest.h>

#include "sdg/problems.hpp"
#include "sdg/sde.hpp"

#include <cmath>

using namespace sdg;

TEST_CASE("Euler states for additive noise are exact") {
  const ProblemSpec spec = make_problem("cancel-drift");
  const TimeGrid g(0.0, 1.0, 10);
  const PathEnsemble ens = sample_paths(g, 1, 500, 2);
  // theta index 4 is +1, gamma index 1 is -0.5: drift 0.5.
  const StateTrajectory tr =
      euler_forward(spec, ens, {0, Matrix::Constant(1, 1, 0.2)}, ControlProcess::constant(4, 1));
  for (int k = 0; k <= 10; ++k) {
    const Vector expect = (0.2 + 0.5 * g.time(k) + ens.W[k].col(0).array()).matrix();
    CHECK((tr.at(k).col(0) - expect).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("open-loop controls are read per path and step") {
  const ProblemSpec spec = make_problem("cancel-drift");
  const TimeGrid g(0.0, 1.0, 2);
  const PathEnsemble ens = sample_paths(g, 1, 2, 4);
  Eigen::MatrixXi th(2, 2), ga(2, 2);
  th << 4, 0, 2, 2;
  ga << 2, 2, 2, 2;
  const StateTrajectory tr = euler_forward(spec, ens, {0, Matrix::Zero(1, 1)},
                                           ControlProcess::open_loop(th, ga));
  // Path 0 drifts +1 then -1; path 1 has zero drift.
  CHECK(tr.at(2)(0, 0) == doctest::Approx(ens.W[2](0, 0)).epsilon(1e-14));
  CHECK(tr.at(1)(0, 0) == doctest::Approx(0.5 + ens.W[1](0, 0)).epsilon(1e-14));
  CHECK(tr.at(2)(1, 0) == doctest::Approx(ens.W[2](1, 0)).epsilon(1e-14));
  th(0, 0) = 9;
  CHECK_THROWS_AS(euler_forward(spec, ens, {0, Matrix::Zero(1, 1)}, ControlProcess::open_loop(th, ga)),
                  InvalidArgument);
}

TEST_CASE("lattice trees enumerate every noise path") {
  const ProblemSpec spec = make_problem("pursuit-1d");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 6), 1, 2);
  const Tree tree = lattice_forward(spec, lat, TreeRoot{0, Vector::Constant(1, 0.3), {}, {}},
                                    ControlProcess::constant(1, 0));
  CHECK(tree.nodes(6) == 64);
  CHECK(tree.weights_at(6).sum() == doctest::Approx(1.0).epsilon(1e-14));
  // Replay one path by hand: b = sin(x) theta + 0.5 gamma with theta = 1, gamma = -1.
  const double dt = 1.0 / 6.0, s = std::sqrt(dt);
  double x = 0.3;
  long node = 0;
  for (int k = 0; k < 6; ++k) {
    const int j = k % 2;
    x += (std::sin(x) - 0.5) * dt + tree.step.increments(0, j);
    node = tree.child(k, node, j);
  }
  CHECK(tree.states_at(6)(0, node) == doctest::Approx(x).epsilon(1e-14));
  CHECK(std::abs(tree.step.increments(0, 0)) == doctest::Approx(s));
}

TEST_CASE("lattice trees respect the node budget") {
  const ProblemSpec spec = make_problem("pursuit-1d");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 12), 1, 2);
  CHECK_THROWS_AS(lattice_forward(spec, lat, TreeRoot{0, Vector::Zero(1), {}, {}},
                                  ControlProcess::constant(0, 0), 1000),
                  BudgetExceeded);
}

TEST_CASE("restarted trees reproduce the full tree") {
  for (const char* key : {"pursuit-1d", "random-terminal", "cancel-drift"}) {
    const ProblemSpec spec = make_problem(key);
    const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 8), 1, 2);
    const auto fb = ControlProcess::from_feedback([](int k, const Vector& x, const Vector&) {
      return ControlChoice{x(0) > 0 ? 0 : 1, k % 2};
    });
    CHECK(check_flow_property(spec, lat, 0, 3, Vector::Constant(1, 0.1), fb) <= 1e-12);
  }
}

TEST_CASE("noise history is stopped at the partition time") {
  const ProblemSpec spec = make_problem("random-terminal");
  REQUIRE(spec.history_size() == 1);
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 4), 1, 2);
  const Tree tree = lattice_forward(spec, lat, TreeRoot{0, Vector::Zero(1), {}, {}},
                                    ControlProcess::constant(0, 0));
  for (int k = 0; k <= 4; ++k)
    CHECK((tree.history_at(k) - tree.noise_at(k)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("moment estimates agree with Gaussian moments") {
  const ProblemSpec spec = make_problem("cancel-drift");
  const TimeGrid g(0.0, 1.0, 10);
  const PathEnsemble ens = sample_paths(g, 1, 40000, 8);
  MomentQuery q;
  q.xi = Vector::Constant(1, 0.5);
  q.xi_hat = Vector::Constant(1, 0.7);
  q.t_slice = 4;
  q.s_slice = 10;
  // Controls (0, 0): drift -2.
  const MomentEstimates m = moment_estimates(spec, ens, q, ControlProcess::constant(0, 0));
  const double span = 0.6;
  const double expect = 4.0 * span * span + span;  // E (drift * span + W)^2
  CHECK(m.increment_moment == doctest::Approx(expect).epsilon(0.03));
  // State-free coefficients shift every path rigidly.
  CHECK(m.sensitivity == doctest::Approx(0.04).epsilon(1e-10));
  CHECK(m.sup_moment >= 0.25);
}
