#include <doctest.h>

#include "sdg/bsde.hpp"
#include "sdg/problems.hpp"
#include "sdg/sde.hpp"

#include <cmath>
#include <functional>

using namespace sdg;

namespace {

Vector terminal_values(const ProblemSpec& spec, const Tree& tree) {
  Vector v(tree.nodes(tree.end()));
  for (long i = 0; i < v.size(); ++i)
    v(i) = spec.Phi(tree.states_at(tree.end()).col(i), tree.history_at(tree.end()).col(i));
  return v;
}

// Linear BSDE Y = Phi + int (a Y + b Z + c cos X) on the recombining
// binomial lattice of X = x0 + mu t + W, solved in closed form per step.
double binomial_linear_oracle(double x0, double mu, double a, double b, double c, int n,
                              const std::function<double(double)>& phi) {
  const double dt = 1.0 / n, s = std::sqrt(dt);
  std::vector<double> y(n + 1);
  for (int i = 0; i <= n; ++i) y[i] = phi(x0 + mu + (2 * i - n) * s);
  for (int k = n - 1; k >= 0; --k) {
    for (int i = 0; i <= k; ++i) {
      const double x = x0 + mu * k * dt + (2 * i - k) * s;
      const double mean = 0.5 * (y[i] + y[i + 1]);
      const double z = 0.5 * (y[i + 1] - y[i]) * s / dt;
      y[i] = (mean + (b * z + c * std::cos(x)) * dt) / (1.0 - a * dt);
    }
  }
  return y[0];
}

}  // namespace

TEST_CASE("one backward step with zero driver is a weighted average") {
  const StepOutcomes step = make_step_outcomes(0.25, 1, 2);
  const DriverFn zero = [](double, const Vector&, double, const Vector&, const Vector&,
                           const Vector&, const Vector&) { return 0.0; };
  Vector next(2);
  next << 3.0, 1.0;
  const StepResult r = backward_step(zero, 0.0, Vector::Zero(1), Vector::Zero(1), Vector::Zero(1),
                                     Vector(), next, step, 0.25);
  CHECK(r.y == doctest::Approx(2.0));
  const double expect_z = (0.5 * 3.0 * step.increments(0, 0) + 0.5 * 1.0 * step.increments(0, 1)) / 0.25;
  CHECK(r.z(0) == doctest::Approx(expect_z));
  CHECK(std::abs(r.z(0)) == doctest::Approx(2.0));
}

TEST_CASE("lattice solver matches the binomial linear oracle") {
  const ProblemSpec spec = make_problem("linear-driver");
  const int n = 14;
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, n), 1, 2);
  const Tree tree = lattice_forward(spec, lat, TreeRoot{0, Vector::Constant(1, 0.4), {}, {}},
                                    ControlProcess::constant(0, 0));
  const BsdeSolution sol = solve_lattice(spec, tree, terminal_values(spec, tree));
  const double oracle =
      binomial_linear_oracle(0.4, 0.5, 0.3, 0.2, 0.2, n, [](double x) { return std::cos(x); });
  CHECK(sol.at(0)(0) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(sol.max_residual <= 1e-13);
  CHECK(sol.apriori_ok);
}

TEST_CASE("lattice value converges to the heat solution") {
  const ProblemSpec spec = make_problem("heat-check");
  double prev = INFINITY;
  for (int n : {6, 12}) {
    const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, n), 1, 2);
    const Tree tree = lattice_forward(spec, lat, TreeRoot{0, Vector::Constant(1, 0.3), {}, {}},
                                      ControlProcess::constant(0, 0));
    const double y = solve_lattice(spec, tree, terminal_values(spec, tree)).at(0)(0);
    const double err = std::abs(y - std::exp(-0.5) * std::cos(0.3));
    CHECK(err < prev);
    CHECK(err < 0.02);
    prev = err;
  }
}

TEST_CASE("step size is refused when dt L >= 1") {
  const ProblemSpec spec = make_problem("linear-driver");
  CHECK_THROWS_WITH_AS(check_step_size(spec, TimeGrid(0.0, 1.0, 6)), doctest::Contains("n_steps >= 7"),
                       InvalidArgument);
  CHECK_NOTHROW(check_step_size(spec, TimeGrid(0.0, 1.0, 7)));
}

TEST_CASE("semigroup composes and is the identity on an empty interval") {
  const ProblemSpec spec = make_problem("one-player");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 8), 1, 2);
  const Tree tree = lattice_forward(spec, lat, TreeRoot{0, Vector::Zero(1), {}, {}},
                                    ControlProcess::constant(0, 2));
  const BsdeSolution sol = solve_lattice(spec, tree, terminal_values(spec, tree));
  for (int mid : {1, 4, 7}) {
    const Vector back = semigroup_apply(spec, tree, 0, mid, sol.at(mid));
    CHECK(back(0) == doctest::Approx(sol.at(0)(0)).epsilon(1e-13));
  }
  CHECK((semigroup_apply(spec, tree, 3, 3, sol.at(3)) - sol.at(3)).norm() == 0.0);
}

TEST_CASE("comparison holds for ordered data and is monotone in the terminal") {
  const ProblemSpec spec = make_problem("cancel-drift");
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 10), 1, 2);
  const Tree tree = lattice_forward(spec, lat, TreeRoot{0, Vector::Zero(1), {}, {}},
                                    ControlProcess::constant(1, 3));
  const Vector base = terminal_values(spec, tree);
  const DriverFn g = [](double, const Vector& x, double y, const Vector& z, const Vector&,
                        const Vector&, const Vector&) { return -1.4 * y + 1.2 * z(0) + std::sin(x(0)); };
  const ComparisonResult same = compare_bsde(spec, tree, base, g, base, g);
  CHECK(same.violations == 0);
  CHECK(same.max_excess == doctest::Approx(0.0));
  const ComparisonResult lower = compare_bsde(spec, tree, (base.array() - 0.1).matrix(), g, base, g);
  CHECK(lower.violations == 0);
  CHECK(lower.max_excess < 0.0);
}

TEST_CASE("comparison refuses steps that break monotonicity") {
  const ProblemSpec spec = make_problem("linear-driver");  // L = 6.5
  const NoiseLattice lat = build_lattice(TimeGrid(0.0, 1.0, 8), 1, 2);
  const Tree tree = lattice_forward(spec, lat, TreeRoot{0, Vector::Zero(1), {}, {}},
                                    ControlProcess::constant(0, 0));
  CHECK(monotonicity_index(6.5, lat.increments()) > 1.0);
  const Vector t = terminal_values(spec, tree);
  CHECK_THROWS_AS(compare_bsde(spec, tree, t, spec.f, t, spec.f), InvalidArgument);
}

TEST_CASE("payoff respects the value bound for bounded terminals") {
  for (const char* key : {"pursuit-1d", "isaacs-gap", "random-terminal"}) {
    const ProblemSpec spec = make_problem(key);
    const double j = payoff_J(spec, 0, Vector::Constant(1, 0.5), ControlProcess::constant(0, 0));
    CHECK(std::abs(j) <= spec.L * (spec.horizon + 1.0));
  }
}

TEST_CASE("regression Monte Carlo agrees with the heat solution") {
  const ProblemSpec spec = make_problem("heat-check");
  const TimeGrid g(0.0, 1.0, 10);
  const PathEnsemble ens = sample_paths(g, 1, 20000, 3);
  const StateTrajectory tr = euler_forward(spec, ens, {0, Matrix::Constant(1, 1, 0.3)},
                                           ControlProcess::constant(0, 0));
  Vector term(ens.n_paths);
  for (int p = 0; p < ens.n_paths; ++p) term(p) = std::cos(tr.at(10)(p, 0));
  LsmcOptions opt;
  opt.bootstrap = 30;
  const BsdeSolution sol = solve_lsmc(spec, ens, tr, term, opt);
  CHECK(sol.y0_se > 0.0);
  CHECK(std::abs(sol.y0 - std::exp(-0.5) * std::cos(0.3)) < 4.0 * sol.y0_se + 1e-3);
}

TEST_CASE("regression Monte Carlo refuses too few paths") {
  const ProblemSpec spec = make_problem("heat-check");
  const TimeGrid g(0.0, 1.0, 4);
  const PathEnsemble ens = sample_paths(g, 1, 20, 3);
  const StateTrajectory tr = euler_forward(spec, ens, {0, Matrix::Zero(1, 1)},
                                           ControlProcess::constant(0, 0));
  CHECK_THROWS_AS(solve_lsmc(spec, ens, tr, Vector::Zero(20)), InvalidArgument);
}

TEST_CASE("log-log slope recovers a power law") {
  const std::vector<double> x = {0.1, 0.2, 0.4, 0.8};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.25));
  CHECK(loglog_slope(x, y) == doctest::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("frozen-driver gap shrinks faster than the interval") {
  const ProblemSpec spec = make_problem("pursuit-1d");
  const FreezingGap g = freezing_gap(spec, freezing_test_field(1, 1), Vector::Zero(1),
                                     {0.2, 0.1, 0.05, 0.025}, ControlChoice{1, 0});
  REQUIRE(g.gaps.size() == 4);
  CHECK(g.slope >= 1.0);
  for (std::size_t i = 1; i < g.gaps.size(); ++i) CHECK(g.gaps[i] < g.gaps[i - 1]);
}
