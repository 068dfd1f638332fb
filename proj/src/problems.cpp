#include "sdg/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sdg {

std::string to_string(FactSource source) {
  switch (source) {
    case FactSource::by_construction: return "by_construction";
    case FactSource::published_result: return "published_result";
    case FactSource::independent_oracle: return "independent_oracle";
  }
  return "unknown";
}

namespace {

using Label = ControlGrid::Label;

ControlGrid grid_or(int override_count, int count, double lo, double hi, Label label) {
  return ControlGrid::uniform(lo, hi, override_count > 0 ? override_count : count, label);
}

DiffusionFn constant_sigma(double s) {
  return [s](double, const Vector&, const Vector&, const Vector&, const Vector&) {
    return Matrix::Constant(1, 1, s);
  };
}

DriverFn zero_driver() {
  return [](double, const Vector&, double, const Vector&, const Vector&, const Vector&,
            const Vector&) { return 0.0; };
}

ProblemSpec base(const std::string& name, double L) {
  ProblemSpec s;
  s.name = name;
  s.d = 1;
  s.m = 1;
  s.horizon = 1.0;
  s.L = L;
  s.state_free_sigma = true;
  return s;
}

DriftFn sum_drift() {
  return [](double, const Vector&, const Vector& th, const Vector& ga, const Vector&) {
    return (th + ga).eval();
  };
}

ProblemSpec cancel_drift(const ProblemOptions& o) {
  ProblemSpec s = base("cancel-drift", 3.0);
  s.b = sum_drift();
  s.sigma = constant_sigma(1.0);
  s.f = zero_driver();
  s.Phi = [](const Vector& x, const Vector&) { return x(0); };
  s.theta_grid = grid_or(o.theta_points, 5, -1.0, 1.0, Label::theta);
  s.gamma_grid = grid_or(o.gamma_points, 5, -1.0, 1.0, Label::gamma);
  s.bounded_terminal = false;
  return s;
}

ProblemSpec isaacs_gap(const ProblemOptions&) {
  ProblemSpec s = base("isaacs-gap", 2.0);
  s.b = [](double, const Vector&, const Vector& th, const Vector& ga, const Vector&) {
    return Vector::Constant(1, th(0) * ga(0)).eval();
  };
  s.sigma = constant_sigma(1.0);
  s.f = zero_driver();
  s.Phi = [](const Vector& x, const Vector&) { return std::tanh(x(0)); };
  s.theta_grid = ControlGrid::uniform(-1.0, 1.0, 2, Label::theta);
  s.gamma_grid = ControlGrid::uniform(-1.0, 1.0, 2, Label::gamma);
  return s;
}

ProblemSpec isaacs_smooth(const ProblemOptions& o) {
  ProblemSpec s = base("isaacs-smooth", 3.0);
  s.b = sum_drift();
  s.sigma = constant_sigma(1.0);
  s.f = zero_driver();
  s.Phi = [](const Vector& x, const Vector&) { return std::sin(x(0)); };
  s.theta_grid = grid_or(o.theta_points, 3, -1.0, 1.0, Label::theta);
  s.gamma_grid = grid_or(o.gamma_points, 3, -1.0, 1.0, Label::gamma);
  return s;
}

ProblemSpec one_player(const ProblemOptions& o) {
  ProblemSpec s = base("one-player", 2.0);
  s.b = sum_drift();
  s.sigma = constant_sigma(1.0);
  s.f = [](double, const Vector& x, double, const Vector&, const Vector&, const Vector&,
           const Vector&) { return 0.2 * std::sin(x(0)); };
  s.Phi = [](const Vector& x, const Vector&) { return std::sin(x(0)); };
  s.theta_grid = ControlGrid::singleton(Vector::Zero(1), Label::theta);
  s.gamma_grid = grid_or(o.gamma_points, 3, -1.0, 1.0, Label::gamma);
  return s;
}

ProblemSpec linear_driver(const ProblemOptions&) {
  // |f| <= 0.3 * 10 + 0.2 * 10 + 0.2 on the validation box, plus |(b, sigma)| ~ 1.12.
  ProblemSpec s = base("linear-driver", 6.5);
  s.b = [](double, const Vector&, const Vector&, const Vector&, const Vector&) {
    return Vector::Constant(1, 0.5).eval();
  };
  s.sigma = constant_sigma(1.0);
  s.f = [](double, const Vector& x, double y, const Vector& z, const Vector&, const Vector&,
           const Vector&) { return 0.3 * y + 0.2 * z(0) + 0.2 * std::cos(x(0)); };
  s.Phi = [](const Vector& x, const Vector&) { return std::cos(x(0)); };
  s.theta_grid = ControlGrid::singleton(Vector::Zero(1), Label::theta);
  s.gamma_grid = ControlGrid::singleton(Vector::Zero(1), Label::gamma);
  return s;
}

ProblemSpec random_terminal(const ProblemOptions& o) {
  ProblemSpec s = base("random-terminal", 2.0);
  s.b = sum_drift();
  s.sigma = constant_sigma(1.0);
  s.f = zero_driver();
  s.Phi = [](const Vector& x, const Vector& hist) { return std::tanh(x(0) + 0.5 * hist(0)); };
  s.theta_grid = grid_or(o.theta_points, 3, -0.5, 0.5, Label::theta);
  s.gamma_grid = grid_or(o.gamma_points, 3, -0.5, 0.5, Label::gamma);
  s.randomness = Randomness::discrete_random;
  s.partition = {1.0};
  return s;
}

ProblemSpec heat_check(const ProblemOptions&) {
  ProblemSpec s = base("heat-check", 1.5);
  s.b = [](double, const Vector&, const Vector&, const Vector&, const Vector&) {
    return Vector::Zero(1).eval();
  };
  s.sigma = constant_sigma(1.0);
  s.f = zero_driver();
  s.Phi = [](const Vector& x, const Vector&) { return std::cos(x(0)); };
  s.theta_grid = ControlGrid::singleton(Vector::Zero(1), Label::theta);
  s.gamma_grid = ControlGrid::singleton(Vector::Zero(1), Label::gamma);
  return s;
}

ProblemSpec pursuit(const ProblemOptions&) {
  ProblemSpec s = base("pursuit-1d", 2.0);
  s.b = [](double, const Vector& x, const Vector& th, const Vector& ga, const Vector&) {
    return Vector::Constant(1, std::sin(x(0)) * th(0) + 0.5 * ga(0)).eval();
  };
  s.sigma = constant_sigma(1.0);
  s.f = [](double, const Vector& x, double, const Vector&, const Vector&, const Vector&,
           const Vector&) { return 0.1 * std::cos(x(0)); };
  s.Phi = [](const Vector& x, const Vector&) { return std::tanh(x(0)); };
  s.theta_grid = ControlGrid::uniform(-1.0, 1.0, 2, Label::theta);
  s.gamma_grid = ControlGrid::uniform(-1.0, 1.0, 2, Label::gamma);
  return s;
}

ProblemSpec clipped_cancel(const ProblemOptions& o) {
  ProblemSpec s = base("clipped-cancel", 1.0);
  s.b = sum_drift();
  s.sigma = constant_sigma(0.8);
  s.f = zero_driver();
  s.Phi = [](const Vector& x, const Vector&) { return std::clamp(x(0), -1.0, 1.0); };
  s.theta_grid = grid_or(o.theta_points, 3, -0.25, 0.25, Label::theta);
  s.gamma_grid = grid_or(o.gamma_points, 3, -0.25, 0.25, Label::gamma);
  return s;
}

std::vector<NamedProblem> build_catalog() {
  using F = FactSource;
  const double e_half = std::exp(-0.5);
  return {
      {"cancel-drift", "b = theta + gamma, sigma = 1, f = 0, Phi(x) = x; optimal drifts cancel",
       cancel_drift, true,
       {{"max |V(t,x) - x|", 0.0, 1e-10, F::independent_oracle, "per-step cancellation plus martingale"},
        {"max |V - U|", 0.0, 1e-10, F::independent_oracle, "separable Hamiltonian"}}},
      {"isaacs-gap", "b = theta * gamma on {-1, 1}^2; Hamiltonians differ", isaacs_gap, false,
       {{"H_minus at p = 1", -1.0, 0.0, F::independent_oracle, "enumeration of 4 control pairs"},
        {"H_plus at p = 1", 1.0, 0.0, F::independent_oracle, "enumeration of 4 control pairs"},
        {"value bound", 4.0, 0.0, F::published_result, "|V| <= L(T+1)"}}},
      {"isaacs-smooth", "b = theta + gamma, Phi = sin; game value exists", isaacs_smooth, true,
       {{"value bound", 6.0, 0.0, F::published_result, "|V| <= L(T+1)"}}},
      {"one-player", "singleton theta grid; lower value is a pure minimisation", one_player, true,
       {{"value bound", 4.0, 0.0, F::published_result, "|V| <= L(T+1)"}}},
      {"linear-driver", "b = 0.5, sigma = 1, f = 0.3 y + 0.2 z + 0.2 cos x, Phi = cos",
       linear_driver, true,
       {{"value bound", 13.0, 0.0, F::published_result, "|V| <= L(T+1)"}}},
      {"random-terminal", "Phi = tanh(x + 0.5 W_T) through the noise history", random_terminal,
       true, {{"value bound", 4.0, 0.0, F::published_result, "|V| <= L(T+1)"}}},
      {"heat-check", "b = 0, sigma = 1, Phi = cos, f = 0", heat_check, true,
       {{"u(0, 0)", e_half, 2e-3, F::independent_oracle, "heat kernel: exp(-(T-t)/2) cos x"}}},
      {"pursuit-1d", "b = sin(x) theta + 0.5 gamma, f = 0.1 cos x, Phi = tanh", pursuit, true,
       {{"value bound", 4.0, 0.0, F::published_result, "|V| <= L(T+1)"}}},
      {"clipped-cancel", "b = theta + gamma on a small grid, sigma = 0.8, Phi = clip(x)",
       clipped_cancel, true,
       {{"value bound", 2.0, 0.0, F::published_result, "|V| <= L(T+1)"},
        {"Lipschitz(Phi)", 1.0, 0.0, F::by_construction, "clip has slope 1"}}},
  };
}

}  // namespace

NamedProblem inline_problem(const InlineCoefficients& c) {
  static const std::vector<std::string> terminals = {"tanh", "sin", "cos", "clip", "identity"};
  require(std::find(terminals.begin(), terminals.end(), c.terminal) != terminals.end(),
          "unknown inline terminal '" + c.terminal + "'");
  require(c.theta_points >= 1 && c.gamma_points >= 1, "inline control grids need points");
  require(c.horizon > 0.0 && c.sigma != 0.0, "inline problem needs T > 0 and sigma != 0");
  const double th = std::max(std::abs(c.theta_lo), std::abs(c.theta_hi));
  const double ga = std::max(std::abs(c.gamma_lo), std::abs(c.gamma_hi));
  const double drift_sup = std::abs(c.drift_const) + std::abs(c.drift_theta) * th +
                           std::abs(c.drift_gamma) * ga + std::abs(c.drift_cross) * th * ga +
                           std::abs(c.drift_sin);
  // The probe box of validate_a1 is [-10, 10] in y and z.
  const double driver_sup = 10.0 * (std::abs(c.driver_y) + std::abs(c.driver_z)) + std::abs(c.driver_cos);
  const double auto_L = std::max(1.0, drift_sup + std::abs(c.sigma) + driver_sup);

  NamedProblem p;
  p.key = "inline";
  p.summary = "coefficients from the config file";
  p.isaacs_expected = c.drift_cross == 0.0;
  p.make = [c, auto_L](const ProblemOptions&) {
    ProblemSpec s = base("inline", c.lipschitz > 0.0 ? c.lipschitz : auto_L);
    s.horizon = c.horizon;
    s.b = [c](double, const Vector& x, const Vector& t, const Vector& g, const Vector&) {
      return Vector::Constant(1, c.drift_const + c.drift_theta * t(0) + c.drift_gamma * g(0) +
                                     c.drift_cross * t(0) * g(0) + c.drift_sin * std::sin(x(0)))
          .eval();
    };
    s.sigma = constant_sigma(c.sigma);
    s.f = [c](double, const Vector& x, double y, const Vector& z, const Vector&, const Vector&,
              const Vector&) { return c.driver_y * y + c.driver_z * z(0) + c.driver_cos * std::cos(x(0)); };
    const std::string kind = c.terminal;
    s.Phi = [kind](const Vector& x, const Vector&) {
      const double v = x(0);
      if (kind == "tanh") return std::tanh(v);
      if (kind == "sin") return std::sin(v);
      if (kind == "cos") return std::cos(v);
      if (kind == "clip") return std::clamp(v, -1.0, 1.0);
      return v;
    };
    s.bounded_terminal = kind != "identity";
    s.theta_grid = ControlGrid::uniform(c.theta_lo, c.theta_hi, c.theta_points, Label::theta);
    s.gamma_grid = ControlGrid::uniform(c.gamma_lo, c.gamma_hi, c.gamma_points, Label::gamma);
    return s;
  };
  return p;
}

const std::vector<NamedProblem>& catalog() {
  static const std::vector<NamedProblem> problems = build_catalog();
  return problems;
}

const NamedProblem& find_problem(const std::string& key) {
  for (const auto& p : catalog())
    if (p.key == key) return p;
  throw InvalidArgument("unknown problem '" + key + "'");
}

ProblemSpec make_problem(const std::string& key, const ProblemOptions& options) {
  return find_problem(key).make(options);
}

HamiltonianPoint unit_gradient_point(const ProblemSpec& spec) {
  HamiltonianPoint pt;
  pt.x = Vector::Zero(spec.d);
  pt.A = Matrix::Zero(spec.d, spec.d);
  pt.B = Matrix::Zero(spec.m, spec.d);
  pt.p = Vector::Unit(spec.d, 0);
  pt.z = Vector::Zero(spec.m);
  pt.hist = Vector::Zero(spec.history_size());
  return pt;
}

TestField freezing_test_field(int d, int m) {
  return TestField::markovian(
      [](double, const Vector& x) { return std::sin(x(0) + 0.3); },
      [d](double, const Vector& x) {
        Vector g = Vector::Zero(d);
        g(0) = std::cos(x(0) + 0.3);
        return g;
      },
      [d](double, const Vector& x) {
        Matrix h = Matrix::Zero(d, d);
        h(0, 0) = -std::sin(x(0) + 0.3);
        return h;
      },
      [](double, const Vector&) { return 0.0; }, m);
}

std::vector<TraceRow> read_traceability(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open traceability matrix " + path);
  std::vector<TraceRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') {
        quoted = !quoted;
      } else if (c == ',' && !quoted) {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += c;
      }
    }
    cells.push_back(cell);
    require(cells.size() == 4, "traceability row must have 4 cells: " + line);
    rows.push_back({cells[0], cells[1], cells[2], cells[3]});
  }
  return rows;
}

const std::vector<std::string>& required_anchors() {
  static const std::vector<std::string> anchors = {
      "controlled-state-equation", "payoff-bsde",           "lower-upper-value",
      "pointwise-hamiltonians",    "mollifier-and-barrier", "coefficient-approximation",
      "state-estimates",           "bsde-estimates",        "value-bound-and-lipschitz",
      "payoff-equals-bsde",        "backward-semigroup",    "value-continuity",
      "dynamic-programming",       "epsilon-optimal-pairs", "sublinear-functionals",
      "sublinear-representation",  "sublinear-domination",  "freezing-drivers",
      "auxiliary-bsde-estimates",  "isaacs-condition",      "game-value-existence",
      "markovian-hjbi",            "measurable-selection",  "bsde-comparison",
      "coefficient-stability",     "sub-super-comparison",
  };
  return anchors;
}

}  // namespace sdg
