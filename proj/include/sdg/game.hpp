#pragma once

#include "sdg/bsde.hpp"
#include "sdg/grid.hpp"
#include "sdg/problem.hpp"
#include "sdg/sde.hpp"

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

namespace sdg {

enum class Side { lower, upper };

/// Lookup of states (x, hist) within one slice. Keys are quantised to
/// kStateQuantum; lookups also probe neighbouring cells so values that
/// differ by rounding land on the same node.
class StateIndex {
 public:
  static constexpr double kStateQuantum = 1e-9;

  long find(const Vector& key) const;
  long insert(const Vector& key, long index);  // returns the existing index if present
  long nearest(const Vector& key) const;       // closest stored key in Euclidean distance
  void finalize();                             // builds the nearest-neighbour order

 private:
  struct Hash {
    std::size_t operator()(const std::vector<long long>& v) const;
  };
  std::unordered_map<std::vector<long long>, long, Hash> cells_;
  std::vector<Vector> keys_;
  std::vector<std::pair<double, long>> order_;  // sorted by first key coordinate
};

/// Reachable game states from a root. Children of node i are listed per
/// control pair p = theta * |Gamma| + gamma and outcome j at row p * B + j.
/// States reached by different moves are merged, so the node count grows
/// with the number of distinct reachable states rather than move sequences.
struct GameTree {
  TimeGrid grid{0.0, 1.0, 1};
  int start = 0;
  StepOutcomes step;
  int theta_count = 1;
  int gamma_count = 1;
  std::vector<Matrix> state;             // d x N
  std::vector<Matrix> noise;             // m x N (one representative per merged node)
  std::vector<Matrix> history;           // h x N
  std::vector<Eigen::MatrixXi> children; // (pairs * B) x N
  std::vector<StateIndex> index;

  int end() const { return grid.n_steps(); }
  int pairs() const { return theta_count * gamma_count; }
  long nodes(int k) const { return state[k - start].cols(); }
  long total_nodes() const;
  long child(int k, long i, int theta, int gamma, int j) const {
    return children[k - start]((theta * gamma_count + gamma) * step.size() + j, i);
  }
  Vector key(int k, long i) const;
  long find(int k, const Vector& x, const Vector& hist) const;
  long nearest(int k, const Vector& x, const Vector& hist) const;
};

/// Expands all states reachable from the root under every grid control pair.
GameTree expand_game(const ProblemSpec& spec, const NoiseLattice& lat, const TreeRoot& root,
                     long node_budget = kDefaultNodeBudget);

std::uint64_t lattice_fingerprint(const NoiseLattice& lat);

struct ValueField {
  Side side = Side::lower;
  std::shared_ptr<const GameTree> tree;
  std::vector<Vector> values;             // per slice
  std::vector<IndexVector> outer;         // lower: theta*, upper: gamma*
  std::vector<Eigen::MatrixXi> response;  // lower: gamma*(theta), upper: theta*(gamma)
  std::uint64_t spec_hash = 0;
  std::uint64_t lattice_hash = 0;
  double max_residual = 0.0;
  bool bound_ok = true;  // |V| <= L(T+1) when the terminal data is bounded

  int start() const { return tree->start; }
  int end() const { return tree->end(); }
  const Vector& at(int k) const { return values[k - tree->start]; }
  double root_value() const { return values.front()(0); }

  /// Equilibrium pair at a node.
  ControlChoice choice(int k, long i) const;
  /// Pair when the side that moves first plays `own` and the other responds.
  ControlChoice respond(int k, long i, int own) const;
};

/// Lower value: max over theta of min over gamma of the one-step BSDE
/// operator applied to the next slice; upper value swaps the order.
ValueField solve_value(const ProblemSpec& spec, const NoiseLattice& lat, Side side,
                       const std::shared_ptr<const GameTree>& tree);
ValueField solve_value(const ProblemSpec& spec, const NoiseLattice& lat, Side side,
                       const TreeRoot& root, long node_budget = kDefaultNodeBudget);

/// Value of the control problem where one player picks both controls:
/// maximise = true gives max over pairs, false min over pairs.
std::vector<Vector> single_agent_values(const ProblemSpec& spec, const GameTree& tree,
                                        bool maximise);

/// max |V - U| over nodes of a shared tree.
double value_gap(const ValueField& lower, const ValueField& upper);

enum class DppMode { enumeration, expansion, recursion };

struct DppReport {
  double residual = 0.0;
  DppMode mode = DppMode::recursion;
  long roots = 0;
  long evaluations = 0;  // inner-game solves (enumeration) or node visits (expansion)
};

/// Residual between V at slice j and the multi-step game between slices j
/// and k with terminal data V_k. In enumeration mode the inner game is
/// solved by brute force over nonanticipative strategies of the player who
/// moves second against every control process of the other. Past that
/// budget an explicit minimax over the unmerged tree is used (up to ten
/// times the budget in node visits, fewer roots if needed), and past that
/// the one-step recursion is replayed on the merged tree.
DppReport dpp_residual(const ProblemSpec& spec, const ValueField& field, const NoiseLattice& lat,
                       int j, int k, long enumeration_budget = 2'000'000, int max_roots = 16);

struct StrategyProfile {
  ValueField field;
  double epsilon = 0.0;  // max |J - V| over the evaluation tree

  /// Equilibrium feedback read from the field (nearest stored state).
  ControlProcess::Feedback equilibrium() const;
  /// The first mover plays the fixed index `own`; the other responds from the field.
  ControlProcess::Feedback deviation(int own) const;
  /// The second mover plays the fixed index `other`; the first mover follows the field.
  ControlProcess::Feedback counter_deviation(int other) const;
};

/// Greedy profile from the stored optimisers, evaluated with the lattice
/// BSDE solver over the whole tree rooted at the field's root.
StrategyProfile extract_epsilon_optimal(const ProblemSpec& spec, const ValueField& field,
                                        const NoiseLattice& lat);

struct DeviationReport {
  long nodes_tested = 0;
  long profitable = 0;    // deviations that beat V by more than 1e-10
  double max_gain = 0.0;  // largest improvement for the deviating player
};

/// Unilateral deviations from random nodes: the first mover switches to a
/// fixed control (the other still responds), and the second mover switches
/// to a fixed control against the first mover's field policy.
DeviationReport deviation_test(const ProblemSpec& spec, const StrategyProfile& profile,
                               const NoiseLattice& lat, int count, std::uint64_t seed);

struct PolicyMcReport {
  double value_mc = 0.0;
  double se = 0.0;
  double value_lattice = 0.0;
  bool within = false;  // |difference| <= 3 se
};

/// Simulates the equilibrium profile with Euler paths and evaluates the
/// payoff by regression (bootstrap standard error).
PolicyMcReport policy_mc_check(const ProblemSpec& spec, const StrategyProfile& profile,
                               int n_paths, std::uint64_t seed, int bootstrap = 100);

struct RegularityReport {
  double sup_bound = 0.0;      // max |V| over all solved nodes
  double lipschitz = 0.0;      // max spatial quotient over consecutive probes
  double time_modulus = 0.0;   // max |V(t_k, x) - V(t_{k+1}, x)| / sqrt(dt)
  bool bound_ok = true;
};

RegularityReport regularity_suite(const ProblemSpec& spec, Side side,
                                  const std::vector<Vector>& probes, int n_steps,
                                  int branching = 2, bool time_continuity = true);

struct StabilityReport {
  std::vector<double> eps;
  std::vector<double> drift;
  double slope = 0.0;  // fitted over eps > 0
};

/// Perturbs b -> b + eps b_extra and f -> f + eps f_extra and records
/// max over probes of |V_eps(0, x) - V_0(0, x)|.
StabilityReport stability_suite(const ProblemSpec& spec, const std::vector<double>& eps,
                                const DriftFn& b_extra, const DriverFn& f_extra,
                                const std::vector<Vector>& probes, int n_steps, Side side,
                                int branching = 2);

}  // namespace sdg
