#pragma once

#include "sdg/grid.hpp"
#include "sdg/problem.hpp"

#include <functional>

namespace sdg {

struct ControlChoice {
  int theta = 0;  // index into the theta grid
  int gamma = 0;  // index into the gamma grid
};

/// Grid-valued adapted controls. Open-loop controls fix a grid index per
/// (path, step); feedback controls read (step, state, noise history) only,
/// which makes them predictable: the choice on [t_k, t_{k+1}) uses
/// information up to t_k.
struct ControlProcess {
  using Feedback = std::function<ControlChoice(int k, const Vector& x, const Vector& hist)>;
  enum class Kind { open_loop, feedback };

  Kind kind = Kind::feedback;
  Eigen::MatrixXi theta;  // n_paths x n_steps
  Eigen::MatrixXi gamma;
  Feedback feedback;

  static ControlProcess constant(int theta_index, int gamma_index);
  static ControlProcess open_loop(Eigen::MatrixXi theta, Eigen::MatrixXi gamma);
  static ControlProcess from_feedback(Feedback fn);

  ControlChoice at(long path, int k, const Vector& x, const Vector& hist) const;
  void check(const ProblemSpec& spec) const;
};

/// Euler-Maruyama states per slice: X[k - start] is n_paths x d.
struct StateTrajectory {
  TimeGrid grid{0.0, 1.0, 1};
  int start = 0;
  std::vector<Matrix> X;
  std::vector<Matrix> hist;          // n_paths x h per slice
  std::vector<Eigen::MatrixXi> ctrl; // n_paths x 2 per step (theta, gamma index)

  const Matrix& at(int k) const { return X[k - start]; }
};

/// Initial condition: a single deterministic state or one state per path.
struct InitialState {
  int slice = 0;
  Matrix states;  // 1 x d (broadcast) or n_paths x d
};

StateTrajectory euler_forward(const ProblemSpec& spec, const PathEnsemble& ens,
                              const InitialState& start, const ControlProcess& controls);

struct TreeRoot {
  int slice = 0;
  Vector x;
  Vector w;     // cumulative noise at the root (default 0)
  Vector hist;  // stopped history at the root (default from w)
};

inline constexpr long kDefaultNodeBudget = 2'000'000;

/// Full non-recombining tree of Euler states driven by the lattice
/// increments. Each node stores state, probability weight and parent.
Tree lattice_forward(const ProblemSpec& spec, const NoiseLattice& lat, const TreeRoot& root,
                     const ControlProcess& controls, long node_budget = kDefaultNodeBudget);

/// max over leaves |X^{r,x}_T - X^{t, X^{r,x}_t}_T| with the second tree
/// restarted at every slice-t node.
double check_flow_property(const ProblemSpec& spec, const NoiseLattice& lat, int r, int t,
                           const Vector& x, const ControlProcess& controls);

struct MomentQuery {
  int start = 0;
  Vector xi;
  Vector xi_hat;
  int p = 2;
  int t_slice = 0;  // increment moment E|X_s - X_t|^p between these slices
  int s_slice = 0;
};

struct MomentEstimates {
  double sup_moment = 0.0;        // E max_l |X_l|^p
  double increment_moment = 0.0;  // E |X_s - X_t|^p
  double sensitivity = 0.0;       // E max_l |X_l - Xhat_l|^p
};

MomentEstimates moment_estimates(const ProblemSpec& spec, const PathEnsemble& ens,
                                 const MomentQuery& query, const ControlProcess& controls);

}  // namespace sdg
