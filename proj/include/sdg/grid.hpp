#pragma once

#include "sdg/types.hpp"

#include <cstdint>
#include <vector>

namespace sdg {

/// Uniform time grid t_k = t0 + k * dt on [t0, T]. The last point is pinned
/// to T rather than accumulated.
class TimeGrid {
 public:
  TimeGrid(double t0, double T, int n_steps);

  double t0() const { return t0_; }
  double horizon() const { return T_; }
  int n_steps() const { return n_steps_; }
  double dt() const { return dt_; }
  double time(int k) const { return k == n_steps_ ? T_ : t0_ + k * dt_; }

 private:
  double t0_;
  double T_;
  int n_steps_;
  double dt_;
};

/// Joint one-step Wiener increment distribution: column j of `increments`
/// occurs with probability prob(j).
struct StepOutcomes {
  Matrix increments;  // m x B
  Vector prob;        // B

  int size() const { return static_cast<int>(prob.size()); }
  int dim() const { return static_cast<int>(increments.rows()); }
  double max_norm() const { return increments.colwise().norm().maxCoeff(); }
};

/// Per-coordinate symmetric scheme: branching 2 gives (+-sqrt(dt), 1/2),
/// branching 3 gives (-sqrt(3dt), 0, +sqrt(3dt)) with (1/6, 2/3, 1/6).
/// Coordinates are independent, so there are branching^m joint outcomes.
StepOutcomes make_step_outcomes(double dt, int m, int branching);

/// Scenario tree over slices [start, n_steps] of a time grid. Nodes of
/// slice k are columns of the per-slice matrices. Children of node i are
/// given by the explicit table when present (recombining lattices) and by
/// i * B + j otherwise (non-recombining trees).
struct Tree {
  TimeGrid grid{0.0, 1.0, 1};
  int start = 0;
  StepOutcomes step;

  std::vector<Matrix> state;             // d x N_k (0 rows for pure-noise lattices)
  std::vector<Matrix> noise;             // m x N_k, cumulative W
  std::vector<Matrix> history;           // h x N_k, W at partition points (stopped)
  std::vector<Vector> weight;            // unconditional probability
  std::vector<IndexVector> parent;       // empty for recombining lattices
  std::vector<Eigen::MatrixXi> children; // B x N_k, empty for implicit indexing
  std::vector<IndexVector> theta_index;  // controls acting on [t_k, t_{k+1})
  std::vector<IndexVector> gamma_index;

  int end() const { return grid.n_steps(); }
  int slice_count() const { return end() - start + 1; }
  int branching() const { return step.size(); }
  long nodes(int k) const { return static_cast<long>(weight[k - start].size()); }
  long total_nodes() const;
  long child(int k, long i, int j) const {
    const auto& table = children[k - start];
    return table.size() ? table(j, i) : i * branching() + j;
  }
  bool has_controls() const { return !theta_index.empty(); }

  const Matrix& states_at(int k) const { return state[k - start]; }
  const Matrix& noise_at(int k) const { return noise[k - start]; }
  const Matrix& history_at(int k) const { return history[k - start]; }
  const Vector& weights_at(int k) const { return weight[k - start]; }
};

/// Recombining discrete-noise lattice. Slice-k nodes are indexed by the
/// per-coordinate multisets of outcome counts, so each coordinate carries
/// C(k + b - 1, b - 1) nodes.
class NoiseLattice {
 public:
  const Tree& tree() const { return tree_; }
  const TimeGrid& time_grid() const { return tree_.grid; }
  int branching() const { return branching_; }
  int dim() const { return m_; }
  const StepOutcomes& increments() const { return tree_.step; }
  long nodes(int k) const { return tree_.nodes(k); }

  /// Outcome counts per coordinate for node i of slice k (m x branching).
  Eigen::MatrixXi counts(int k, long i) const;

  /// Number of multisets of size k drawn from `branching` outcomes, to the power m.
  static long multiset_count(int k, int branching, int m);

 private:
  friend NoiseLattice build_lattice(const TimeGrid&, int, int);

  Tree tree_;
  int branching_ = 2;
  int m_ = 1;
  std::vector<std::vector<std::vector<int>>> per_coordinate_counts_;  // slice -> node -> counts
};

NoiseLattice build_lattice(const TimeGrid& time_grid, int m, int branching);

/// Monte Carlo Brownian increments. dW[k] is n_paths x m; W[k] is the
/// cumulative sum with W[0] = 0.
struct PathEnsemble {
  TimeGrid grid{0.0, 1.0, 1};
  int n_paths = 0;
  int m = 0;
  std::uint64_t seed = 0;
  std::vector<Matrix> dW;
  std::vector<Matrix> W;

  /// Increments restricted to a subset of paths (used by bootstrap resampling).
  PathEnsemble select(const std::vector<int>& rows) const;
};

/// Paths are generated in blocks of `kBlockSize`; block b draws from a
/// Xoshiro256 stream seeded with derive_seed(seed, b).
PathEnsemble sample_paths(const TimeGrid& time_grid, int m, int n_paths, std::uint64_t seed);

inline constexpr int kBlockSize = 1024;

}  // namespace sdg
