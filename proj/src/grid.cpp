#include "sdg/grid.hpp"

#include "sdg/parallel.hpp"
#include "sdg/random.hpp"

#include <cmath>
#include <map>

namespace sdg {

TimeGrid::TimeGrid(double t0, double T, int n_steps) : t0_(t0), T_(T), n_steps_(n_steps) {
  require(n_steps >= 1, "time grid needs n_steps >= 1");
  require(t0 >= 0.0 && T > t0, "time grid needs 0 <= t0 < T");
  dt_ = (T - t0) / n_steps;
}

StepOutcomes make_step_outcomes(double dt, int m, int branching) {
  require(branching == 2 || branching == 3, "branching must be 2 or 3");
  require(m >= 1, "Wiener dimension must be >= 1");
  Vector values(branching), probs(branching);
  if (branching == 2) {
    const double s = std::sqrt(dt);
    values << s, -s;
    probs << 0.5, 0.5;
  } else {
    const double s = std::sqrt(3.0 * dt);
    values << -s, 0.0, s;
    probs << 1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0;
  }
  long total = 1;
  for (int c = 0; c < m; ++c) total *= branching;
  StepOutcomes out;
  out.increments.resize(m, total);
  out.prob.resize(total);
  for (long j = 0; j < total; ++j) {
    long rest = j;
    double p = 1.0;
    for (int c = 0; c < m; ++c) {
      const int digit = static_cast<int>(rest % branching);
      rest /= branching;
      out.increments(c, j) = values(digit);
      p *= probs(digit);
    }
    out.prob(j) = p;
  }
  return out;
}

long Tree::total_nodes() const {
  long n = 0;
  for (const auto& w : weight) n += w.size();
  return n;
}

long NoiseLattice::multiset_count(int k, int branching, int m) {
  // C(k + b - 1, b - 1)
  long per = 1;
  for (int i = 1; i < branching; ++i) per = per * (k + i) / i;
  long total = 1;
  for (int c = 0; c < m; ++c) total *= per;
  return total;
}

Eigen::MatrixXi NoiseLattice::counts(int k, long i) const {
  const auto& slice = per_coordinate_counts_[k];
  const long per = static_cast<long>(slice.size());
  Eigen::MatrixXi out(m_, branching_);
  long rest = i;
  for (int c = 0; c < m_; ++c) {
    const auto& cnt = slice[rest % per];
    rest /= per;
    for (int j = 0; j < branching_; ++j) out(c, j) = cnt[j];
  }
  return out;
}

namespace {

// All count vectors of length b summing to k, in a fixed order.
std::vector<std::vector<int>> compositions(int k, int b) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(b, 0);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == b - 1) {
      cur[pos] = left;
      out.push_back(cur);
      return;
    }
    for (int c = left; c >= 0; --c) {
      cur[pos] = c;
      self(self, pos + 1, left - c);
    }
  };
  rec(rec, 0, k);
  return out;
}

}  // namespace

NoiseLattice build_lattice(const TimeGrid& time_grid, int m, int branching) {
  require(branching == 2 || branching == 3, "branching must be 2 or 3");
  require(m >= 1, "Wiener dimension must be >= 1");
  const int n = time_grid.n_steps();

  NoiseLattice lat;
  lat.branching_ = branching;
  lat.m_ = m;
  Tree& tree = lat.tree_;
  tree.grid = time_grid;
  tree.start = 0;
  tree.step = make_step_outcomes(time_grid.dt(), m, branching);

  // Scalar outcome values per coordinate, in digit order.
  Vector values(branching);
  for (int j = 0; j < branching; ++j) values(j) = tree.step.increments(0, j);

  lat.per_coordinate_counts_.resize(n + 1);
  std::vector<std::map<std::vector<int>, long>> lookup(n + 1);
  for (int k = 0; k <= n; ++k) {
    lat.per_coordinate_counts_[k] = compositions(k, branching);
    for (long i = 0; i < static_cast<long>(lat.per_coordinate_counts_[k].size()); ++i) {
      lookup[k][lat.per_coordinate_counts_[k][i]] = i;
    }
  }

  const int B = tree.step.size();
  tree.state.resize(n + 1);
  tree.noise.resize(n + 1);
  tree.history.resize(n + 1);
  tree.weight.resize(n + 1);
  tree.children.resize(n + 1);
  for (int k = 0; k <= n; ++k) {
    const long per = static_cast<long>(lat.per_coordinate_counts_[k].size());
    long count = 1;
    for (int c = 0; c < m; ++c) count *= per;
    tree.state[k].resize(0, count);
    tree.history[k].resize(0, count);
    tree.noise[k].resize(m, count);
    tree.weight[k] = Vector::Zero(count);
    for (long i = 0; i < count; ++i) {
      long rest = i;
      for (int c = 0; c < m; ++c) {
        const auto& cnt = lat.per_coordinate_counts_[k][rest % per];
        rest /= per;
        double w = 0.0;
        for (int j = 0; j < branching; ++j) w += cnt[j] * values(j);
        tree.noise[k](c, i) = w;
      }
    }
  }
  tree.weight[0](0) = 1.0;

  for (int k = 0; k < n; ++k) {
    const long per = static_cast<long>(lat.per_coordinate_counts_[k].size());
    const long per_next = static_cast<long>(lat.per_coordinate_counts_[k + 1].size());
    const long count = tree.weight[k].size();
    tree.children[k].resize(B, count);
    for (long i = 0; i < count; ++i) {
      for (int j = 0; j < B; ++j) {
        long rest_i = i;
        long rest_j = j;
        long child = 0;
        long radix = 1;
        for (int c = 0; c < m; ++c) {
          std::vector<int> cnt = lat.per_coordinate_counts_[k][rest_i % per];
          rest_i /= per;
          cnt[rest_j % branching] += 1;
          rest_j /= branching;
          child += lookup[k + 1].at(cnt) * radix;
          radix *= per_next;
        }
        tree.children[k](j, i) = static_cast<int>(child);
        tree.weight[k + 1](child) += tree.weight[k](i) * tree.step.prob(j);
      }
    }
  }
  return lat;
}

PathEnsemble PathEnsemble::select(const std::vector<int>& rows) const {
  PathEnsemble out;
  out.grid = grid;
  out.n_paths = static_cast<int>(rows.size());
  out.m = m;
  out.seed = seed;
  out.dW.resize(dW.size());
  out.W.resize(W.size());
  for (std::size_t k = 0; k < dW.size(); ++k) out.dW[k] = dW[k](rows, Eigen::all);
  for (std::size_t k = 0; k < W.size(); ++k) out.W[k] = W[k](rows, Eigen::all);
  return out;
}

PathEnsemble sample_paths(const TimeGrid& time_grid, int m, int n_paths, std::uint64_t seed) {
  require(n_paths >= 1, "n_paths must be >= 1");
  require(m >= 1, "Wiener dimension must be >= 1");
  const int n = time_grid.n_steps();
  const double sd = std::sqrt(time_grid.dt());

  PathEnsemble ens;
  ens.grid = time_grid;
  ens.n_paths = n_paths;
  ens.m = m;
  ens.seed = seed;
  ens.dW.assign(n, Matrix(n_paths, m));

  const long blocks = (n_paths + kBlockSize - 1) / kBlockSize;
  parallel_for(blocks, [&](long b) {
    Xoshiro256 rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    const long lo = b * kBlockSize;
    const long hi = std::min<long>(n_paths, lo + kBlockSize);
    for (long p = lo; p < hi; ++p)
      for (int k = 0; k < n; ++k)
        for (int c = 0; c < m; ++c) ens.dW[k](p, c) = sd * rng.normal();
  });

  ens.W.resize(n + 1);
  ens.W[0] = Matrix::Zero(n_paths, m);
  for (int k = 0; k < n; ++k) ens.W[k + 1] = ens.W[k] + ens.dW[k];
  return ens;
}

}  // namespace sdg
