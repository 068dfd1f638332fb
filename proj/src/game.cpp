#include "sdg/game.hpp"

#include "sdg/hamiltonian.hpp"
#include "sdg/parallel.hpp"
#include "sdg/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace sdg {

namespace {

std::vector<long long> quantise(const Vector& key) {
  std::vector<long long> q(key.size());
  for (Eigen::Index i = 0; i < key.size(); ++i)
    q[i] = std::llround(key(i) / StateIndex::kStateQuantum);
  return q;
}

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace

std::size_t StateIndex::Hash::operator()(const std::vector<long long>& v) const {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (long long x : v) {
    std::uint64_t s = h ^ static_cast<std::uint64_t>(x);
    h = splitmix64(s);
  }
  return static_cast<std::size_t>(h);
}

long StateIndex::find(const Vector& key) const {
  const auto q = quantise(key);
  if (auto it = cells_.find(q); it != cells_.end()) return it->second;
  const int dim = static_cast<int>(q.size());
  if (dim > 8) return -1;
  int combos = 1;
  for (int i = 0; i < dim; ++i) combos *= 3;
  auto probe = q;
  for (int c = 0; c < combos; ++c) {
    int code = c;
    for (int i = 0; i < dim; ++i) {
      probe[i] = q[i] + (code % 3) - 1;
      code /= 3;
    }
    if (auto it = cells_.find(probe); it != cells_.end()) {
      if ((keys_[it->second] - key).cwiseAbs().maxCoeff() <= kStateQuantum) return it->second;
    }
  }
  return -1;
}

long StateIndex::insert(const Vector& key, long index) {
  if (const long found = find(key); found >= 0) return found;
  cells_.emplace(quantise(key), index);
  if (static_cast<long>(keys_.size()) <= index) keys_.resize(index + 1);
  keys_[index] = key;
  return index;
}

void StateIndex::finalize() {
  order_.clear();
  order_.reserve(keys_.size());
  for (std::size_t i = 0; i < keys_.size(); ++i)
    order_.emplace_back(keys_[i].size() ? keys_[i](0) : 0.0, static_cast<long>(i));
  std::sort(order_.begin(), order_.end());
}

long StateIndex::nearest(const Vector& key) const {
  if (const long found = find(key); found >= 0) return found;
  require(!order_.empty(), "nearest lookup on an empty slice");
  const double first = key.size() ? key(0) : 0.0;
  const auto pivot = std::lower_bound(order_.begin(), order_.end(),
                                      std::make_pair(first, std::numeric_limits<long>::min()));
  long best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  auto consider = [&](const std::pair<double, long>& entry) {
    const double d = (keys_[entry.second] - key).squaredNorm();
    if (d < best_dist || (d == best_dist && entry.second < best)) {
      best_dist = d;
      best = entry.second;
    }
  };
  for (auto it = pivot; it != order_.end(); ++it) {
    const double gap = it->first - first;
    if (gap * gap > best_dist) break;
    consider(*it);
  }
  for (auto it = pivot; it != order_.begin();) {
    --it;
    const double gap = first - it->first;
    if (gap * gap > best_dist) break;
    consider(*it);
  }
  return best;
}

long GameTree::total_nodes() const {
  long total = 0;
  for (const auto& s : state) total += s.cols();
  return total;
}

Vector GameTree::key(int k, long i) const {
  return concat(state[k - start].col(i), history[k - start].col(i));
}

long GameTree::find(int k, const Vector& x, const Vector& hist) const {
  return index[k - start].find(concat(x, hist));
}

long GameTree::nearest(int k, const Vector& x, const Vector& hist) const {
  return index[k - start].nearest(concat(x, hist));
}

GameTree expand_game(const ProblemSpec& spec, const NoiseLattice& lat, const TreeRoot& root,
                     long node_budget) {
  spec.check();
  require(lat.dim() == spec.m, "lattice Wiener dimension does not match the problem");
  require(root.x.size() == spec.d, "root state dimension does not match the problem");
  const TimeGrid& grid = lat.time_grid();
  const int n = grid.n_steps();
  const int r = root.slice;
  require(r >= 0 && r <= n, "root slice outside the time grid");

  GameTree tree;
  tree.grid = grid;
  tree.start = r;
  tree.step = lat.increments();
  tree.theta_count = spec.theta_grid.size();
  tree.gamma_count = spec.gamma_grid.size();
  const int S = n - r + 1;
  tree.state.resize(S);
  tree.noise.resize(S);
  tree.history.resize(S);
  tree.children.resize(S);
  tree.index.resize(S);

  const Vector w0 = root.w.size() ? root.w : Vector::Zero(spec.m);
  const Vector h0 = root.hist.size() ? root.hist : spec.initial_history(w0);
  tree.state[0] = root.x;
  tree.noise[0] = w0;
  tree.history[0] = h0;
  tree.index[0].insert(concat(root.x, h0), 0);

  const int B = tree.step.size();
  const int P = tree.pairs();
  const double dt = grid.dt();
  long total = 1;
  for (int k = r; k < n; ++k) {
    const int s = k - r;
    const long N = tree.state[s].cols();
    const double t = grid.time(k);
    const double t_next = grid.time(k + 1);
    std::vector<Vector> xs, ws, hs;
    Eigen::MatrixXi kids(P * B, N);
    for (long i = 0; i < N; ++i) {
      const Vector x = tree.state[s].col(i);
      const Vector w = tree.noise[s].col(i);
      const Vector hist = tree.history[s].col(i);
      for (int a = 0; a < tree.theta_count; ++a) {
        const Vector th = spec.theta_grid.point(a);
        for (int c = 0; c < tree.gamma_count; ++c) {
          const Vector ga = spec.gamma_grid.point(c);
          const Vector drift = spec.b(t, x, th, ga, hist);
          const Matrix vol = spec.sigma(t, x, th, ga, hist);
          if (!drift.allFinite() || !vol.allFinite())
            throw NumericalError("non-finite coefficient at slice " + std::to_string(k) +
                                 ", node " + std::to_string(i));
          const Vector base = x + drift * dt;
          for (int j = 0; j < B; ++j) {
            const Vector xn = base + vol * tree.step.increments.col(j);
            const Vector wn = w + tree.step.increments.col(j);
            Vector hn = hist;
            spec.advance_history(hn, t_next, wn);
            const long fresh = static_cast<long>(xs.size());
            const long idx = tree.index[s + 1].insert(concat(xn, hn), fresh);
            if (idx == fresh) {
              xs.push_back(xn);
              ws.push_back(wn);
              hs.push_back(hn);
              if (total + static_cast<long>(xs.size()) > node_budget)
                throw BudgetExceeded("game tree exceeds the node budget of " +
                                     std::to_string(node_budget) + " at slice " +
                                     std::to_string(k + 1));
            }
            kids((a * tree.gamma_count + c) * B + j, i) = static_cast<int>(idx);
          }
        }
      }
    }
    const long M = static_cast<long>(xs.size());
    tree.state[s + 1].resize(spec.d, M);
    tree.noise[s + 1].resize(spec.m, M);
    tree.history[s + 1].resize(spec.history_size(), M);
    for (long i = 0; i < M; ++i) {
      tree.state[s + 1].col(i) = xs[i];
      tree.noise[s + 1].col(i) = ws[i];
      tree.history[s + 1].col(i) = hs[i];
    }
    tree.children[s] = std::move(kids);
    total += M;
  }
  for (auto& idx : tree.index) idx.finalize();
  return tree;
}

std::uint64_t lattice_fingerprint(const NoiseLattice& lat) {
  std::uint64_t h = 0x6c6174746963ULL;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    std::uint64_t s = h ^ bits;
    h = splitmix64(s);
  };
  const TimeGrid& g = lat.time_grid();
  mix(g.t0());
  mix(g.horizon());
  mix(g.n_steps());
  mix(lat.branching());
  mix(lat.dim());
  return h;
}

ControlChoice ValueField::choice(int k, long i) const {
  const int o = outer[k - start()](i);
  return respond(k, i, o);
}

ControlChoice ValueField::respond(int k, long i, int own) const {
  const int other = response[k - start()](own, i);
  return side == Side::lower ? ControlChoice{own, other} : ControlChoice{other, own};
}

namespace {

// One-step payoff table over control pairs at node i of slice k.
Matrix payoff_table(const ProblemSpec& spec, const GameTree& tree, int k, long i,
                    const Vector& next) {
  const int B = tree.step.size();
  const int s = k - tree.start;
  const Vector x = tree.state[s].col(i);
  const Vector hist = tree.history[s].col(i);
  const double t = tree.grid.time(k);
  Matrix table(tree.theta_count, tree.gamma_count);
  Vector child(B);
  for (int a = 0; a < tree.theta_count; ++a) {
    const Vector th = spec.theta_grid.point(a);
    for (int c = 0; c < tree.gamma_count; ++c) {
      for (int j = 0; j < B; ++j) child(j) = next(tree.child(k, i, a, c, j));
      table(a, c) = backward_step(spec.f, t, x, th, spec.gamma_grid.point(c), hist, child,
                                  tree.step, tree.grid.dt())
                        .y;
    }
  }
  return table;
}

Vector terminal_values(const ProblemSpec& spec, const GameTree& tree) {
  const int n = tree.end();
  Vector v(tree.nodes(n));
  for (long i = 0; i < v.size(); ++i)
    v(i) = spec.Phi(tree.state[n - tree.start].col(i), tree.history[n - tree.start].col(i));
  return v;
}

}  // namespace

ValueField solve_value(const ProblemSpec& spec, const NoiseLattice& lat, Side side,
                       const std::shared_ptr<const GameTree>& tree) {
  require(tree != nullptr, "missing game tree");
  check_step_size(spec, tree->grid);
  ValueField field;
  field.side = side;
  field.tree = tree;
  field.spec_hash = fingerprint(spec);
  field.lattice_hash = lattice_fingerprint(lat);
  const int S = tree->end() - tree->start + 1;
  field.values.resize(S);
  field.outer.resize(S - 1);
  field.response.resize(S - 1);
  field.values[S - 1] = terminal_values(spec, *tree);
  const int first = side == Side::lower ? tree->theta_count : tree->gamma_count;

  for (int k = tree->end() - 1; k >= tree->start; --k) {
    const int s = k - tree->start;
    const long N = tree->nodes(k);
    Vector v(N);
    IndexVector outer(N);
    Eigen::MatrixXi resp(first, N);
    const Vector& next = field.values[s + 1];
    parallel_for(N, [&](long i) {
      const Matrix table = payoff_table(spec, *tree, k, i, next);
      const Saddle sd = side == Side::lower ? sup_inf(table) : inf_sup(table);
      v(i) = sd.value;
      outer(i) = sd.outer;
      resp.col(i) = sd.inner;
    });
    field.values[s] = std::move(v);
    field.outer[s] = std::move(outer);
    field.response[s] = std::move(resp);
  }

  if (spec.bounded_terminal) {
    const double bound = spec.L * (spec.horizon + 1.0) + 1e-12;
    for (const auto& v : field.values)
      if (v.size() && v.cwiseAbs().maxCoeff() > bound) field.bound_ok = false;
  }
  return field;
}

ValueField solve_value(const ProblemSpec& spec, const NoiseLattice& lat, Side side,
                       const TreeRoot& root, long node_budget) {
  check_step_size(spec, lat.time_grid());
  auto tree = std::make_shared<const GameTree>(expand_game(spec, lat, root, node_budget));
  return solve_value(spec, lat, side, tree);
}

std::vector<Vector> single_agent_values(const ProblemSpec& spec, const GameTree& tree,
                                        bool maximise) {
  check_step_size(spec, tree.grid);
  const int S = tree.end() - tree.start + 1;
  std::vector<Vector> values(S);
  values[S - 1] = terminal_values(spec, tree);
  for (int k = tree.end() - 1; k >= tree.start; --k) {
    const int s = k - tree.start;
    Vector v(tree.nodes(k));
    parallel_for(v.size(), [&](long i) {
      const Matrix table = payoff_table(spec, tree, k, i, values[s + 1]);
      v(i) = maximise ? table.maxCoeff() : table.minCoeff();
    });
    values[s] = std::move(v);
  }
  return values;
}

double value_gap(const ValueField& lower, const ValueField& upper) {
  require(lower.tree == upper.tree, "value gap needs both fields on the same tree");
  double gap = 0.0;
  for (std::size_t s = 0; s < lower.values.size(); ++s)
    gap = std::max(gap, (lower.values[s] - upper.values[s]).cwiseAbs().maxCoeff());
  return gap;
}

namespace {

long ipow(long base, int e) {
  long r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

// log of the brute-force evaluation count, to test against the budget without overflow.
double log_enumeration_count(int B, int C, int S, int h) {
  double decision_points = 0.0;
  double noise_nodes = 0.0;
  for (int s = 0; s < h; ++s) {
    decision_points += std::pow(B, s) * std::pow(C, s + 1);
    noise_nodes += std::pow(B, s);
  }
  return decision_points * std::log(S) + noise_nodes * std::log(C);
}

// Multi-step game value from node i of slice j by brute force: the second
// mover ("strategist") picks a nonanticipative response per (noise node,
// history of the first mover's choices); the first mover ("controller")
// picks a noise-adapted process.
double enumerate_inner_game(const ProblemSpec& spec, const ValueField& field, int j, int k,
                            long i, long& evaluations) {
  const GameTree& tree = *field.tree;
  const bool lower = field.side == Side::lower;
  const int C = lower ? tree.theta_count : tree.gamma_count;
  const int S = lower ? tree.gamma_count : tree.theta_count;
  const int B = tree.step.size();
  const int h = k - j;
  const double dt = tree.grid.dt();

  std::vector<long> noise_offset(h + 1, 0), dp_offset(h + 1, 0);
  for (int s = 0; s < h; ++s) {
    noise_offset[s + 1] = noise_offset[s] + ipow(B, s);
    dp_offset[s + 1] = dp_offset[s] + ipow(B, s) * ipow(C, s + 1);
  }
  const long noise_nodes = noise_offset[h];
  const long decision_points = dp_offset[h];

  // Per noise node (including leaves): state, noise, history, controller history code.
  const long all_nodes = noise_offset[h] + ipow(B, h);
  std::vector<Vector> xs(all_nodes), ws(all_nodes), hs(all_nodes);
  std::vector<long> code(all_nodes, 0);
  std::vector<int> theta_at(noise_nodes), gamma_at(noise_nodes);
  std::vector<double> y(all_nodes);
  const int sj = j - tree.start;
  xs[0] = tree.state[sj].col(i);
  ws[0] = tree.noise[sj].col(i);
  hs[0] = tree.history[sj].col(i);

  std::vector<int> strat(decision_points, 0);
  std::vector<int> ctrl(noise_nodes, 0);
  auto advance = [](std::vector<int>& digits, int radix) {
    for (auto& d : digits) {
      if (++d < radix) return true;
      d = 0;
    }
    return false;
  };

  double outer_best = lower ? INFINITY : -INFINITY;
  do {
    double inner_best = lower ? -INFINITY : INFINITY;
    std::fill(ctrl.begin(), ctrl.end(), 0);
    do {
      // Forward pass.
      for (int s = 0; s < h; ++s) {
        const long width = ipow(B, s);
        const double t = tree.grid.time(j + s);
        const double t_next = tree.grid.time(j + s + 1);
        for (long q = 0; q < width; ++q) {
          const long node = noise_offset[s] + q;
          const int c = ctrl[node];
          const long cur_code = code[node] * C + c;
          const int d = strat[dp_offset[s] + q * ipow(C, s + 1) + cur_code];
          const int a = lower ? c : d;
          const int g = lower ? d : c;
          theta_at[node] = a;
          gamma_at[node] = g;
          const Vector th = spec.theta_grid.point(a);
          const Vector ga = spec.gamma_grid.point(g);
          const Vector base = xs[node] + spec.b(t, xs[node], th, ga, hs[node]) * dt;
          const Matrix vol = spec.sigma(t, xs[node], th, ga, hs[node]);
          for (int b = 0; b < B; ++b) {
            const long kid = noise_offset[s + 1] + q * B + b;
            xs[kid] = base + vol * tree.step.increments.col(b);
            ws[kid] = ws[node] + tree.step.increments.col(b);
            hs[kid] = hs[node];
            spec.advance_history(hs[kid], t_next, ws[kid]);
            code[kid] = cur_code;
          }
        }
      }
      // Terminal lookup.
      const long leaves = ipow(B, h);
      for (long q = 0; q < leaves; ++q) {
        const long node = noise_offset[h] + q;
        const long at = tree.find(k, xs[node], hs[node]);
        if (at < 0) throw NumericalError("enumerated state missing from the value field");
        y[node] = field.at(k)(at);
      }
      // Backward pass.
      Vector child(B);
      for (int s = h - 1; s >= 0; --s) {
        const long width = ipow(B, s);
        for (long q = 0; q < width; ++q) {
          const long node = noise_offset[s] + q;
          for (int b = 0; b < B; ++b) child(b) = y[noise_offset[s + 1] + q * B + b];
          y[node] = backward_step(spec.f, tree.grid.time(j + s), xs[node],
                                  spec.theta_grid.point(theta_at[node]),
                                  spec.gamma_grid.point(gamma_at[node]), hs[node], child,
                                  tree.step, dt)
                        .y;
        }
      }
      ++evaluations;
      inner_best = lower ? std::max(inner_best, y[0]) : std::min(inner_best, y[0]);
    } while (advance(ctrl, C));
    outer_best = lower ? std::min(outer_best, inner_best) : std::max(outer_best, inner_best);
  } while (advance(strat, S));
  return outer_best;
}

// Multi-step game value from node i of slice j by explicit minimax over an
// unmerged tree: states are recomputed from the dynamics and the value field
// is only read at slice k.
double expand_inner_game(const ProblemSpec& spec, const ValueField& field, int k, int s,
                         const Vector& x, const Vector& w, const Vector& hist, long& visits) {
  const GameTree& tree = *field.tree;
  ++visits;
  if (s == k) {
    const long at = tree.find(k, x, hist);
    if (at < 0) throw NumericalError("expanded state missing from the value field");
    return field.at(k)(at);
  }
  const int B = tree.step.size();
  const double dt = tree.grid.dt();
  const double t = tree.grid.time(s);
  const double t_next = tree.grid.time(s + 1);
  Matrix table(tree.theta_count, tree.gamma_count);
  Vector child(B);
  for (int a = 0; a < tree.theta_count; ++a) {
    const Vector th = spec.theta_grid.point(a);
    for (int c = 0; c < tree.gamma_count; ++c) {
      const Vector ga = spec.gamma_grid.point(c);
      const Vector base = x + spec.b(t, x, th, ga, hist) * dt;
      const Matrix vol = spec.sigma(t, x, th, ga, hist);
      for (int b = 0; b < B; ++b) {
        const Vector wn = w + tree.step.increments.col(b);
        Vector hn = hist;
        spec.advance_history(hn, t_next, wn);
        child(b) = expand_inner_game(spec, field, k, s + 1, base + vol * tree.step.increments.col(b),
                                     wn, hn, visits);
      }
      table(a, c) = backward_step(spec.f, t, x, th, ga, hist, child, tree.step, dt).y;
    }
  }
  return field.side == Side::lower ? sup_inf(table).value : inf_sup(table).value;
}

}  // namespace

DppReport dpp_residual(const ProblemSpec& spec, const ValueField& field, const NoiseLattice& lat,
                       int j, int k, long enumeration_budget, int max_roots) {
  require(field.spec_hash == fingerprint(spec), "value field was computed for another problem");
  require(field.lattice_hash == lattice_fingerprint(lat),
          "value field was computed on another lattice");
  require(field.start() <= j && j <= k && k <= field.end(), "DPP slices outside the field");
  const GameTree& tree = *field.tree;
  DppReport rep;
  if (j == k) return rep;

  const bool lower = field.side == Side::lower;
  const int C = lower ? tree.theta_count : tree.gamma_count;
  const int S = lower ? tree.gamma_count : tree.theta_count;
  const long N = tree.nodes(j);
  const long roots = std::min<long>(N, max_roots);
  const double log_count = log_enumeration_count(tree.step.size(), C, S, k - j);

  if (log_count + std::log(static_cast<double>(roots)) <=
      std::log(static_cast<double>(enumeration_budget))) {
    rep.mode = DppMode::enumeration;
    rep.roots = roots;
    for (long r = 0; r < roots; ++r) {
      const long i = roots == N ? r : (r * N) / roots;
      const double v = enumerate_inner_game(spec, field, j, k, i, rep.evaluations);
      rep.residual = std::max(rep.residual, std::abs(v - field.at(j)(i)));
    }
    return rep;
  }

  // Explicit expansion costs (pairs * B)^h visits per root.
  const double log_visits = (k - j) * std::log(static_cast<double>(tree.pairs() * tree.step.size()));
  const double expansion_budget = 10.0 * static_cast<double>(enumeration_budget);
  if (log_visits <= std::log(expansion_budget)) {
    rep.mode = DppMode::expansion;
    rep.roots = std::min<long>(roots, std::max<long>(1, static_cast<long>(expansion_budget / std::exp(log_visits))));
    const int sj = j - tree.start;
    for (long r = 0; r < rep.roots; ++r) {
      const long i = rep.roots == N ? r : (r * N) / rep.roots;
      const double v = expand_inner_game(spec, field, k, j, tree.state[sj].col(i), tree.noise[sj].col(i),
                                         tree.history[sj].col(i), rep.evaluations);
      rep.residual = std::max(rep.residual, std::abs(v - field.at(j)(i)));
    }
    return rep;
  }

  rep.mode = DppMode::recursion;
  rep.roots = N;
  Vector next = field.at(k);
  for (int s = k - 1; s >= j; --s) {
    Vector cur(tree.nodes(s));
    parallel_for(cur.size(), [&](long i) {
      const Matrix table = payoff_table(spec, tree, s, i, next);
      cur(i) = lower ? sup_inf(table).value : inf_sup(table).value;
    });
    next = std::move(cur);
  }
  rep.residual = (next - field.at(j)).cwiseAbs().maxCoeff();
  return rep;
}

ControlProcess::Feedback StrategyProfile::equilibrium() const {
  const ValueField f = field;
  return [f](int k, const Vector& x, const Vector& hist) {
    return f.choice(k, f.tree->nearest(k, x, hist));
  };
}

ControlProcess::Feedback StrategyProfile::deviation(int own) const {
  const ValueField f = field;
  return [f, own](int k, const Vector& x, const Vector& hist) {
    return f.respond(k, f.tree->nearest(k, x, hist), own);
  };
}

ControlProcess::Feedback StrategyProfile::counter_deviation(int other) const {
  const ValueField f = field;
  return [f, other](int k, const Vector& x, const Vector& hist) {
    const ControlChoice c = f.choice(k, f.tree->nearest(k, x, hist));
    return f.side == Side::lower ? ControlChoice{c.theta, other} : ControlChoice{other, c.gamma};
  };
}

namespace {

// Evaluates feedback controls from a field node with the lattice BSDE
// solver; returns the tree and its solution.
std::pair<Tree, BsdeSolution> evaluate_feedback(const ProblemSpec& spec, const ValueField& field,
                                                const NoiseLattice& lat, int k, long i,
                                                const ControlProcess::Feedback& fb) {
  const GameTree& gt = *field.tree;
  const int s = k - gt.start;
  TreeRoot root{k, gt.state[s].col(i), gt.noise[s].col(i), gt.history[s].col(i)};
  Tree tree = lattice_forward(spec, lat, root, ControlProcess::from_feedback(fb));
  const int n = tree.end();
  Vector terminal(tree.nodes(n));
  for (long l = 0; l < terminal.size(); ++l)
    terminal(l) = spec.Phi(tree.states_at(n).col(l), tree.history_at(n).col(l));
  BsdeSolution sol = solve_lattice(spec, tree, terminal);
  return {std::move(tree), std::move(sol)};
}

}  // namespace

StrategyProfile extract_epsilon_optimal(const ProblemSpec& spec, const ValueField& field,
                                        const NoiseLattice& lat) {
  require(field.spec_hash == fingerprint(spec), "value field was computed for another problem");
  StrategyProfile profile;
  profile.field = field;
  const auto [tree, sol] =
      evaluate_feedback(spec, field, lat, field.start(), 0, profile.equilibrium());
  double eps = 0.0;
  for (int k = tree.start; k <= tree.end(); ++k) {
    for (long i = 0; i < tree.nodes(k); ++i) {
      const long at = field.tree->find(k, tree.states_at(k).col(i), tree.history_at(k).col(i));
      if (at < 0) throw NumericalError("profile visited a state outside the value field");
      eps = std::max(eps, std::abs(sol.at(k)(i) - field.at(k)(at)));
    }
  }
  profile.epsilon = eps;
  return profile;
}

DeviationReport deviation_test(const ProblemSpec& spec, const StrategyProfile& profile,
                               const NoiseLattice& lat, int count, std::uint64_t seed) {
  const ValueField& field = profile.field;
  const GameTree& gt = *field.tree;
  const bool lower = field.side == Side::lower;
  const int first_count = lower ? gt.theta_count : gt.gamma_count;
  const int second_count = lower ? gt.gamma_count : gt.theta_count;
  Xoshiro256 rng(seed);
  DeviationReport rep;
  for (int t = 0; t < count; ++t) {
    const int k = gt.start + static_cast<int>(rng() % static_cast<std::uint64_t>(gt.end() - gt.start));
    const long i = static_cast<long>(rng() % static_cast<std::uint64_t>(gt.nodes(k)));
    const double v = field.at(k)(i);
    // The first mover is the maximiser on the lower side: a deviation gains when J > V.
    const double first_sign = lower ? 1.0 : -1.0;
    for (int own = 0; own < first_count; ++own) {
      const double J = evaluate_feedback(spec, field, lat, k, i, profile.deviation(own)).second.at(k)(0);
      const double gain = first_sign * (J - v);
      rep.max_gain = std::max(rep.max_gain, gain);
      if (gain > 1e-10) ++rep.profitable;
    }
    for (int other = 0; other < second_count; ++other) {
      const double J =
          evaluate_feedback(spec, field, lat, k, i, profile.counter_deviation(other)).second.at(k)(0);
      const double gain = -first_sign * (J - v);
      rep.max_gain = std::max(rep.max_gain, gain);
      if (gain > 1e-10) ++rep.profitable;
    }
    ++rep.nodes_tested;
  }
  return rep;
}

PolicyMcReport policy_mc_check(const ProblemSpec& spec, const StrategyProfile& profile,
                               int n_paths, std::uint64_t seed, int bootstrap) {
  const ValueField& field = profile.field;
  const GameTree& gt = *field.tree;
  const PathEnsemble ens = sample_paths(gt.grid, spec.m, n_paths, seed);
  const StateTrajectory traj =
      euler_forward(spec, ens, {gt.start, gt.state[0].col(0).transpose()},
                    ControlProcess::from_feedback(profile.equilibrium()));
  const int n = gt.end();
  Vector terminal(n_paths);
  for (int p = 0; p < n_paths; ++p)
    terminal(p) = spec.Phi(traj.at(n).row(p).transpose(), traj.hist.back().row(p).transpose());
  LsmcOptions opt;
  opt.bootstrap = bootstrap;
  opt.seed = seed;
  const BsdeSolution sol = solve_lsmc(spec, ens, traj, terminal, opt);
  PolicyMcReport rep;
  rep.value_mc = sol.y0;
  rep.se = sol.y0_se;
  rep.value_lattice = field.root_value();
  rep.within = std::abs(rep.value_mc - rep.value_lattice) <= 3.0 * rep.se;
  return rep;
}

RegularityReport regularity_suite(const ProblemSpec& spec, Side side,
                                  const std::vector<Vector>& probes, int n_steps, int branching,
                                  bool time_continuity) {
  require(probes.size() >= 2, "regularity needs at least two probes");
  const TimeGrid grid(0.0, spec.horizon, n_steps);
  const NoiseLattice lat = build_lattice(grid, spec.m, branching);
  const double sqrt_dt = std::sqrt(grid.dt());
  RegularityReport rep;
  std::vector<double> v0(probes.size());
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const int last = time_continuity ? n_steps - 1 : 0;
    double later = spec.Phi(probes[p], spec.initial_history(Vector::Zero(spec.m)));
    for (int k = last; k >= 0; --k) {
      const ValueField f = solve_value(spec, lat, side, TreeRoot{k, probes[p], {}, {}});
      for (const auto& v : f.values) rep.sup_bound = std::max(rep.sup_bound, v.cwiseAbs().maxCoeff());
      rep.bound_ok = rep.bound_ok && f.bound_ok;
      const double now = f.root_value();
      if (time_continuity) rep.time_modulus = std::max(rep.time_modulus, std::abs(later - now) / sqrt_dt);
      later = now;
      if (k == 0) v0[p] = now;
    }
  }
  for (std::size_t p = 0; p + 1 < probes.size(); ++p)
    rep.lipschitz = std::max(rep.lipschitz,
                             std::abs(v0[p + 1] - v0[p]) / (probes[p + 1] - probes[p]).norm());
  return rep;
}

StabilityReport stability_suite(const ProblemSpec& spec, const std::vector<double>& eps,
                                const DriftFn& b_extra, const DriverFn& f_extra,
                                const std::vector<Vector>& probes, int n_steps, Side side,
                                int branching) {
  const TimeGrid grid(0.0, spec.horizon, n_steps);
  const NoiseLattice lat = build_lattice(grid, spec.m, branching);
  auto values = [&](const ProblemSpec& s) {
    std::vector<double> out;
    for (const auto& x : probes) out.push_back(solve_value(s, lat, side, TreeRoot{0, x, {}, {}}).root_value());
    return out;
  };
  const std::vector<double> base = values(spec);
  StabilityReport rep;
  std::vector<double> fit_eps, fit_drift;
  for (double e : eps) {
    ProblemSpec p = spec;
    p.b = [b = spec.b, b_extra, e](double t, const Vector& x, const Vector& th, const Vector& ga,
                                   const Vector& h) { return (b(t, x, th, ga, h) + e * b_extra(t, x, th, ga, h)).eval(); };
    p.f = [f = spec.f, f_extra, e](double t, const Vector& x, double y, const Vector& z,
                                   const Vector& th, const Vector& ga, const Vector& h) {
      return f(t, x, y, z, th, ga, h) + e * f_extra(t, x, y, z, th, ga, h);
    };
    const std::vector<double> moved = values(p);
    double drift = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) drift = std::max(drift, std::abs(moved[i] - base[i]));
    rep.eps.push_back(e);
    rep.drift.push_back(drift);
    if (e > 0.0) {
      fit_eps.push_back(e);
      fit_drift.push_back(drift);
    }
  }
  if (fit_eps.size() >= 2) rep.slope = loglog_slope(fit_eps, fit_drift);
  return rep;
}

}  // namespace sdg
