#include "sdg/problem.hpp"

#include "sdg/random.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace sdg {

ControlGrid::ControlGrid(Matrix points, Label label) : points_(std::move(points)), label_(label) {
  require(points_.cols() > 0 && points_.rows() > 0, "control grid must be non-empty");
  require(points_.allFinite(), "control grid points must be finite");
  for (Eigen::Index i = 0; i < points_.cols(); ++i)
    for (Eigen::Index j = i + 1; j < points_.cols(); ++j)
      require(points_.col(i) != points_.col(j), "control grid contains duplicate points");
}

ControlGrid ControlGrid::uniform(double lo, double hi, int count, Label label) {
  require(count >= 1, "control grid needs at least one point");
  require(hi >= lo, "control grid needs lo <= hi");
  Matrix pts(1, count);
  if (count == 1) {
    pts(0, 0) = 0.5 * (lo + hi);
  } else {
    for (int i = 0; i < count; ++i) pts(0, i) = lo + (hi - lo) * i / (count - 1);
    pts(0, count - 1) = hi;
  }
  return ControlGrid(pts, label);
}

ControlGrid ControlGrid::singleton(const Vector& point, Label label) {
  return ControlGrid(Matrix(point), label);
}

Vector ProblemSpec::initial_history(const Vector& w) const {
  Vector h(history_size());
  for (std::size_t i = 0; i < partition.size(); ++i) h.segment(i * m, m) = w;
  return h;
}

void ProblemSpec::advance_history(Vector& hist, double t_next, const Vector& w_next) const {
  for (std::size_t i = 0; i < partition.size(); ++i)
    if (partition[i] >= t_next - 1e-12) hist.segment(i * m, m) = w_next;
}

void ProblemSpec::check() const {
  require(d >= 1 && m >= 1, "problem dimensions must be positive");
  require(horizon > 0.0, "problem horizon must be positive");
  require(L > 0.0, "problem constant L must be positive");
  require(static_cast<bool>(b) && static_cast<bool>(sigma) && static_cast<bool>(f) &&
              static_cast<bool>(Phi),
          "problem '" + name + "' is missing a coefficient");
  require(theta_grid.size() > 0 && gamma_grid.size() > 0, "problem control grids must be set");
  require(randomness == Randomness::discrete_random || partition.empty(),
          "Markovian problems carry no noise partition");
  for (double t : partition) require(t > 0.0 && t <= horizon, "partition times must lie in (0, T]");
  const Vector x = Vector::Zero(d);
  const Vector h = Vector::Zero(history_size());
  const Vector th = theta_grid.point(0);
  const Vector ga = gamma_grid.point(0);
  require(b(0.0, x, th, ga, h).size() == d, "drift has wrong dimension");
  const Matrix s = sigma(0.0, x, th, ga, h);
  require(s.rows() == d && s.cols() == m, "diffusion has wrong shape");
}

namespace {

std::uint64_t mix(std::uint64_t h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  return splitmix64(h ^ bits);
}

}  // namespace

std::uint64_t fingerprint(const ProblemSpec& spec) {
  std::uint64_t h = 0x5d0c1ab5e11ULL;
  for (char c : spec.name) h = splitmix64(h ^ static_cast<unsigned char>(c));
  h = mix(h, spec.d);
  h = mix(h, spec.m);
  h = mix(h, spec.horizon);
  h = mix(h, spec.L);
  for (double t : spec.partition) h = mix(h, t);
  for (const auto* g : {&spec.theta_grid, &spec.gamma_grid})
    for (Eigen::Index i = 0; i < g->points().size(); ++i) h = mix(h, g->points().data()[i]);

  Xoshiro256 rng(0xf1d6e7ULL);
  for (int probe = 0; probe < 8; ++probe) {
    const double t = spec.horizon * rng.uniform();
    Vector x(spec.d), z(spec.m), hist(spec.history_size());
    for (auto& v : x) v = 4.0 * rng.normal();
    for (auto& v : z) v = rng.normal();
    for (auto& v : hist) v = rng.normal();
    const double y = rng.normal();
    const Vector th = spec.theta_grid.point(probe % spec.theta_grid.size());
    const Vector ga = spec.gamma_grid.point(probe % spec.gamma_grid.size());
    const Vector bv = spec.b(t, x, th, ga, hist);
    const Matrix sv = spec.sigma(t, x, th, ga, hist);
    for (Eigen::Index i = 0; i < bv.size(); ++i) h = mix(h, bv(i));
    for (Eigen::Index i = 0; i < sv.size(); ++i) h = mix(h, sv.data()[i]);
    h = mix(h, spec.f(t, x, y, z, th, ga, hist));
    h = mix(h, spec.Phi(x, hist));
  }
  return h;
}

A1Report validate_a1(const ProblemSpec& spec, int probes, std::uint64_t seed) {
  require(probes >= 1, "validate_a1 needs probes >= 1");
  spec.check();
  Xoshiro256 rng(seed);
  const double box = 10.0;

  struct Probe {
    double t;
    Vector x, z, hist;
    double y;
    int ti, gi;
  };
  auto draw = [&] {
    Probe p;
    p.t = spec.horizon * rng.uniform();
    p.x.resize(spec.d);
    p.z.resize(spec.m);
    p.hist.resize(spec.history_size());
    for (auto& v : p.x) v = box * (2.0 * rng.uniform() - 1.0);
    for (auto& v : p.z) v = box * (2.0 * rng.uniform() - 1.0);
    for (auto& v : p.hist) v = rng.normal();
    p.y = box * (2.0 * rng.uniform() - 1.0);
    p.ti = static_cast<int>(rng() % spec.theta_grid.size());
    p.gi = static_cast<int>(rng() % spec.gamma_grid.size());
    return p;
  };
  auto perturb = [&](const Probe& p) {
    Probe q = p;
    const double scale = std::pow(10.0, -4.0 * rng.uniform());
    for (auto& v : q.x) v += scale * rng.normal();
    for (auto& v : q.z) v += scale * rng.normal();
    q.y += scale * rng.normal();
    if (rng.uniform() < 0.5) q.ti = static_cast<int>(rng() % spec.theta_grid.size());
    if (rng.uniform() < 0.5) q.gi = static_cast<int>(rng() % spec.gamma_grid.size());
    return q;
  };
  auto describe = [](const char* what, const Probe& p, const Probe& q) {
    std::ostringstream os;
    os << what << " at x=" << p.x.transpose() << " y=" << p.y << " vs x=" << q.x.transpose()
       << " y=" << q.y;
    return os.str();
  };

  A1Report rep;
  double worst_excess = 0.0;
  for (int i = 0; i < probes; ++i) {
    const Probe p = draw();
    const Probe q = (i % 2 == 0) ? perturb(p) : [&] {
      Probe far = draw();
      far.t = p.t;
      far.hist = p.hist;
      return far;
    }();
    const Vector thp = spec.theta_grid.point(p.ti), gap = spec.gamma_grid.point(p.gi);
    const Vector thq = spec.theta_grid.point(q.ti), gaq = spec.gamma_grid.point(q.gi);

    const Vector bp = spec.b(p.t, p.x, thp, gap, p.hist);
    const Matrix sp = spec.sigma(p.t, p.x, thp, gap, p.hist);
    const double fp = spec.f(p.t, p.x, p.y, p.z, thp, gap, p.hist);
    const Vector bq = spec.b(q.t, q.x, thq, gaq, q.hist);
    const Matrix sq = spec.sigma(q.t, q.x, thq, gaq, q.hist);
    const double fq = spec.f(q.t, q.x, q.y, q.z, thq, gaq, q.hist);

    const double bound = std::sqrt(bp.squaredNorm() + sp.squaredNorm()) + std::abs(fp);
    if (bound > rep.max_bound) {
      rep.max_bound = bound;
      if (bound - spec.L > worst_excess) {
        worst_excess = bound - spec.L;
        rep.witness = describe("bound", p, q);
      }
    }
    const double dist = (p.x - q.x).norm() + std::abs(p.y - q.y) + (p.z - q.z).norm() +
                        (thp - thq).norm() + (gap - gaq).norm();
    if (dist > 0.0) {
      const double diff = std::sqrt((bp - bq).squaredNorm() + (sp - sq).squaredNorm()) +
                          std::abs(fp - fq);
      const double quotient = diff / dist;
      if (quotient > rep.max_quotient) {
        rep.max_quotient = quotient;
        if (quotient - 1.01 * spec.L > worst_excess) {
          worst_excess = quotient - 1.01 * spec.L;
          rep.witness = describe("lipschitz", p, q);
        }
      }
    }
    const double phip = spec.Phi(p.x, p.hist);
    const double phiq = spec.Phi(q.x, p.hist);
    rep.terminal_sup = std::max({rep.terminal_sup, std::abs(phip), std::abs(phiq)});
    const double dx = (p.x - q.x).norm();
    if (dx > 0.0) {
      const double tq = std::abs(phip - phiq) / dx;
      if (tq > rep.terminal_lipschitz) {
        rep.terminal_lipschitz = tq;
        if (tq - 1.01 * spec.L > worst_excess) {
          worst_excess = tq - 1.01 * spec.L;
          rep.witness = describe("terminal", p, q);
        }
      }
    }
    if (!std::isfinite(bound) || !std::isfinite(phip)) {
      rep.witness = describe("non-finite coefficient", p, q);
      worst_excess = INFINITY;
    }
  }
  rep.passed = rep.max_bound <= spec.L && rep.max_quotient <= 1.01 * spec.L &&
               rep.terminal_lipschitz <= 1.01 * spec.L && std::isfinite(worst_excess);
  if (rep.passed) rep.witness.clear();
  return rep;
}

}  // namespace sdg
