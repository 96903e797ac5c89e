#include "bohmlab/bohm.hpp"

#include <algorithm>
#include <optional>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "bohmlab/error.hpp"
#include "bohmlab/spectral.hpp"

namespace bohmlab::bohm {

using qgrid::Axis;
using qgrid::Boundary;
using qgrid::SpectralBasis;

namespace {

// Node values (possibly already closed on dirichlet axes) -> full closed
// lattice, wrapping periodic axes.
std::vector<cplx> close_lattice(const Grid& g, const std::vector<cplx>& in, std::size_t rx, std::size_t ry,
                                std::size_t cx, std::size_t cy) {
  std::vector<cplx> out(cx * cy);
  for (std::size_t i = 0; i < cx; ++i) {
    const std::size_t si = i < rx ? i : 0;
    for (std::size_t j = 0; j < cy; ++j) {
      const std::size_t sj = j < ry ? j : 0;
      out[i * cy + j] = in[si * ry + sj];
    }
  }
  (void)g;
  return out;
}

struct Cell {
  std::size_t i0, i1;
  double s;
};

Cell locate(const Axis& ax, double q) {
  const double u = (q - ax.min) / ax.dx();
  const auto n = static_cast<double>(ax.n);
  double f = std::floor(u);
  if (f >= n) f = n - 1.0;
  if (f < 0.0) f = 0.0;
  const auto i0 = static_cast<std::size_t>(f);
  return {i0, i0 + 1, std::clamp(u - f, 0.0, 1.0)};
}

double wrap(const Axis& ax, double v) {
  const double len = ax.max - ax.min;
  double r = std::fmod(v - ax.min, len);
  if (r < 0.0) r += len;
  return ax.min + r;
}

std::string where(const Point& q, int dims) {
  std::ostringstream os;
  os.precision(17);
  os << "(" << q[0];
  if (dims == 2) os << ", " << q[1];
  os << ")";
  return os.str();
}

} // namespace

FieldFrame::FieldFrame(const WaveFunction& psi, double t) : grid_(psi.grid()), t_(t) {
  const SpectralBasis basis(grid_);
  const std::size_t rx = basis.node_count(0, true);
  const std::size_t ry = basis.node_count(1, true);
  cx_ = grid_.nx() + 1;
  cy_ = grid_.dims() == 2 ? grid_.ny() + 1 : 1;
  const auto spec = basis.forward(psi.amplitudes());
  psi_ = close_lattice(grid_, basis.inverse(spec, true), rx, ry, cx_, cy_);
  for (int a = 0; a < grid_.dims(); ++a) {
    auto d = spec;
    basis.differentiate(d, a);
    grad_[static_cast<std::size_t>(a)] = close_lattice(grid_, basis.inverse(std::move(d), true), rx, ry, cx_, cy_);
  }
  for (const auto& z : psi.amplitudes()) max_density_ = std::max(max_density_, std::norm(z));
}

FieldFrame::Local FieldFrame::at(const Point& q) const {
  if (!grid_.contains(q)) {
    throw NumericalGuardError("configuration point " + where(q, grid_.dims()) + " lies outside the grid");
  }
  const Cell cx = locate(grid_.axis(0), q[0]);
  const Cell cy = grid_.dims() == 2 ? locate(grid_.axis(1), q[1]) : Cell{0, 0, 0.0};
  // Value of f on the lattice, linear along axis `a` between nodes, with the
  // other coordinate interpolated; `fixed` pins axis a to one node.
  const auto sample = [&](const std::vector<cplx>& f, int a, std::optional<std::size_t> fixed) {
    Cell x = cx, y = cy;
    if (fixed && a == 0) x = {*fixed, *fixed, 0.0};
    if (fixed && a == 1) y = {*fixed, *fixed, 0.0};
    if (grid_.dims() == 1) return (1.0 - x.s) * f[x.i0] + x.s * f[x.i1];
    return (1.0 - x.s) * ((1.0 - y.s) * f[x.i0 * cy_ + y.i0] + y.s * f[x.i0 * cy_ + y.i1]) +
           x.s * ((1.0 - y.s) * f[x.i1 * cy_ + y.i0] + y.s * f[x.i1 * cy_ + y.i1]);
  };
  Local out{};
  out.psi = sample(psi_, 0, std::nullopt);
  for (int a = 0; a < grid_.dims(); ++a) out.grad[static_cast<std::size_t>(a)] = sample(grad_[static_cast<std::size_t>(a)], a, std::nullopt);

  // In a cell touching a hard wall psi vanishes linearly while its normal
  // derivative does not, so the interpolated ratio would blow up like 1/d.
  // The exact normal velocity goes to zero linearly at the wall; use that.
  for (int a = 0; a < grid_.dims(); ++a) {
    const Axis& ax = grid_.axis(a);
    if (ax.boundary != qgrid::Boundary::dirichlet) continue;
    const Cell& c = a == 0 ? cx : cy;
    std::size_t inner;
    double d;
    if (c.i0 == 0) {
      inner = c.i1;
      d = c.s;
    } else if (c.i1 == ax.n) {
      inner = c.i0;
      d = 1.0 - c.s;
    } else {
      continue;
    }
    const auto k = static_cast<std::size_t>(a);
    const cplx p_in = sample(psi_, a, inner);
    if (p_in == cplx{}) continue;
    out.grad[k] = out.psi * d * sample(grad_[k], a, inner) / p_in;
  }
  return out;
}

cplx FieldFrame::overlap(const FieldFrame& other) const {
  cplx sum{};
  const std::size_t ny = grid_.ny();
  for (std::size_t i = 0; i < grid_.nx(); ++i) {
    for (std::size_t j = 0; j < ny; ++j) sum += std::conj(psi_[i * cy_ + j]) * other.psi_[i * cy_ + j];
  }
  return sum;
}

Velocity guided_velocity(const FieldFrame::Local& local, double max_density, const Grid& grid,
                         const FieldOptions& opts) {
  Velocity out;
  const double rho = std::norm(local.psi);
  const bool node = rho < opts.eps_node * max_density;
  for (int a = 0; a < grid.dims(); ++a) {
    const auto ua = static_cast<std::size_t>(a);
    double v = 0.0;
    if (rho > 0.0) v = opts.units.hbar / opts.units.mass[ua] * (local.grad[ua] * std::conj(local.psi)).imag() / rho;
    if (node) {
      const double vmax = grid.axis(a).dx() / opts.dt_traj;
      v = std::clamp(v, -vmax, vmax);
    }
    out.v[ua] = v;
  }
  out.regularized = node;
  return out;
}

Velocity velocity_field(const WaveFunction& psi, const Point& q, const FieldOptions& opts) {
  const FieldFrame frame(psi, 0.0);
  return guided_velocity(frame.at(q), frame.max_density(), frame.grid(), opts);
}

namespace {

// Linear-in-time field between two frames, b rotated onto a's global phase.
class FramePair {
public:
  FramePair(const FieldFrame& a, const FieldFrame& b, const FieldOptions& opts) : a_(a), b_(b), opts_(opts) {
    const cplx ov = a.overlap(b);
    align_ = std::abs(ov) > 0.0 ? std::conj(ov) / std::abs(ov) : cplx(1.0);
  }

  Velocity at(const Point& q, double t) const {
    const double span = b_.t() - a_.t();
    const double s = std::clamp((t - a_.t()) / span, 0.0, 1.0);
    const auto la = a_.at(q);
    const auto lb = b_.at(q);
    FieldFrame::Local l;
    l.psi = (1.0 - s) * la.psi + s * align_ * lb.psi;
    for (std::size_t k = 0; k < 2; ++k) l.grad[k] = (1.0 - s) * la.grad[k] + s * align_ * lb.grad[k];
    const double maxd = (1.0 - s) * a_.max_density() + s * b_.max_density();
    return guided_velocity(l, maxd, a_.grid(), opts_);
  }

  const Grid& grid() const { return a_.grid(); }

private:
  const FieldFrame& a_;
  const FieldFrame& b_;
  FieldOptions opts_;
  cplx align_;
};

struct Stepper {
  const FramePair& field;
  const FieldOptions& opts;
  int dims;
  bool flagged = false;

  bool too_fast(const Point& v, double h) const {
    for (int a = 0; a < dims; ++a) {
      if (std::abs(v[static_cast<std::size_t>(a)]) * h > field.grid().axis(a).dx()) return true;
    }
    return false;
  }

  // Stage velocities that disagree by more than a small fraction of a cell
  // over the step mean the field varies too sharply for this h.
  bool rough(const Velocity& a, const Velocity& b, double h) const {
    for (int k = 0; k < dims; ++k) {
      const auto u = static_cast<std::size_t>(k);
      if (std::abs(a.v[u] - b.v[u]) * h > kRoughness * field.grid().axis(k).dx()) return true;
    }
    return false;
  }
  static constexpr double kRoughness = 1e-3;

  Point shifted(const Point& q, const Point& v, double h) const { return {q[0] + h * v[0], q[1] + h * v[1]}; }

  // One RK4 step with recursive halving while the node guard fires or a
  // stage would move more than one cell.
  // Stage evaluation; a stage point outside the box is pulled back onto
  // it and counts as too fast.
  Velocity stage(const Point& q, double t, bool& outside) const {
    Point p = q;
    for (int a = 0; a < dims; ++a) {
      const auto& ax = field.grid().axis(a);
      const auto k = static_cast<std::size_t>(a);
      if (ax.boundary == qgrid::Boundary::periodic) {
        p[k] = wrap(ax, p[k]);
        continue;
      }
      if (p[k] < ax.min || p[k] > ax.max) {
        outside = true;
        p[k] = std::clamp(p[k], ax.min, ax.max);
      }
    }
    return field.at(p, t);
  }

  void advance(Point& q, double t, double h, int depth) {
    bool outside = false;
    const auto k1 = stage(q, t, outside);
    const auto k2 = stage(shifted(q, k1.v, 0.5 * h), t + 0.5 * h, outside);
    const auto k3 = stage(shifted(q, k2.v, 0.5 * h), t + 0.5 * h, outside);
    const auto k4 = stage(shifted(q, k3.v, h), t + h, outside);
    const bool node = k1.regularized || k2.regularized || k3.regularized || k4.regularized;
    const bool fast = outside || too_fast(k1.v, h) || too_fast(k2.v, h) || too_fast(k3.v, h) || too_fast(k4.v, h);
    const bool sharp = rough(k1, k2, h) || rough(k1, k3, h) || rough(k1, k4, h);
    if ((node || fast || sharp) && depth < opts.max_halvings) {
      advance(q, t, 0.5 * h, depth + 1);
      advance(q, t + 0.5 * h, 0.5 * h, depth + 1);
      return;
    }
    flagged = flagged || node || fast;
    Point dq{};
    for (std::size_t k = 0; k < 2; ++k) dq[k] = h / 6.0 * (k1.v[k] + 2.0 * k2.v[k] + 2.0 * k3.v[k] + k4.v[k]);
    // Out of halvings on a near-node spike: move at most one cell.
    if (fast) {
      for (int a = 0; a < dims; ++a) {
        const double dx = field.grid().axis(a).dx();
        dq[static_cast<std::size_t>(a)] = std::clamp(dq[static_cast<std::size_t>(a)], -dx, dx);
      }
    }
    for (std::size_t k = 0; k < 2; ++k) q[k] += dq[k];
    for (int a = 0; a < dims; ++a) {
      const auto& ax = field.grid().axis(a);
      if (ax.boundary == qgrid::Boundary::periodic) q[static_cast<std::size_t>(a)] = wrap(ax, q[static_cast<std::size_t>(a)]);
    }
    if (!field.grid().contains(q)) {
      std::ostringstream os;
      os.precision(17);
      os << "trajectory left the grid at t=" << t + h << " q=" << where(q, dims);
      throw NumericalGuardError(os.str());
    }
  }
};

std::size_t substeps(double span, double dt_traj) {
  const double ratio = span / dt_traj;
  const double r = std::round(ratio);
  if (r < 1.0 || std::abs(ratio - r) > 1e-6 * std::max(1.0, ratio)) {
    throw PreconditionError("trajectory: dt_traj must divide the interval between field frames");
  }
  return static_cast<std::size_t>(r);
}

template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  // Lowest chunk first, so the reported failure does not depend on timing.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

} // namespace

EnsembleIntegrator::EnsembleIntegrator(std::vector<Point> q0, FieldOptions opts, unsigned threads)
    : q_(std::move(q0)), opts_(opts), threads_(threads) {
  if (!(opts_.dt_traj > 0.0)) throw PreconditionError("trajectory: dt_traj must be > 0");
  trajectories_.resize(q_.size());
  pending_.assign(q_.size(), 0);
  for (std::size_t i = 0; i < q_.size(); ++i) trajectories_[i].id = i;
}

void EnsembleIntegrator::start(const FieldFrame& f0) {
  if (prev_) throw PreconditionError("trajectory: integrator already started");
  for (std::size_t i = 0; i < q_.size(); ++i) {
    if (!f0.grid().contains(q_[i])) throw PreconditionError("trajectory: q0 lies outside the grid");
    const auto v = guided_velocity(f0.at(q_[i]), f0.max_density(), f0.grid(), opts_);
    trajectories_[i].samples.push_back(Sample{f0.t(), q_[i], v.v, v.regularized});
  }
  prev_ = std::make_unique<FieldFrame>(f0);
}

void EnsembleIntegrator::advance(const FieldFrame& next, bool record) {
  if (!prev_) throw PreconditionError("trajectory: integrator not started");
  if (!(next.grid() == prev_->grid())) throw PreconditionError("trajectory: field frames change grid");
  const double ta = prev_->t();
  const double span = next.t() - ta;
  if (!(span > 0.0)) throw PreconditionError("trajectory: field frames must have increasing time");
  const std::size_t steps = substeps(span, opts_.dt_traj);
  const double h = span / static_cast<double>(steps);
  const FramePair field(*prev_, next, opts_);
  const int dims = next.grid().dims();
  parallel_for(q_.size(), threads_, [&](std::size_t i) {
    Stepper st{field, opts_, dims};
    Point q = q_[i];
    try {
      for (std::size_t s = 0; s < steps; ++s) st.advance(q, ta + static_cast<double>(s) * h, h, 0);
    } catch (const NumericalGuardError& e) {
      throw NumericalGuardError("trajectory " + std::to_string(i) + " in (" + std::to_string(ta) + ", " +
                                std::to_string(next.t()) + "]: " + e.what());
    }
    q_[i] = q;
    if (st.flagged) pending_[i] = 1;
    if (!record) return;
    const auto v = guided_velocity(next.at(q), next.max_density(), next.grid(), opts_);
    trajectories_[i].samples.push_back(Sample{next.t(), q, v.v, pending_[i] != 0 || v.regularized});
    pending_[i] = 0;
  });
  prev_ = std::make_unique<FieldFrame>(next);
}

std::vector<Point> EnsembleIntegrator::positions() const { return q_; }

Ensemble EnsembleIntegrator::finish(std::uint64_t seed, std::string psi_ref) && {
  return Ensemble{std::move(trajectories_), seed, std::move(psi_ref)};
}

Ensemble integrate_ensemble(const propagate::Timeline& timeline, const std::vector<Point>& q0, const FieldOptions& opts,
                            unsigned threads, std::uint64_t seed, std::string psi_ref) {
  if (timeline.empty()) throw PreconditionError("trajectory: empty timeline");
  EnsembleIntegrator integ(q0, opts, threads);
  integ.start(FieldFrame(timeline.front().psi, timeline.front().t));
  for (std::size_t i = 1; i < timeline.size(); ++i) integ.advance(FieldFrame(timeline[i].psi, timeline[i].t));
  return std::move(integ).finish(seed, std::move(psi_ref));
}

Trajectory integrate_trajectory(const propagate::Timeline& timeline, const Point& q0, double dt_traj,
                                const FieldOptions& opts) {
  FieldOptions o = opts;
  o.dt_traj = dt_traj;
  auto ens = integrate_ensemble(timeline, {q0}, o, 1, 0, "");
  return std::move(ens.trajectories.front());
}

LinearDensity::LinearDensity(double min, double dx, std::vector<double> knots)
    : min_(min), dx_(dx), knots_(std::move(knots)) {
  if (knots_.size() < 2) throw PreconditionError("linear density needs at least two knots");
  cum_.assign(knots_.size(), 0.0);
  for (std::size_t j = 1; j < knots_.size(); ++j) cum_[j] = cum_[j - 1] + 0.5 * dx_ * (knots_[j - 1] + knots_[j]);
  if (!(cum_.back() > 0.0)) throw PreconditionError("linear density has zero mass");
}

double LinearDensity::cdf(double x) const {
  const double u = (x - min_) / dx_;
  if (u <= 0.0) return 0.0;
  const auto cells = static_cast<double>(knots_.size() - 1);
  if (u >= cells) return 1.0;
  const auto j = static_cast<std::size_t>(std::floor(u));
  const double s = u - static_cast<double>(j);
  const double r0 = knots_[j], r1 = knots_[j + 1];
  const double part = dx_ * (r0 * s + 0.5 * (r1 - r0) * s * s);
  return (cum_[j] + part) / cum_.back();
}

double LinearDensity::quantile(double u) const {
  const double target = std::clamp(u, 0.0, 1.0) * cum_.back();
  auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
  std::size_t j = it == cum_.begin() ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
  if (j >= knots_.size() - 1) j = knots_.size() - 2;
  const double m = (target - cum_[j]) / dx_;
  const double r0 = knots_[j], r1 = knots_[j + 1];
  const double disc = std::max(0.0, r0 * r0 + 2.0 * (r1 - r0) * m);
  const double denom = r0 + std::sqrt(disc);
  const double s = denom > 0.0 ? 2.0 * m / denom : 0.0;
  return min_ + dx_ * (static_cast<double>(j) + std::clamp(s, 0.0, 1.0));
}

std::vector<double> closed_density(const WaveFunction& psi, std::size_t& nx_c, std::size_t& ny_c) {
  const Grid& g = psi.grid();
  nx_c = g.nx() + 1;
  ny_c = g.dims() == 2 ? g.ny() + 1 : 1;
  const bool wall_x = g.axis(0).boundary == Boundary::dirichlet;
  const bool wall_y = g.dims() == 2 && g.axis(1).boundary == Boundary::dirichlet;
  std::vector<double> out(nx_c * ny_c, 0.0);
  for (std::size_t i = 0; i < nx_c; ++i) {
    if (i == g.nx() && wall_x) continue;
    const std::size_t si = i == g.nx() ? 0 : i;
    for (std::size_t j = 0; j < ny_c; ++j) {
      if (g.dims() == 2 && j == g.ny() && wall_y) continue;
      const std::size_t sj = (g.dims() == 2 && j == g.ny()) ? 0 : j;
      out[i * ny_c + j] = std::norm(psi.at(si, sj));
    }
  }
  return out;
}

namespace {

double trapezoid(const double* f, std::size_t n, std::size_t stride, double dx) {
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) acc += 0.5 * dx * (f[j * stride] + f[(j + 1) * stride]);
  return acc;
}

} // namespace

LinearDensity marginal(const WaveFunction& psi, int axis) {
  const Grid& g = psi.grid();
  std::size_t cx = 0, cy = 0;
  const auto rho = closed_density(psi, cx, cy);
  if (g.dims() == 1) return LinearDensity(g.axis(0).min, g.axis(0).dx(), rho);
  std::vector<double> knots;
  if (axis == 0) {
    for (std::size_t i = 0; i < cx; ++i) knots.push_back(trapezoid(rho.data() + i * cy, cy, 1, g.axis(1).dx()));
  } else {
    for (std::size_t j = 0; j < cy; ++j) knots.push_back(trapezoid(rho.data() + j, cx, cy, g.axis(0).dx()));
  }
  return LinearDensity(g.axis(axis).min, g.axis(axis).dx(), std::move(knots));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

} // namespace

SubstreamRng::SubstreamRng(std::uint64_t seed, std::uint64_t id) : engine_(splitmix64(splitmix64(seed) ^ id)) {}

double SubstreamRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double sample_conditional(const WaveFunction& psi, double x, SubstreamRng& rng) {
  const Grid& g = psi.grid();
  if (g.dims() != 2) throw PreconditionError("conditional sampling needs a 2D state");
  std::size_t cx = 0, cy = 0;
  const auto rho = closed_density(psi, cx, cy);
  const Cell c = locate(g.axis(0), x);
  std::vector<double> knots(cy);
  for (std::size_t j = 0; j < cy; ++j) knots[j] = (1.0 - c.s) * rho[c.i0 * cy + j] + c.s * rho[c.i1 * cy + j];
  return LinearDensity(g.axis(1).min, g.axis(1).dx(), std::move(knots)).quantile(rng.uniform());
}

std::vector<Point> sample_quantum_equilibrium(const WaveFunction& psi, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw PreconditionError("sample_quantum_equilibrium: n must be >= 1");
  const Grid& g = psi.grid();
  const LinearDensity mx = marginal(psi, 0);
  std::vector<Point> out(n, Point{0.0, 0.0});
  if (g.dims() == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      SubstreamRng rng(seed, i);
      out[i][0] = mx.quantile(rng.uniform());
    }
    return out;
  }
  std::size_t cx = 0, cy = 0;
  const auto rho = closed_density(psi, cx, cy);
  for (std::size_t i = 0; i < n; ++i) {
    SubstreamRng rng(seed, i);
    const double x = mx.quantile(rng.uniform());
    const Cell c = locate(g.axis(0), x);
    std::vector<double> knots(cy);
    for (std::size_t j = 0; j < cy; ++j) knots[j] = (1.0 - c.s) * rho[c.i0 * cy + j] + c.s * rho[c.i1 * cy + j];
    out[i] = {x, LinearDensity(g.axis(1).min, g.axis(1).dx(), std::move(knots)).quantile(rng.uniform())};
  }
  return out;
}

namespace {

double ks_1d(std::vector<double> xs, const LinearDensity& f) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const auto n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double F = f.cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
  }
  return d;
}

} // namespace

double ks_statistic(const std::vector<Point>& points, const WaveFunction& psi) {
  const int dims = psi.grid().dims();
  double worst = 0.0;
  for (int a = 0; a < dims; ++a) {
    std::vector<double> xs(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) xs[i] = points[i][static_cast<std::size_t>(a)];
    worst = std::max(worst, ks_1d(std::move(xs), marginal(psi, a)));
  }
  return worst;
}

std::vector<Point> positions_at(const Ensemble& ensemble, double t) {
  std::vector<Point> out;
  out.reserve(ensemble.trajectories.size());
  for (const auto& tr : ensemble.trajectories) {
    const auto it = std::find_if(tr.samples.begin(), tr.samples.end(), [&](const Sample& s) {
      return std::abs(s.t - t) <= 1e-12 * std::max(1.0, std::abs(t));
    });
    if (it == tr.samples.end()) throw PreconditionError("time is not on the ensemble's sample axis");
    out.push_back(it->q);
  }
  return out;
}

double equivariance_check(const Ensemble& ensemble, const WaveFunction& psi_t, double t) {
  return ks_statistic(positions_at(ensemble, t), psi_t);
}

} // namespace bohmlab::bohm
