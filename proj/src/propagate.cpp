#include "bohmlab/propagate.hpp"

#include <cmath>
#include <string>

#include "bohmlab/error.hpp"
#include "bohmlab/spectral.hpp"

namespace bohmlab::propagate {

using qgrid::Boundary;
using qgrid::PotentialKind;
using qgrid::SpectralBasis;

void validate(const PropagatorSpec& spec, const Grid& grid) {
  if (!(spec.dt > 0.0) || !std::isfinite(spec.dt)) throw PreconditionError("propagator: dt must be > 0");
  if (!(spec.units.hbar > 0.0) || !(spec.units.mass[0] > 0.0) || !(spec.units.mass[1] > 0.0)) {
    throw PreconditionError("propagator: hbar and masses must be > 0");
  }
  const bool wall_axis = grid.axis(0).boundary == Boundary::dirichlet;
  if (spec.potential.kind == PotentialKind::infinite_well && spec.scheme != Scheme::sine_spectral_dirichlet) {
    throw PreconditionError("propagator: infinite well requires the sine_spectral_dirichlet scheme");
  }
  if (spec.scheme == Scheme::split_step_periodic && wall_axis) {
    throw PreconditionError("propagator: split_step_periodic cannot drive a hard-walled axis");
  }
  if (spec.scheme == Scheme::sine_spectral_dirichlet && !wall_axis) {
    throw PreconditionError("propagator: sine_spectral_dirichlet needs a dirichlet system axis");
  }
  if (spec.potential.values.size() != grid.size()) {
    throw PreconditionError("propagator: potential is not sampled on this grid");
  }
  if (spec.interaction) {
    if (grid.dims() != 2) throw PreconditionError("propagator: interaction requires a 2D grid");
    if (spec.interaction->size() != grid.size()) {
      throw PreconditionError("propagator: interaction is not sampled on this grid");
    }
  }
}

std::size_t step_count(double t_final, double dt) {
  if (!(t_final >= 0.0)) throw PreconditionError("evolve: t_final must be >= 0");
  const double ratio = t_final / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw PreconditionError("evolve: t_final is not an integer multiple of dt");
  }
  return static_cast<std::size_t>(rounded);
}

namespace {

// Owns the transforms and phase tables for one (spec, grid) pair and keeps
// the running state in spectral form between steps.
class SplitStepper {
public:
  SplitStepper(const PropagatorSpec& spec, const Grid& grid) : grid_(grid), basis_(grid) {
    validate(spec, grid);
    const auto& units = spec.units;
    for (int a = 0; a < 2; ++a) {
      const auto k = basis_.wavenumbers(a);
      auto& half = half_[static_cast<std::size_t>(a)];
      half.resize(k.size());
      const double m = units.mass[static_cast<std::size_t>(a)];
      for (std::size_t j = 0; j < k.size(); ++j) {
        half[j] = std::polar(1.0, -units.hbar * k[j] * k[j] * spec.dt / (4.0 * m));
      }
    }
    std::vector<double> v = spec.potential.values;
    if (spec.interaction) {
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += (*spec.interaction)[i];
    }
    for (double x : v) has_potential_ = has_potential_ || x != 0.0;
    if (has_potential_) {
      vphase_.resize(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) vphase_[i] = std::polar(1.0, -v[i] * spec.dt / units.hbar);
    }
  }

  void load(std::span<const cplx> nodes) { spec_ = basis_.forward(nodes); }

  void advance() {
    apply_half();
    if (has_potential_) {
      auto nodes = basis_.inverse(spec_, false);
      for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] *= vphase_[i];
      spec_ = basis_.forward(nodes);
    }
    apply_half();
  }

  std::vector<cplx> nodes() const {
    auto out = basis_.inverse(spec_, false);
    zero_walls(out);
    return out;
  }

private:
  void apply_half() {
    const auto& h0 = half_[0];
    const auto& h1 = half_[1];
    const std::size_t m1 = h1.size();
    for (std::size_t i0 = 0; i0 < h0.size(); ++i0) {
      for (std::size_t i1 = 0; i1 < m1; ++i1) spec_[i0 * m1 + i1] *= h0[i0] * h1[i1];
    }
  }

  void zero_walls(std::vector<cplx>& nodes) const {
    if (grid_.axis(0).boundary == Boundary::dirichlet) {
      for (std::size_t iy = 0; iy < grid_.ny(); ++iy) nodes[grid_.index(0, iy)] = 0.0;
    }
    if (grid_.dims() == 2 && grid_.axis(1).boundary == Boundary::dirichlet) {
      for (std::size_t ix = 0; ix < grid_.nx(); ++ix) nodes[grid_.index(ix, 0)] = 0.0;
    }
  }

  Grid grid_;
  SpectralBasis basis_;
  std::array<std::vector<cplx>, 2> half_;
  std::vector<cplx> vphase_;
  bool has_potential_ = false;
  std::vector<cplx> spec_;
};

} // namespace

WaveFunction step(const WaveFunction& psi, const PropagatorSpec& spec) {
  SplitStepper stepper(spec, psi.grid());
  stepper.load(psi.amplitudes());
  stepper.advance();
  return WaveFunction(psi.grid(), stepper.nodes());
}

void evolve_streaming(const WaveFunction& psi, const PropagatorSpec& spec, double t_final, std::size_t stride,
                      const SnapshotSink& sink, double t_start) {
  if (stride == 0) throw PreconditionError("evolve: snapshot stride must be >= 1");
  const std::size_t steps = step_count(t_final, spec.dt);
  SplitStepper stepper(spec, psi.grid());
  sink(Snapshot{0, t_start, psi});
  if (steps == 0) return;
  stepper.load(psi.amplitudes());
  for (std::size_t s = 1; s <= steps; ++s) {
    stepper.advance();
    if (s % stride == 0 || s == steps) {
      sink(Snapshot{s, t_start + static_cast<double>(s) * spec.dt, WaveFunction(psi.grid(), stepper.nodes())});
    }
  }
}

Timeline evolve(const WaveFunction& psi, const PropagatorSpec& spec, double t_final, std::size_t stride) {
  Timeline out;
  evolve_streaming(psi, spec, t_final, stride, [&](const Snapshot& s) { out.push_back(s); });
  return out;
}

Timeline evolve_2d_coupled(const WaveFunction& psi, const PropagatorSpec& spec, double t_final, std::size_t stride) {
  if (psi.grid().dims() != 2) throw PreconditionError("evolve_2d_coupled: state must live on a 2D grid");
  if (!spec.interaction) throw PreconditionError("evolve_2d_coupled: spec carries no interaction");
  return evolve(psi, spec, t_final, stride);
}

double energy(const WaveFunction& psi, const PropagatorSpec& spec) {
  validate(spec, psi.grid());
  const Grid& g = psi.grid();
  const SpectralBasis basis(g);
  const auto amp = psi.amplitudes();
  double kinetic = 0.0;
  for (int a = 0; a < g.dims(); ++a) {
    auto s = basis.forward(amp);
    basis.differentiate(s, a);
    const auto grad = basis.inverse(std::move(s), false);
    double acc = 0.0;
    for (const auto& z : grad) acc += std::norm(z);
    kinetic += spec.units.hbar * spec.units.hbar * acc / (2.0 * spec.units.mass[static_cast<std::size_t>(a)]);
  }
  double pot = 0.0;
  double mass = 0.0;
  for (std::size_t i = 0; i < amp.size(); ++i) {
    const double rho = std::norm(amp[i]);
    double v = spec.potential.values[i];
    if (spec.interaction) v += (*spec.interaction)[i];
    pot += rho * v;
    mass += rho;
  }
  return (kinetic + pot) / mass;
}

double ehrenfest_residual(const Timeline& timeline, const Units& units) {
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < timeline.size(); ++i) {
    const double x_prev = qgrid::expectation_position(timeline[i - 1].psi)[0];
    const double x_next = qgrid::expectation_position(timeline[i + 1].psi)[0];
    const double velocity = (x_next - x_prev) / (timeline[i + 1].t - timeline[i - 1].t);
    const double k = qgrid::expectation_momentum(timeline[i].psi)[0];
    worst = std::max(worst, std::abs(velocity - units.hbar * k / units.mass[0]));
  }
  return worst;
}

} // namespace bohmlab::propagate
