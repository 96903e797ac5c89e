#pragma once

// Unitary evolution under i hbar dPsi/dt = -sum hbar^2/(2 m_k) d_k^2 Psi + V Psi.
//
// Both schemes are symmetric (Strang) splittings: half kinetic, potential,
// half kinetic. The kinetic factor is diagonal in the Fourier basis of the
// periodic axes and in the sine basis of dirichlet axes, so with V = 0 a step
// is exact for any dt.

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "bohmlab/qgrid.hpp"

namespace bohmlab::propagate {

using qgrid::cplx;
using qgrid::Grid;
using qgrid::Potential;
using qgrid::WaveFunction;

enum class Scheme { split_step_periodic, sine_spectral_dirichlet };

struct Units {
  double hbar = 1.0;
  std::array<double, 2> mass{1.0, 1.0}; // per axis: system, environment
};

/// The scheme names the treatment of the system axis (axis 0). On 2D grids
/// the environment axis follows its own boundary.
struct PropagatorSpec {
  Scheme scheme = Scheme::split_step_periodic;
  double dt = 1e-3;
  Potential potential;
  std::optional<std::vector<double>> interaction; // V_int(x, y), 2D only
  Units units;
};

/// Throws PreconditionError when the spec cannot drive states on `grid`.
void validate(const PropagatorSpec& spec, const Grid& grid);

/// Number of dt steps in t_final; throws when t_final is not a multiple of dt.
std::size_t step_count(double t_final, double dt);

WaveFunction step(const WaveFunction& psi, const PropagatorSpec& spec);

struct Snapshot {
  std::size_t step = 0;
  double t = 0.0;
  WaveFunction psi;
};

using Timeline = std::vector<Snapshot>;
using SnapshotSink = std::function<void(const Snapshot&)>;

/// Streams the initial state, every `stride`-th step and the final state
/// (once) to `sink`. Only the current state is held in memory.
void evolve_streaming(const WaveFunction& psi, const PropagatorSpec& spec, double t_final, std::size_t stride,
                      const SnapshotSink& sink, double t_start = 0.0);

Timeline evolve(const WaveFunction& psi, const PropagatorSpec& spec, double t_final, std::size_t stride);

/// evolve on a 2D system x environment grid; the spec must carry an
/// interaction (possibly all zeros).
Timeline evolve_2d_coupled(const WaveFunction& psi, const PropagatorSpec& spec, double t_final, std::size_t stride);

/// <H> for the spec's Hamiltonian.
double energy(const WaveFunction& psi, const PropagatorSpec& spec);

/// max_i |(<x>_{i+1} - <x>_{i-1}) / (t_{i+1} - t_{i-1}) - hbar <k>_i / m| over
/// interior snapshots, axis 0.
double ehrenfest_residual(const Timeline& timeline, const Units& units = {});

} // namespace bohmlab::propagate
