#pragma once

// Guiding equation dq_k/dt = (hbar/m_k) Im(d_k psi / psi), trajectory
// integration through a time-interpolated field, quantum-equilibrium
// sampling and the equivariance diagnostic.

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "bohmlab/propagate.hpp"
#include "bohmlab/qgrid.hpp"

namespace bohmlab::bohm {

using qgrid::cplx;
using qgrid::Grid;
using qgrid::Point;
using qgrid::WaveFunction;

struct Sample {
  double t = 0.0;
  Point q{0.0, 0.0};
  Point v{0.0, 0.0};
  bool regularized = false;
};

struct Trajectory {
  std::size_t id = 0;
  std::vector<Sample> samples;
};

struct Ensemble {
  std::vector<Trajectory> trajectories;
  std::uint64_t seed = 0;
  std::string psi_ref;
};

struct FieldOptions {
  double eps_node = 1e-12;
  /// Base integration step; the node clamp speed on axis k is dx_k / dt_traj.
  double dt_traj = 1e-3;
  int max_halvings = 8;
  propagate::Units units;
};

struct Velocity {
  Point v{0.0, 0.0};
  bool regularized = false;
};

/// psi and its spectral gradient on the closed node lattice of one snapshot.
/// Dirichlet axes include the far wall node; periodic axes repeat node 0 at
/// max so that bilinear interpolation covers [min, max] on every axis.
class FieldFrame {
public:
  FieldFrame(const WaveFunction& psi, double t);

  struct Local {
    cplx psi;
    std::array<cplx, 2> grad;
  };

  const Grid& grid() const noexcept { return grid_; }
  double t() const noexcept { return t_; }
  double max_density() const noexcept { return max_density_; }
  /// Bilinear interpolation at q; throws NumericalGuardError outside the grid.
  Local at(const Point& q) const;
  /// sum conj(this) other over the stored (open) nodes.
  cplx overlap(const FieldFrame& other) const;

private:
  Grid grid_;
  double t_;
  std::size_t cx_, cy_; // closed node counts
  std::vector<cplx> psi_;
  std::array<std::vector<cplx>, 2> grad_;
  double max_density_ = 0.0;
};

/// Velocity from local values; applies the node guard.
Velocity guided_velocity(const FieldFrame::Local& local, double max_density, const Grid& grid,
                         const FieldOptions& opts);

/// Guiding velocity of psi at q.
Velocity velocity_field(const WaveFunction& psi, const Point& q, const FieldOptions& opts = {});

/// Integrates a set of trajectories through a stream of field frames. Each
/// call to advance() moves every trajectory from the previous frame's time
/// to the new frame's time and records one sample there.
class EnsembleIntegrator {
public:
  EnsembleIntegrator(std::vector<Point> q0, FieldOptions opts, unsigned threads = 1);

  /// Records the t0 samples; must be called once before advance().
  void start(const FieldFrame& f0);
  /// With record = false the trajectories move but keep no sample.
  void advance(const FieldFrame& next, bool record = true);
  /// Current positions, in id order.
  std::vector<Point> positions() const;
  Ensemble finish(std::uint64_t seed, std::string psi_ref) &&;

private:
  std::vector<Trajectory> trajectories_;
  std::vector<Point> q_;
  std::vector<char> pending_; // guard fired since the last recorded sample
  FieldOptions opts_;
  unsigned threads_;
  std::unique_ptr<FieldFrame> prev_;
};

/// Single trajectory through a propagated timeline.
Trajectory integrate_trajectory(const propagate::Timeline& timeline, const Point& q0, double dt_traj,
                                const FieldOptions& opts = {});

/// Integrates trajectories for every q0 through the timeline.
Ensemble integrate_ensemble(const propagate::Timeline& timeline, const std::vector<Point>& q0, const FieldOptions& opts,
                            unsigned threads, std::uint64_t seed, std::string psi_ref);

/// Piecewise-linear density on knots min + j dx, j in [0, knots.size()).
class LinearDensity {
public:
  LinearDensity(double min, double dx, std::vector<double> knots);
  double total() const noexcept { return cum_.back(); }
  /// Normalized cumulative distribution.
  double cdf(double x) const;
  /// Inverse of cdf for u in [0, 1).
  double quantile(double u) const;

private:
  double min_, dx_;
  std::vector<double> knots_;
  std::vector<double> cum_;
};

/// Closed-lattice density (see FieldFrame) of psi, nx_c * ny_c values.
std::vector<double> closed_density(const WaveFunction& psi, std::size_t& nx_c, std::size_t& ny_c);

/// Marginal of the bilinear density interpolant along `axis`.
LinearDensity marginal(const WaveFunction& psi, int axis);

/// Deterministic uniform in [0, 1) stream for (seed, id).
class SubstreamRng {
public:
  SubstreamRng(std::uint64_t seed, std::uint64_t id);
  double uniform();

private:
  std::mt19937_64 engine_;
};

/// y drawn from the conditional density |psi(x, .)|^2 of a 2D state.
double sample_conditional(const WaveFunction& psi, double x, SubstreamRng& rng);

/// n points distributed as |psi|^2; point i uses substream (seed, i).
std::vector<Point> sample_quantum_equilibrium(const WaveFunction& psi, std::size_t n, std::uint64_t seed);

/// KS distance between the points and |psi|^2 (max over both marginals in 2D).
double ks_statistic(const std::vector<Point>& points, const WaveFunction& psi);

/// Positions of every trajectory at sample time t; throws if t is not sampled.
std::vector<Point> positions_at(const Ensemble& ensemble, double t);

double equivariance_check(const Ensemble& ensemble, const WaveFunction& psi_t, double t);

} // namespace bohmlab::bohm
