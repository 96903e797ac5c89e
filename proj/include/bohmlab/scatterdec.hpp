#pragma once

// Single-event scattering of one environment particle off the system:
// |x>|chi_in> -> |x>|chi(x)>, the reduced density matrix and the two
// decoherence conditions on the conditional environment states.

#include <Eigen/Dense>

#include "bohmlab/branchlab.hpp"
#include "bohmlab/qgrid.hpp"

namespace bohmlab::scatterdec {

using qgrid::cplx;
using qgrid::Grid;
using qgrid::WaveFunction;

enum class ModelKind { displacement, momentum_kick };

/// displacement: chi(x)(y) = chi_in(y - g x); momentum_kick: chi(x)(y) =
/// exp(i kappa x y) chi_in(y). `coupling` is g or kappa.
struct ScatteringModel {
  ModelKind kind = ModelKind::displacement;
  double coupling = 0.0;
  WaveFunction chi_in;
};

/// Checks chi_in is a normalized 1D state on a periodic axis.
void validate(const ScatteringModel& model);

/// Conditional environment state chi(x), normalized.
WaveFunction conditional_state(const ScatteringModel& model, double x);

/// Throws PreconditionError when chi(x) would leave the environment grid
/// for some x in the system's epsilon-support.
void check_guard(const WaveFunction& system, const ScatteringModel& model, double delta = 1e-4);

/// Psi(x, y) = psi(x) chi(x)(y) on system-axis x environment-axis.
WaveFunction apply_scattering(const WaveFunction& system, const ScatteringModel& model, double delta = 1e-4);

enum class TraceOut { environment, system };

/// rho(x_i, x_j) on every `stride`-th node of the kept axis (units 1/length).
struct DensityMatrix {
  qgrid::Axis axis;
  std::size_t stride = 1;
  Eigen::MatrixXcd rho;

  double weight() const noexcept { return axis.dx() * static_cast<double>(stride); }
  double point(std::size_t i) const noexcept { return axis.point(i * stride); }
  double trace() const;
  double purity() const;
  double hermiticity_error() const;
  /// Smallest eigenvalue of the dimensionless operator rho * weight.
  double min_eigenvalue() const;
  /// Throws NumericalGuardError naming the first violated invariant.
  void check_invariants(double herm_tol = 1e-10, double trace_tol = 1e-8, double psd_tol = 1e-8) const;
};

/// Reduced state after tracing out one axis. The kept axis is subsampled to
/// at most max_points nodes.
DensityMatrix partial_trace(const WaveFunction& psi, TraceOut which = TraceOut::environment,
                            std::size_t max_points = 512);

/// Singular values of the coefficient matrix Psi(x, y) sqrt(dx dy).
Eigen::VectorXd schmidt_values(const WaveFunction& psi);

/// <chi(x')|chi(x)>.
cplx decoherence_factor(const ScatteringModel& model, double x, double x_prime);

/// overlap_report on chi(x), chi(x').
branchlab::OverlapReport condition_reports(const ScatteringModel& model, double x, double x_prime,
                                           const branchlab::Thresholds& thr = {});

} // namespace bohmlab::scatterdec
