#include "bohmlab/scatterdec.hpp"

#include <cmath>
#include <sstream>

#include "bohmlab/error.hpp"
#include "bohmlab/spectral.hpp"

namespace bohmlab::scatterdec {

using qgrid::Boundary;

void validate(const ScatteringModel& model) {
  const Grid& g = model.chi_in.grid();
  if (g.dims() != 1) throw PreconditionError("scattering: chi_in must be a 1D state");
  if (g.axis(0).boundary != Boundary::periodic) throw PreconditionError("scattering: environment axis must be periodic");
  if (std::abs(qgrid::norm(model.chi_in) - 1.0) > 1e-8) throw PreconditionError("scattering: chi_in must be normalized");
  if (!std::isfinite(model.coupling)) throw PreconditionError("scattering: coupling must be finite");
}

namespace {

// chi_in shifted by d via the Fourier shift theorem (exact for band-limited
// data, periodic in y).
std::vector<cplx> shifted(const qgrid::SpectralBasis& basis, const std::vector<cplx>& spec, double d) {
  auto s = spec;
  const auto k = basis.wavenumbers(0);
  for (std::size_t j = 0; j < s.size(); ++j) s[j] *= std::polar(1.0, -k[j] * d);
  return basis.inverse(std::move(s), false);
}

std::vector<cplx> kicked(const WaveFunction& chi, double kappa_x) {
  const auto& ax = chi.grid().axis(0);
  std::vector<cplx> out(ax.n);
  for (std::size_t j = 0; j < ax.n; ++j) out[j] = chi.at(j) * std::polar(1.0, kappa_x * ax.point(j));
  return out;
}

std::vector<cplx> unit(std::vector<cplx> v, double dy) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  const double n = std::sqrt(s * dy);
  for (auto& z : v) z /= n;
  return v;
}

} // namespace

WaveFunction conditional_state(const ScatteringModel& model, double x) {
  validate(model);
  const Grid& g = model.chi_in.grid();
  if (model.kind == ModelKind::momentum_kick) {
    return WaveFunction(g, unit(kicked(model.chi_in, model.coupling * x), g.axis(0).dx()));
  }
  const qgrid::SpectralBasis basis(g);
  const auto spec = basis.forward(model.chi_in.amplitudes());
  return WaveFunction(g, unit(shifted(basis, spec, model.coupling * x), g.axis(0).dx()));
}

void check_guard(const WaveFunction& system, const ScatteringModel& model, double delta) {
  validate(model);
  const auto& sys = system.grid().axis(0);
  const auto& env = model.chi_in.grid().axis(0);
  const auto support = branchlab::epsilon_support(system, delta);
  double xlo = sys.max, xhi = sys.min;
  for (std::size_t c : support) {
    xlo = std::min(xlo, sys.point(c));
    xhi = std::max(xhi, sys.point(c));
  }
  if (model.kind == ModelKind::momentum_kick) {
    const double kmax = std::abs(model.coupling) * std::max(std::abs(xlo), std::abs(xhi));
    if (kmax > 0.5 * env.nyquist()) {
      std::ostringstream os;
      os << "scattering: momentum kick " << kmax << " exceeds the environment grid's nyquist/2 = "
         << 0.5 * env.nyquist();
      throw PreconditionError(os.str());
    }
    return;
  }
  const auto chi_support = branchlab::epsilon_support(model.chi_in, delta);
  double ylo = env.max, yhi = env.min;
  for (std::size_t c : chi_support) {
    ylo = std::min(ylo, env.point(c));
    yhi = std::max(yhi, env.point(c));
  }
  for (const double x : {xlo, xhi}) {
    const double d = model.coupling * x;
    if (ylo + d < env.min || yhi + d > env.max - env.dx()) {
      std::ostringstream os;
      os << "scattering: displaced environment packet leaves [" << env.min << ", " << env.max << "] at x = " << x;
      throw PreconditionError(os.str());
    }
  }
}

WaveFunction apply_scattering(const WaveFunction& system, const ScatteringModel& model, double delta) {
  if (system.grid().dims() != 1) throw PreconditionError("apply_scattering: system must be a 1D state");
  check_guard(system, model, delta);
  const Grid& env = model.chi_in.grid();
  const Grid joint = Grid::plane(system.grid().axis(0), env.axis(0));
  const std::size_t ny = env.nx();
  const double dy = env.axis(0).dx();
  std::vector<cplx> amp(joint.size());
  const qgrid::SpectralBasis basis(env);
  const auto spec = basis.forward(model.chi_in.amplitudes());
  for (std::size_t ix = 0; ix < joint.nx(); ++ix) {
    const cplx psi = system.at(ix);
    if (psi == cplx{}) continue;
    const double x = joint.axis(0).point(ix);
    const auto chi = model.kind == ModelKind::momentum_kick
                         ? unit(kicked(model.chi_in, model.coupling * x), dy)
                         : unit(shifted(basis, spec, model.coupling * x), dy);
    for (std::size_t iy = 0; iy < ny; ++iy) amp[ix * ny + iy] = psi * chi[iy];
  }
  return qgrid::normalize(WaveFunction(joint, std::move(amp)));
}

double DensityMatrix::trace() const { return rho.diagonal().real().sum() * weight(); }

double DensityMatrix::purity() const { return rho.cwiseAbs2().sum() * weight() * weight(); }

double DensityMatrix::hermiticity_error() const {
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff() * weight();
}

double DensityMatrix::min_eigenvalue() const {
  const Eigen::MatrixXcd h = 0.5 * (rho + rho.adjoint()) * weight();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void DensityMatrix::check_invariants(double herm_tol, double trace_tol, double psd_tol) const {
  if (hermiticity_error() > herm_tol) throw NumericalGuardError("density matrix is not Hermitian");
  if (std::abs(trace() - 1.0) > trace_tol) throw NumericalGuardError("density matrix trace is not 1");
  if (min_eigenvalue() < -psd_tol) throw NumericalGuardError("density matrix is not positive semidefinite");
}

DensityMatrix partial_trace(const WaveFunction& psi, TraceOut which, std::size_t max_points) {
  const Grid& g = psi.grid();
  if (g.dims() != 2) throw PreconditionError("partial_trace needs a 2D state");
  if (max_points == 0) throw PreconditionError("partial_trace: max_points must be >= 1");
  const bool keep_x = which == TraceOut::environment;
  const auto& kept = g.axis(keep_x ? 0 : 1);
  const auto& gone = g.axis(keep_x ? 1 : 0);
  std::size_t stride = 1;
  while (kept.n / stride > max_points) stride *= 2;
  const std::size_t m = kept.n / stride;

  // Coefficient matrix restricted to the kept nodes: rows = kept axis.
  Eigen::MatrixXcd c(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(gone.n));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < gone.n; ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          keep_x ? psi.at(i * stride, j) : psi.at(j, i * stride);
    }
  }
  DensityMatrix out{kept, stride, c * c.adjoint() * gone.dx()};
  return out;
}

Eigen::VectorXd schmidt_values(const WaveFunction& psi) {
  const Grid& g = psi.grid();
  if (g.dims() != 2) throw PreconditionError("schmidt_values needs a 2D state");
  Eigen::MatrixXcd c(static_cast<Eigen::Index>(g.nx()), static_cast<Eigen::Index>(g.ny()));
  const double w = std::sqrt(g.cell_volume());
  for (std::size_t i = 0; i < g.nx(); ++i) {
    for (std::size_t j = 0; j < g.ny(); ++j) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = psi.at(i, j) * w;
  }
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(c);
  return svd.singularValues();
}

cplx decoherence_factor(const ScatteringModel& model, double x, double x_prime) {
  return qgrid::inner_product(conditional_state(model, x_prime), conditional_state(model, x));
}

branchlab::OverlapReport condition_reports(const ScatteringModel& model, double x, double x_prime,
                                           const branchlab::Thresholds& thr) {
  return branchlab::overlap_report(conditional_state(model, x), conditional_state(model, x_prime), thr);
}

} // namespace bohmlab::scatterdec
