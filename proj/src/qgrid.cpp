#include "bohmlab/qgrid.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "bohmlab/error.hpp"
#include "bohmlab/fft.hpp"
#include "bohmlab/spectral.hpp"

namespace bohmlab::qgrid {

double Axis::nyquist() const noexcept { return std::numbers::pi / dx(); }

Axis make_axis(double min, double max, std::size_t n, Boundary boundary) {
  if (!std::isfinite(min) || !std::isfinite(max) || !(max > min)) {
    throw PreconditionError("grid axis requires max > min");
  }
  if (n < 16 || !is_power_of_two(n)) {
    throw PreconditionError("grid axis point count must be a power of two >= 16, got " + std::to_string(n));
  }
  return Axis{min, max, n, boundary};
}

Grid Grid::line(const Axis& x) {
  Grid g;
  g.dims_ = 1;
  g.axes_[0] = x;
  g.axes_[1] = Axis{0.0, 1.0, 1, Boundary::periodic};
  return g;
}

Grid Grid::plane(const Axis& x, const Axis& y) {
  Grid g;
  g.dims_ = 2;
  g.axes_[0] = x;
  g.axes_[1] = y;
  return g;
}

double Grid::cell_volume() const noexcept {
  return dims_ == 2 ? axes_[0].dx() * axes_[1].dx() : axes_[0].dx();
}

Point Grid::point(std::size_t ix, std::size_t iy) const noexcept {
  return {axes_[0].point(ix), dims_ == 2 ? axes_[1].point(iy) : 0.0};
}

bool Grid::contains(const Point& q) const noexcept {
  for (int a = 0; a < dims_; ++a) {
    const auto& ax = axes_[static_cast<std::size_t>(a)];
    const double v = q[static_cast<std::size_t>(a)];
    if (!(v >= ax.min && v <= ax.max)) return false;
  }
  return true;
}

Grid make_grid(double min, double max, std::size_t n) { return Grid::line(make_axis(min, max, n)); }

Grid make_well_grid(double length, std::size_t n) {
  return Grid::line(make_axis(0.0, length, n, Boundary::dirichlet));
}

Grid make_grid_2d(const Axis& x, const Axis& y) { return Grid::plane(x, y); }

WaveFunction::WaveFunction(Grid grid, std::vector<cplx> amplitudes)
    : grid_(std::move(grid)), amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.size() != grid_.size()) {
    throw PreconditionError("wavefunction amplitude count does not match grid");
  }
  for (const auto& z : amplitudes_) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw NumericalGuardError("wavefunction contains a non-finite amplitude");
    }
  }
}

Potential Potential::free(const Grid& grid) {
  return Potential{PotentialKind::free, 0.0, 0.0, std::vector<double>(grid.size(), 0.0)};
}

Potential Potential::infinite_well(const Grid& grid) {
  if (grid.axis(0).boundary != Boundary::dirichlet) {
    throw PreconditionError("infinite well needs a dirichlet system axis");
  }
  return Potential{PotentialKind::infinite_well, grid.axis(0).length(), 0.0, std::vector<double>(grid.size(), 0.0)};
}

Potential Potential::harmonic(const Grid& grid, double omega, double center, double mass) {
  Potential v{PotentialKind::harmonic, 0.0, omega, std::vector<double>(grid.size(), 0.0)};
  for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
    const double u = grid.axis(0).point(ix) - center;
    for (std::size_t iy = 0; iy < grid.ny(); ++iy) v.values[grid.index(ix, iy)] = 0.5 * mass * omega * omega * u * u;
  }
  return v;
}

Potential Potential::sampled(const Grid& grid, std::vector<double> values) {
  if (values.size() != grid.size()) throw PreconditionError("sampled potential size does not match grid");
  for (double v : values) {
    if (!std::isfinite(v)) throw PreconditionError("sampled potential must be finite");
  }
  return Potential{PotentialKind::grid_sampled, 0.0, 0.0, std::move(values)};
}

bool Potential::is_zero() const noexcept {
  for (double v : values) {
    if (v != 0.0) return false;
  }
  return true;
}

void require_same_grid(const WaveFunction& a, const WaveFunction& b, const char* op) {
  if (!(a.grid() == b.grid())) throw PreconditionError(std::string(op) + ": grid mismatch");
}

WaveFunction gaussian_packet(const Grid& grid, double x0, double sigma, double k0) {
  if (grid.dims() != 1) throw PreconditionError("gaussian_packet builds 1D states");
  const Axis& ax = grid.axis(0);
  if (!(x0 >= ax.min && x0 <= ax.max)) {
    throw PreconditionError("gaussian_packet: x0 lies outside the grid");
  }
  if (!(sigma >= 4.0 * ax.dx())) {
    std::ostringstream os;
    os << "gaussian_packet: sigma >= 4*dx violated (sigma=" << sigma << ", 4*dx=" << 4.0 * ax.dx() << ")";
    throw ResolutionError(os.str());
  }
  if (!(std::abs(k0) <= 0.5 * ax.nyquist())) {
    std::ostringstream os;
    os << "gaussian_packet: |k0| <= nyquist/2 violated (|k0|=" << std::abs(k0) << ", nyquist/2=" << 0.5 * ax.nyquist()
       << ")";
    throw ResolutionError(os.str());
  }
  std::vector<cplx> amp(grid.size());
  for (std::size_t j = 0; j < ax.n; ++j) {
    const double x = ax.point(j);
    const double u = x - x0;
    amp[j] = std::exp(-u * u / (4.0 * sigma * sigma)) * std::polar(1.0, k0 * x);
  }
  if (ax.boundary == Boundary::dirichlet) amp[0] = 0.0;
  return normalize(WaveFunction(grid, std::move(amp)));
}

WaveFunction well_eigenstate(const Grid& grid, int mode) {
  if (grid.dims() != 1 || grid.axis(0).boundary != Boundary::dirichlet) {
    throw PreconditionError("well_eigenstate needs a 1D dirichlet grid");
  }
  if (mode < 1) throw PreconditionError("well_eigenstate: mode must be >= 1");
  const Axis& ax = grid.axis(0);
  const double length = ax.length();
  std::vector<cplx> amp(ax.n);
  for (std::size_t j = 1; j < ax.n; ++j) {
    amp[j] = std::sqrt(2.0 / length) * std::sin(mode * std::numbers::pi * (ax.point(j) - ax.min) / length);
  }
  return WaveFunction(grid, std::move(amp));
}

WaveFunction product_state(const WaveFunction& a, const WaveFunction& b) {
  if (a.grid().dims() != 1 || b.grid().dims() != 1) throw PreconditionError("product_state takes two 1D states");
  const Grid grid = Grid::plane(a.grid().axis(0), b.grid().axis(0));
  std::vector<cplx> amp(grid.size());
  for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
    for (std::size_t iy = 0; iy < grid.ny(); ++iy) amp[grid.index(ix, iy)] = a.at(ix) * b.at(iy);
  }
  return WaveFunction(grid, std::move(amp));
}

WaveFunction superpose(std::span<const cplx> coeffs, std::span<const WaveFunction> states) {
  if (coeffs.empty() || coeffs.size() != states.size()) {
    throw PreconditionError("superpose: need one coefficient per state");
  }
  bool any_nonzero = false;
  for (const auto& c : coeffs) any_nonzero = any_nonzero || c != cplx{};
  if (!any_nonzero) throw PreconditionError("superpose: all coefficients are zero");
  const Grid& grid = states[0].grid();
  std::vector<cplx> amp(grid.size(), cplx{});
  for (std::size_t s = 0; s < states.size(); ++s) {
    require_same_grid(states[0], states[s], "superpose");
    const auto src = states[s].amplitudes();
    for (std::size_t i = 0; i < amp.size(); ++i) amp[i] += coeffs[s] * src[i];
  }
  return normalize(WaveFunction(grid, std::move(amp)));
}

cplx inner_product(const WaveFunction& a, const WaveFunction& b) {
  require_same_grid(a, b, "inner_product");
  const auto x = a.amplitudes();
  const auto y = b.amplitudes();
  cplx sum{};
  for (std::size_t i = 0; i < x.size(); ++i) sum += std::conj(x[i]) * y[i];
  return sum * a.grid().cell_volume();
}

double pointwise_overlap(const WaveFunction& a, const WaveFunction& b) {
  require_same_grid(a, b, "pointwise_overlap");
  const auto x = a.amplitudes();
  const auto y = b.amplitudes();
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += std::abs(x[i]) * std::abs(y[i]);
  return sum * a.grid().cell_volume();
}

std::vector<double> density(const WaveFunction& psi) {
  const auto amp = psi.amplitudes();
  std::vector<double> rho(amp.size());
  for (std::size_t i = 0; i < amp.size(); ++i) rho[i] = std::norm(amp[i]);
  return rho;
}

double norm(const WaveFunction& psi) {
  double sum = 0.0;
  for (const auto& z : psi.amplitudes()) sum += std::norm(z);
  return std::sqrt(sum * psi.grid().cell_volume());
}

WaveFunction normalize(const WaveFunction& psi) {
  const double n = norm(psi);
  if (!(n > 0.0)) throw PreconditionError("normalize: zero wavefunction");
  std::vector<cplx> amp(psi.amplitudes().begin(), psi.amplitudes().end());
  for (auto& z : amp) z /= n;
  return WaveFunction(psi.grid(), std::move(amp));
}

Point expectation_position(const WaveFunction& psi) {
  const Grid& g = psi.grid();
  double mass = 0.0;
  Point sum{0.0, 0.0};
  for (std::size_t ix = 0; ix < g.nx(); ++ix) {
    for (std::size_t iy = 0; iy < g.ny(); ++iy) {
      const double rho = std::norm(psi.at(ix, iy));
      const Point q = g.point(ix, iy);
      mass += rho;
      sum[0] += rho * q[0];
      sum[1] += rho * q[1];
    }
  }
  if (!(mass > 0.0)) throw PreconditionError("expectation_position: zero wavefunction");
  return {sum[0] / mass, g.dims() == 2 ? sum[1] / mass : 0.0};
}

Point expectation_momentum(const WaveFunction& psi) {
  const Grid& g = psi.grid();
  const auto amp = psi.amplitudes();
  double mass = 0.0;
  for (const auto& z : amp) mass += std::norm(z);
  if (!(mass > 0.0)) throw PreconditionError("expectation_momentum: zero wavefunction");
  Point out{0.0, 0.0};
  for (int a = 0; a < g.dims(); ++a) {
    const auto grad = spectral_gradient(psi, a);
    // <k> = Re sum conj(psi) (-i d psi) / sum |psi|^2
    double acc = 0.0;
    for (std::size_t i = 0; i < amp.size(); ++i) acc += (std::conj(amp[i]) * grad[i]).imag();
    out[static_cast<std::size_t>(a)] = acc / mass;
  }
  return out;
}

std::vector<double> marginal_density(const WaveFunction& psi, int axis) {
  const Grid& g = psi.grid();
  if (g.dims() == 1) return density(psi);
  std::vector<double> out(axis == 0 ? g.nx() : g.ny(), 0.0);
  const double other = g.axis(axis == 0 ? 1 : 0).dx();
  for (std::size_t ix = 0; ix < g.nx(); ++ix) {
    for (std::size_t iy = 0; iy < g.ny(); ++iy) {
      out[axis == 0 ? ix : iy] += std::norm(psi.at(ix, iy)) * other;
    }
  }
  return out;
}

} // namespace bohmlab::qgrid
