#pragma once

// Grids, wavefunction storage and the quadrature shared by every other module.
//
// Units follow hbar = m = 1 unless a caller passes explicit values. Amplitudes
// carry length^(-dims/2) so that sum |psi|^2 dV = 1 for a normalized state.

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace bohmlab::qgrid {

using cplx = std::complex<double>;
using Point = std::array<double, 2>; // 1D states only use the first entry

enum class Boundary { periodic, dirichlet };

/// One evenly spaced axis. Node j sits at min + j*dx, j in [0, n).
/// A dirichlet axis has hard walls at min and max: node 0 is a wall node and
/// the wall at max is the (unstored) node n.
struct Axis {
  double min = 0.0;
  double max = 1.0;
  std::size_t n = 16;
  Boundary boundary = Boundary::periodic;

  double dx() const noexcept { return (max - min) / static_cast<double>(n); }
  double length() const noexcept { return max - min; }
  double point(std::size_t j) const noexcept { return min + static_cast<double>(j) * dx(); }
  /// Grid-space spectral limit pi/dx.
  double nyquist() const noexcept;

  bool operator==(const Axis&) const = default;
};

Axis make_axis(double min, double max, std::size_t n, Boundary boundary = Boundary::periodic);

/// Tensor-product grid of one or two axes. Storage is x-major:
/// flat index = ix * ny + iy.
class Grid {
public:
  static Grid line(const Axis& x);
  static Grid plane(const Axis& x, const Axis& y);

  int dims() const noexcept { return dims_; }
  const Axis& axis(int a) const { return axes_.at(static_cast<std::size_t>(a)); }
  std::size_t nx() const noexcept { return axes_[0].n; }
  std::size_t ny() const noexcept { return dims_ == 2 ? axes_[1].n : 1; }
  std::size_t size() const noexcept { return nx() * ny(); }
  double cell_volume() const noexcept;
  std::size_t index(std::size_t ix, std::size_t iy = 0) const noexcept { return ix * ny() + iy; }
  Point point(std::size_t ix, std::size_t iy = 0) const noexcept;

  /// Closed bounds: [min, max] on every axis.
  bool contains(const Point& q) const noexcept;

  bool operator==(const Grid&) const = default;

private:
  Grid() = default;
  int dims_ = 1;
  std::array<Axis, 2> axes_{};
};

/// Periodic 1D grid over [min, max) with n points (power of two, n >= 16).
Grid make_grid(double min, double max, std::size_t n);
/// Hard-walled 1D grid over [0, L].
Grid make_well_grid(double length, std::size_t n);
Grid make_grid_2d(const Axis& x, const Axis& y);

/// Complex amplitude field on a grid. Immutable after construction.
class WaveFunction {
public:
  WaveFunction(Grid grid, std::vector<cplx> amplitudes);

  const Grid& grid() const noexcept { return grid_; }
  std::span<const cplx> amplitudes() const noexcept { return amplitudes_; }
  cplx at(std::size_t ix, std::size_t iy = 0) const { return amplitudes_[grid_.index(ix, iy)]; }
  std::vector<cplx> release() && { return std::move(amplitudes_); }

private:
  Grid grid_;
  std::vector<cplx> amplitudes_;
};

enum class PotentialKind { free, infinite_well, harmonic, grid_sampled };

/// Real potential sampled on a grid. The infinite well carries zeros inside
/// the box; its walls live in the dirichlet boundary of the grid axis.
struct Potential {
  PotentialKind kind = PotentialKind::free;
  double well_length = 0.0;
  double omega = 0.0;
  std::vector<double> values;

  static Potential free(const Grid& grid);
  static Potential infinite_well(const Grid& grid);
  /// V = m omega^2 (x - center)^2 / 2 along axis 0.
  static Potential harmonic(const Grid& grid, double omega, double center = 0.0, double mass = 1.0);
  static Potential sampled(const Grid& grid, std::vector<double> values);

  bool is_zero() const noexcept;
};

/// psi(x) ~ exp(-(x - x0)^2 / (4 sigma^2)) exp(i k0 x), normalized.
/// Rejects sigma < 4 dx and |k0| > nyquist/2 with a ResolutionError.
WaveFunction gaussian_packet(const Grid& grid, double x0, double sigma, double k0);

/// sqrt(2/L) sin(m pi x / L) on a dirichlet grid, m >= 1.
WaveFunction well_eigenstate(const Grid& grid, int mode);

/// Psi(x, y) = a(x) b(y) on the plane spanned by the two 1D grids.
WaveFunction product_state(const WaveFunction& a, const WaveFunction& b);

/// Pointwise sum of coeffs[i] * states[i], normalized.
WaveFunction superpose(std::span<const cplx> coeffs, std::span<const WaveFunction> states);

/// sum conj(a) b dV.
cplx inner_product(const WaveFunction& a, const WaveFunction& b);

/// sum |a| |b| dV; bounds |inner_product(a, b)| from above.
double pointwise_overlap(const WaveFunction& a, const WaveFunction& b);

std::vector<double> density(const WaveFunction& psi);
double norm(const WaveFunction& psi);
WaveFunction normalize(const WaveFunction& psi);

/// <x> (1D) or (<x>, <y>) (2D); divides by the squared norm.
Point expectation_position(const WaveFunction& psi);
/// <k> per axis, computed with the spectral derivative; divides by the squared norm.
Point expectation_momentum(const WaveFunction& psi);

/// Marginal density along one axis of a 2D state (identity copy in 1D).
std::vector<double> marginal_density(const WaveFunction& psi, int axis);

void require_same_grid(const WaveFunction& a, const WaveFunction& b, const char* op);

} // namespace bohmlab::qgrid
