#pragma once

#include <array>
#include <span>
#include <vector>

#include "bohmlab/fft.hpp"
#include "bohmlab/qgrid.hpp"

namespace bohmlab::qgrid {

/// Fourier representation of fields on a grid.
///
/// Periodic axes transform over their n nodes. Dirichlet axes are oddly
/// extended to 2n nodes (period 2L), which makes the sine-series
/// representation of a wall-vanishing field exact under the FFT.
class SpectralBasis {
public:
  explicit SpectralBasis(const Grid& grid);

  const Grid& grid() const noexcept { return grid_; }
  /// Transform length along axis a (n or 2n).
  std::size_t transform_size(int a) const { return sizes_[static_cast<std::size_t>(a)]; }
  std::size_t spectral_size() const noexcept { return sizes_[0] * sizes_[1]; }
  std::span<const double> wavenumbers(int a) const { return k_[static_cast<std::size_t>(a)]; }

  /// Node values (grid.size()) -> spectral coefficients.
  std::vector<cplx> forward(std::span<const cplx> nodes) const;

  /// Spectral coefficients -> node values. With `closed`, dirichlet axes also
  /// return the wall node at max, giving n+1 nodes on those axes.
  std::vector<cplx> inverse(std::vector<cplx> spectral, bool closed = false) const;

  /// Node count along axis a in the output of inverse(.., closed).
  std::size_t node_count(int a, bool closed) const;

  /// Multiplies spectral data by i k_a (the Nyquist mode is zeroed).
  void differentiate(std::span<cplx> spectral, int a) const;

private:
  Grid grid_;
  std::array<std::size_t, 2> sizes_{1, 1};
  std::array<std::vector<double>, 2> k_;
  std::array<Fft, 2> plans_;
};

/// First derivative along axis a on the grid nodes.
std::vector<cplx> spectral_gradient(const WaveFunction& psi, int axis);

} // namespace bohmlab::qgrid
