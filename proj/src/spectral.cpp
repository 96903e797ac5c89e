#include "bohmlab/spectral.hpp"

#include <numbers>

#include "bohmlab/error.hpp"

namespace bohmlab::qgrid {

namespace {

std::size_t axis_transform_size(const Grid& grid, int a) {
  if (a >= grid.dims()) return 1;
  const Axis& ax = grid.axis(a);
  return ax.boundary == Boundary::dirichlet ? 2 * ax.n : ax.n;
}

std::vector<double> make_wavenumbers(std::size_t m, double dx) {
  std::vector<double> k(m, 0.0);
  if (m == 1) return k;
  const double base = 2.0 * std::numbers::pi / (static_cast<double>(m) * dx);
  for (std::size_t j = 0; j < m; ++j) {
    const auto jj = static_cast<double>(j);
    k[j] = (j < m / 2) ? base * jj : base * (jj - static_cast<double>(m));
  }
  return k;
}

// Odd extension along one axis of a row-major block with `rows` x `cols`
// entries; `axis` 0 extends rows, 1 extends columns. The wall node 0 and the
// mirror node n are zero by construction.
std::vector<cplx> odd_extend(std::span<const cplx> in, std::size_t rows, std::size_t cols, int axis) {
  if (axis == 0) {
    const std::size_t n = rows;
    std::vector<cplx> out(2 * n * cols, cplx{});
    for (std::size_t j = 1; j < n; ++j) {
      for (std::size_t c = 0; c < cols; ++c) {
        out[j * cols + c] = in[j * cols + c];
        out[(2 * n - j) * cols + c] = -in[j * cols + c];
      }
    }
    return out;
  }
  const std::size_t n = cols;
  std::vector<cplx> out(rows * 2 * n, cplx{});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 1; j < n; ++j) {
      out[r * 2 * n + j] = in[r * cols + j];
      out[r * 2 * n + 2 * n - j] = -in[r * cols + j];
    }
  }
  return out;
}

} // namespace

SpectralBasis::SpectralBasis(const Grid& grid)
    : grid_(grid),
      sizes_{axis_transform_size(grid, 0), axis_transform_size(grid, 1)},
      plans_{Fft(axis_transform_size(grid, 0)), Fft(axis_transform_size(grid, 1))} {
  for (int a = 0; a < 2; ++a) {
    const double dx = a < grid.dims() ? grid.axis(a).dx() : 1.0;
    k_[static_cast<std::size_t>(a)] = make_wavenumbers(sizes_[static_cast<std::size_t>(a)], dx);
  }
}

std::size_t SpectralBasis::node_count(int a, bool closed) const {
  if (a >= grid_.dims()) return 1;
  const Axis& ax = grid_.axis(a);
  return (closed && ax.boundary == Boundary::dirichlet) ? ax.n + 1 : ax.n;
}

std::vector<cplx> SpectralBasis::forward(std::span<const cplx> nodes) const {
  if (nodes.size() != grid_.size()) throw PreconditionError("spectral forward: size mismatch");
  const std::size_t n0 = grid_.nx();
  const std::size_t n1 = grid_.ny();
  const std::size_t m1 = sizes_[1];

  // Axis 1 first, on the unextended axis-0 rows.
  std::vector<cplx> work;
  if (grid_.dims() == 2 && grid_.axis(1).boundary == Boundary::dirichlet) {
    work = odd_extend(nodes, n0, n1, 1);
  } else {
    work.assign(nodes.begin(), nodes.end());
  }
  if (m1 > 1) {
    for (std::size_t r = 0; r < n0; ++r) plans_[1].forward(std::span<cplx>(work.data() + r * m1, m1));
  }
  if (grid_.axis(0).boundary == Boundary::dirichlet) work = odd_extend(work, n0, m1, 0);
  if (m1 == 1) {
    plans_[0].forward(work);
  } else {
    std::vector<cplx> scratch;
    for (std::size_t c = 0; c < m1; ++c) plans_[0].forward_strided(work.data() + c, m1, scratch);
  }
  return work;
}

std::vector<cplx> SpectralBasis::inverse(std::vector<cplx> spectral, bool closed) const {
  if (spectral.size() != spectral_size()) throw PreconditionError("spectral inverse: size mismatch");
  const std::size_t m1 = sizes_[1];
  const std::size_t r0 = node_count(0, closed);
  const std::size_t r1 = node_count(1, closed);

  if (m1 == 1) {
    plans_[0].inverse(spectral);
  } else {
    std::vector<cplx> scratch;
    for (std::size_t c = 0; c < m1; ++c) plans_[0].inverse_strided(spectral.data() + c, m1, scratch);
  }
  // Keep rows [0, r0), then inverse along axis 1 on those rows only.
  spectral.resize(r0 * m1);
  if (m1 > 1) {
    for (std::size_t r = 0; r < r0; ++r) plans_[1].inverse(std::span<cplx>(spectral.data() + r * m1, m1));
  }
  if (r1 != m1) {
    std::vector<cplx> out(r0 * r1);
    for (std::size_t r = 0; r < r0; ++r) {
      for (std::size_t c = 0; c < r1; ++c) out[r * r1 + c] = spectral[r * m1 + c];
    }
    spectral = std::move(out);
  }
  return spectral;
}

void SpectralBasis::differentiate(std::span<cplx> spectral, int a) const {
  const std::size_t m0 = sizes_[0];
  const std::size_t m1 = sizes_[1];
  const auto& k = k_[static_cast<std::size_t>(a)];
  const std::size_t m = sizes_[static_cast<std::size_t>(a)];
  for (std::size_t i0 = 0; i0 < m0; ++i0) {
    for (std::size_t i1 = 0; i1 < m1; ++i1) {
      const std::size_t j = a == 0 ? i0 : i1;
      cplx& z = spectral[i0 * m1 + i1];
      if (m % 2 == 0 && j == m / 2) {
        z = 0.0;
      } else {
        z *= cplx(0.0, k[j]);
      }
    }
  }
}

std::vector<cplx> spectral_gradient(const WaveFunction& psi, int axis) {
  if (axis < 0 || axis >= psi.grid().dims()) throw PreconditionError("spectral_gradient: axis out of range");
  const SpectralBasis basis(psi.grid());
  auto spec = basis.forward(psi.amplitudes());
  basis.differentiate(spec, axis);
  return basis.inverse(std::move(spec), false);
}

} // namespace bohmlab::qgrid
