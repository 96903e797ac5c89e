#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace bohmlab::qgrid {

using cplx = std::complex<double>;

bool is_power_of_two(std::size_t n) noexcept;

/// In-place FFT plan for one power-of-two transform length (FFTW backend).
///
/// Forward uses exp(-2 pi i jk/n); `inverse` applies exp(+2 pi i jk/n) and
/// the 1/n scale, so inverse(forward(x)) == x up to rounding. A plan is
/// immutable after construction and can be shared between threads.
class Fft {
public:
  explicit Fft(std::size_t n);

  std::size_t size() const noexcept { return n_; }

  void forward(std::span<cplx> data) const;
  void inverse(std::span<cplx> data) const;

  /// Strided variants operate on data[offset + j*stride], j in [0, n),
  /// using `scratch` (resized as needed) as the contiguous work buffer.
  void forward_strided(cplx* base, std::size_t stride, std::vector<cplx>& scratch) const;
  void inverse_strided(cplx* base, std::size_t stride, std::vector<cplx>& scratch) const;

private:
  void transform(std::span<cplx> data, bool inverse) const;

  std::size_t n_;
  std::shared_ptr<void> forward_plan_;
  std::shared_ptr<void> inverse_plan_;
};

} // namespace bohmlab::qgrid
