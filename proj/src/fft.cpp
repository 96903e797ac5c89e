#include "bohmlab/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "bohmlab/error.hpp"

namespace bohmlab::qgrid {

namespace {

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::shared_ptr<void> make_plan(std::size_t n, int sign) {
  std::vector<cplx> buf(n);
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  std::lock_guard lock(planner_mutex());
  // ESTIMATE + UNALIGNED: the same algorithm for every call and buffer, so
  // results are bit-identical across runs and threads.
  fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), p, p, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (plan == nullptr) throw Error("FFTW planning failed for length " + std::to_string(n));
  return {plan, [](void* q) {
            std::lock_guard l(planner_mutex());
            fftw_destroy_plan(static_cast<fftw_plan>(q));
          }};
}

} // namespace

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

Fft::Fft(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) {
    throw PreconditionError("FFT length must be a power of two, got " + std::to_string(n));
  }
  forward_plan_ = make_plan(n, FFTW_FORWARD);
  inverse_plan_ = make_plan(n, FFTW_BACKWARD);
}

void Fft::transform(std::span<cplx> a, bool inverse) const {
  if (a.size() != n_) throw PreconditionError("FFT buffer length does not match plan");
  auto* p = reinterpret_cast<fftw_complex*>(a.data());
  fftw_execute_dft(static_cast<fftw_plan>((inverse ? inverse_plan_ : forward_plan_).get()), p, p);
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& z : a) z *= scale;
  }
}

void Fft::forward(std::span<cplx> data) const { transform(data, false); }
void Fft::inverse(std::span<cplx> data) const { transform(data, true); }

void Fft::forward_strided(cplx* base, std::size_t stride, std::vector<cplx>& scratch) const {
  scratch.resize(n_);
  for (std::size_t j = 0; j < n_; ++j) scratch[j] = base[j * stride];
  transform(scratch, false);
  for (std::size_t j = 0; j < n_; ++j) base[j * stride] = scratch[j];
}

void Fft::inverse_strided(cplx* base, std::size_t stride, std::vector<cplx>& scratch) const {
  scratch.resize(n_);
  for (std::size_t j = 0; j < n_; ++j) scratch[j] = base[j * stride];
  transform(scratch, true);
  for (std::size_t j = 0; j < n_; ++j) base[j * stride] = scratch[j];
}

} // namespace bohmlab::qgrid
