#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "bohmlab/error.hpp"
#include "bohmlab/qgrid.hpp"
#include "bohmlab/spectral.hpp"
#include "test_support.hpp"

using namespace bohmlab;
using namespace bohmlab::qgrid;

namespace {

// Closed-form overlap of two equal-width real Gaussians a distance d apart.
double analytic_gaussian_overlap(double d, double sigma) { return std::exp(-d * d / (8.0 * sigma * sigma)); }

double mass_in(const WaveFunction& psi, double lo, double hi) {
  double m = 0.0;
  const auto& ax = psi.grid().axis(0);
  for (std::size_t j = 0; j < ax.n; ++j) {
    const double x = ax.point(j);
    if (x >= lo && x < hi) m += std::norm(psi.at(j)) * ax.dx();
  }
  return m;
}

} // namespace

TEST_CASE("make_grid spacing and point placement") {
  const Grid g = make_grid(0.0, 1.0, 16);
  CHECK(g.axis(0).dx() == doctest::Approx(1.0 / 16.0));
  CHECK(g.axis(0).point(0) == 0.0);
  CHECK(g.axis(0).point(15) == doctest::Approx(15.0 / 16.0));

  const Grid h = make_grid(-8.0, 8.0, 512);
  CHECK(h.axis(0).dx() == doctest::Approx(1.0 / 32.0));
}

TEST_CASE("make_grid rejects bad input") {
  CHECK_THROWS_AS(make_grid(0.0, 1.0, 17), PreconditionError);
  CHECK_THROWS_AS(make_grid(0.0, 1.0, 8), PreconditionError);
  CHECK_THROWS_AS(make_grid(1.0, 1.0, 16), PreconditionError);
  CHECK_THROWS_AS(make_grid(2.0, 1.0, 16), PreconditionError);
}

TEST_CASE("gaussian_packet: symmetric real packet") {
  const Grid g = make_grid(-8.0, 8.0, 512);
  const auto psi = gaussian_packet(g, 0.0, 1.0, 0.0);
  for (const auto& z : psi.amplitudes()) {
    CHECK(z.imag() == 0.0);
    CHECK(z.real() > 0.0);
  }
  CHECK(std::abs(norm(psi) - 1.0) < 1e-10);
  CHECK(std::abs(expectation_position(psi)[0]) <= g.axis(0).dx());
  CHECK(std::abs(expectation_momentum(psi)[0]) < 1e-10);
}

TEST_CASE("gaussian_packet: mean momentum matches the analytic transform") {
  // |psi~(k)|^2 ~ exp(-2 sigma^2 (k - k0)^2) has mean k0 exactly.
  const Grid g = make_grid(-8.0, 8.0, 512);
  CHECK(std::abs(expectation_momentum(gaussian_packet(g, 0.0, 1.0, 3.0))[0] - 3.0) < 0.01);
  CHECK(std::abs(expectation_momentum(gaussian_packet(g, 0.0, 1.0, 2.5))[0] - 2.5) < 0.01);
  CHECK(std::abs(expectation_position(gaussian_packet(g, 1.5, 0.7, -2.0))[0] - 1.5) <= g.axis(0).dx());
}

TEST_CASE("gaussian_packet resolution guards name the violated bound") {
  const Grid g = make_grid(0.0, 1.0, 256);
  try {
    (void)gaussian_packet(g, 0.5, 0.001, 0.0);
    FAIL("expected ResolutionError");
  } catch (const ResolutionError& e) {
    CHECK(std::string(e.what()).find("sigma >= 4*dx") != std::string::npos);
  }
  try {
    (void)gaussian_packet(g, 0.5, 0.05, 0.6 * g.axis(0).nyquist());
    FAIL("expected ResolutionError");
  } catch (const ResolutionError& e) {
    CHECK(std::string(e.what()).find("nyquist/2") != std::string::npos);
  }
  CHECK_THROWS_AS(gaussian_packet(g, 2.0, 0.05, 0.0), PreconditionError);
}

TEST_CASE("superpose") {
  const Grid g = make_grid(-16.0, 16.0, 1024);
  const auto a = gaussian_packet(g, -6.0, 0.5, 0.0);
  const auto b = gaussian_packet(g, 6.0, 0.5, 1.0);

  SUBCASE("single state is unchanged") {
    const std::vector<cplx> c{1.0};
    const std::vector<WaveFunction> s{a};
    const auto out = superpose(c, s);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(out.amplitudes()[i] - a.amplitudes()[i]) < 1e-14);
  }
  SUBCASE("equal split of disjoint packets") {
    const std::vector<cplx> c{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
    const std::vector<WaveFunction> s{a, b};
    const auto out = superpose(c, s);
    CHECK(mass_in(out, -16.0, 0.0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(mass_in(out, 0.0, 16.0) == doctest::Approx(0.5).epsilon(1e-10));
  }
  SUBCASE("0.3 / 0.7 weights by quadrature") {
    const std::vector<cplx> c{std::sqrt(0.3), cplx(0.0, std::sqrt(0.7))};
    const std::vector<WaveFunction> s{a, b};
    const auto out = superpose(c, s);
    CHECK(std::abs(mass_in(out, -16.0, 0.0) - 0.3) < 1e-10);
    CHECK(std::abs(mass_in(out, 0.0, 16.0) - 0.7) < 1e-10);
  }
  SUBCASE("errors") {
    const std::vector<cplx> zero{0.0, 0.0};
    const std::vector<WaveFunction> s{a, b};
    CHECK_THROWS_AS(superpose(zero, s), PreconditionError);
    const auto other = gaussian_packet(make_grid(-16.0, 16.0, 512), 0.0, 1.0, 0.0);
    const std::vector<cplx> c{1.0, 1.0};
    const std::vector<WaveFunction> mixed{a, other};
    CHECK_THROWS_AS(superpose(c, mixed), PreconditionError);
  }
}

TEST_CASE("inner_product") {
  const Grid g = make_grid(-16.0, 16.0, 512);
  const auto psi = gaussian_packet(g, 0.3, 1.2, 0.7);
  CHECK(std::abs(inner_product(psi, psi) - cplx(1.0)) < 1e-10);

  const Grid well = make_well_grid(1.0, 256);
  CHECK(std::abs(inner_product(well_eigenstate(well, 1), well_eigenstate(well, 2))) < 1e-10);
  CHECK(std::abs(inner_product(well_eigenstate(well, 3), well_eigenstate(well, 3)) - 1.0) < 1e-10);

  for (double d : {0.5, 1.0, 2.0, 4.0}) {
    const auto a = gaussian_packet(g, 0.0, 1.0, 0.0);
    const auto b = gaussian_packet(g, d, 1.0, 0.0);
    CHECK(std::abs(inner_product(a, b).real() - analytic_gaussian_overlap(d, 1.0)) < 1e-10);
  }
  CHECK_THROWS_AS(inner_product(psi, gaussian_packet(make_grid(-16.0, 16.0, 256), 0.0, 1.0, 0.0)),
                  PreconditionError);
}

TEST_CASE("density, norm, normalize") {
  const Grid g = make_grid(-8.0, 8.0, 256);
  const auto psi = testsupport::random_state(g, 7);
  const auto rho = density(psi);
  double total = 0.0;
  for (double r : rho) {
    CHECK(r >= 0.0);
    total += r * g.axis(0).dx();
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(norm(psi) - 1.0) < 1e-8);
  CHECK_THROWS_AS(normalize(WaveFunction(g, std::vector<cplx>(g.size(), 0.0))), PreconditionError);
}

TEST_CASE("wavefunction rejects non-finite amplitudes") {
  const Grid g = make_grid(0.0, 1.0, 16);
  std::vector<cplx> amp(16, 1.0);
  amp[3] = cplx(std::nan(""), 0.0);
  CHECK_THROWS_AS(WaveFunction(g, amp), NumericalGuardError);
}

TEST_CASE("property: Cauchy-Schwarz and the pointwise-overlap bound on random states") {
  for (const bool wall : {false, true}) {
    const Grid g = wall ? make_well_grid(2.0, 128) : make_grid(-4.0, 4.0, 128);
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
      const auto a = testsupport::random_state(g, seed);
      const auto b = testsupport::random_state(g, seed * 7919 + 3, seed % 3 == 0 ? 0.0 : 0.3);
      const double ip = std::abs(inner_product(a, b));
      CHECK(ip <= norm(a) * norm(b) + 1e-10);
      CHECK(ip <= pointwise_overlap(a, b) + 1e-10);
      CHECK(std::abs(inner_product(a, b) - std::conj(inner_product(b, a))) < 1e-14);
    }
  }
}

TEST_CASE("constructors produce unit norm") {
  const Grid g = make_grid(-8.0, 8.0, 128);
  const Grid w = make_well_grid(1.0, 128);
  CHECK(std::abs(norm(gaussian_packet(g, 1.0, 0.5, 2.0)) - 1.0) < 1e-8);
  CHECK(std::abs(norm(gaussian_packet(w, 0.5, 0.05, 20.0)) - 1.0) < 1e-8);
  CHECK(std::abs(norm(well_eigenstate(w, 4)) - 1.0) < 1e-8);
  const auto p = product_state(gaussian_packet(g, 0.0, 1.0, 0.0), gaussian_packet(g, 1.0, 0.5, 0.0));
  CHECK(std::abs(norm(p) - 1.0) < 1e-8);
  CHECK(gaussian_packet(w, 0.5, 0.05, 0.0).at(0) == cplx(0.0));
}

TEST_CASE("spectral gradient of a well eigenstate uses the sine basis") {
  const Grid w = make_well_grid(1.0, 64);
  const auto psi = well_eigenstate(w, 3);
  const auto grad = spectral_gradient(psi, 0);
  for (std::size_t j = 0; j < 64; ++j) {
    const double x = w.axis(0).point(j);
    const double exact = std::sqrt(2.0) * 3.0 * std::numbers::pi * std::cos(3.0 * std::numbers::pi * x);
    CHECK(std::abs(grad[j].real() - exact) < 1e-9);
  }
}
