#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "bohmlab/error.hpp"
#include "bohmlab/propagate.hpp"
#include "bohmlab/qgrid.hpp"

using namespace bohmlab;
using namespace bohmlab::qgrid;
using namespace bohmlab::propagate;

namespace {

double width(const WaveFunction& psi) {
  const double mean = expectation_position(psi)[0];
  const auto& ax = psi.grid().axis(0);
  double acc = 0.0;
  for (std::size_t j = 0; j < ax.n; ++j) acc += std::norm(psi.at(j)) * std::pow(ax.point(j) - mean, 2) * ax.dx();
  return std::sqrt(acc);
}

PropagatorSpec free_spec(const Grid& g, double dt) {
  PropagatorSpec s;
  s.dt = dt;
  s.potential = Potential::free(g);
  return s;
}

PropagatorSpec well_spec(const Grid& g, double dt) {
  PropagatorSpec s;
  s.scheme = Scheme::sine_spectral_dirichlet;
  s.dt = dt;
  s.potential = Potential::infinite_well(g);
  return s;
}

double l2_distance(const WaveFunction& a, const WaveFunction& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.grid().size(); ++i) acc += std::norm(a.amplitudes()[i] - b.amplitudes()[i]);
  return std::sqrt(acc * a.grid().cell_volume());
}

// Dense periodic kinetic matrix -(1/2m) d^2/dx^2 built from the trigonometric
// interpolant directly, independent of the FFT path.
std::vector<double> dense_kinetic(const Axis& ax, double mass) {
  const std::size_t n = ax.n;
  std::vector<double> t(n * n, 0.0);
  const double len = ax.length();
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t l = 0; l < n; ++l) {
      double acc = 0.0;
      for (std::size_t m = 0; m < n; ++m) {
        const int mm = m <= n / 2 ? static_cast<int>(m) : static_cast<int>(m) - static_cast<int>(n);
        const double k = 2.0 * std::numbers::pi * mm / len;
        acc += 0.5 * k * k / mass * std::cos(k * (ax.point(j) - ax.point(l)));
      }
      t[j * n + l] = acc / static_cast<double>(n);
    }
  }
  return t;
}

// RK4 on i dpsi/dt = H psi for H = T_x + T_y + V on a 2D periodic grid.
std::vector<cplx> dense_evolve(const Grid& g, std::vector<cplx> psi, const std::vector<double>& v, double t_final,
                               std::size_t steps) {
  const auto tx = dense_kinetic(g.axis(0), 1.0);
  const auto ty = dense_kinetic(g.axis(1), 1.0);
  const std::size_t nx = g.nx(), ny = g.ny();
  const auto apply = [&](const std::vector<cplx>& in) {
    std::vector<cplx> out(in.size());
    for (std::size_t ix = 0; ix < nx; ++ix) {
      for (std::size_t iy = 0; iy < ny; ++iy) {
        cplx acc = v[ix * ny + iy] * in[ix * ny + iy];
        for (std::size_t l = 0; l < nx; ++l) acc += tx[ix * nx + l] * in[l * ny + iy];
        for (std::size_t l = 0; l < ny; ++l) acc += ty[iy * ny + l] * in[ix * ny + l];
        out[ix * ny + iy] = cplx(0.0, -1.0) * acc;
      }
    }
    return out;
  };
  const double h = t_final / static_cast<double>(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto k1 = apply(psi);
    std::vector<cplx> tmp(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) tmp[i] = psi[i] + 0.5 * h * k1[i];
    const auto k2 = apply(tmp);
    for (std::size_t i = 0; i < psi.size(); ++i) tmp[i] = psi[i] + 0.5 * h * k2[i];
    const auto k3 = apply(tmp);
    for (std::size_t i = 0; i < psi.size(); ++i) tmp[i] = psi[i] + h * k3[i];
    const auto k4 = apply(tmp);
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return psi;
}

} // namespace

TEST_CASE("free Gaussian spreads as sigma sqrt(1 + (t / 2 sigma^2)^2)") {
  const Grid g = make_grid(-32.0, 32.0, 1024);
  const auto psi = gaussian_packet(g, 0.0, 1.0, 0.0);
  const auto tl = evolve(psi, free_spec(g, 0.01), 2.0, 50);
  CHECK(tl.size() == 5);
  CHECK(tl.back().t == doctest::Approx(2.0));
  CHECK(std::abs(width(tl.back().psi) - std::sqrt(2.0)) < 1e-6);
  for (const auto& s : tl) CHECK(std::abs(norm(s.psi) - 1.0) < 1e-10);
}

TEST_CASE("moving free packet: group velocity and Ehrenfest") {
  const Grid g = make_grid(-32.0, 32.0, 1024);
  const auto psi = gaussian_packet(g, -5.0, 1.0, 2.0);
  const auto tl = evolve(psi, free_spec(g, 0.01), 4.0, 20);
  CHECK(std::abs(expectation_position(tl.back().psi)[0] - 3.0) < 1e-6);
  CHECK(ehrenfest_residual(tl) < 1e-3);
}

TEST_CASE("harmonic oscillator: norm, energy, second order convergence") {
  const Grid g = make_grid(-12.0, 12.0, 256);
  const auto psi = gaussian_packet(g, 2.0, 0.5, 0.0);
  auto spec = free_spec(g, 0.01);
  spec.potential = Potential::harmonic(g, 1.0, 0.0, 1.0);

  const double e0 = energy(psi, spec);
  const auto tl = evolve(psi, spec, 2.0, 2);
  for (const auto& s : tl) {
    CHECK(std::abs(norm(s.psi) - 1.0) < 1e-10);
    CHECK(std::abs(energy(s.psi, spec) - e0) / e0 < 1e-3);
  }
  // Classical oscillation of the centre.
  CHECK(std::abs(expectation_position(tl.back().psi)[0] - 2.0 * std::cos(2.0)) < 1e-3);
  CHECK(ehrenfest_residual(tl) < 1e-3);

  const double t = 1.0;
  const auto run = [&](double dt) {
    auto s = spec;
    s.dt = dt;
    return evolve(psi, s, t, 1000000).back().psi;
  };
  const auto ref = run(0.04 / 64.0);
  const double e1 = l2_distance(run(0.04), ref);
  const double e2 = l2_distance(run(0.02), ref);
  const double ratio = e1 / e2;
  CHECK(ratio > 3.6);
  CHECK(ratio < 4.4);
}

TEST_CASE("infinite well: eigenstates are stationary up to a phase") {
  const Grid w = make_well_grid(1.0, 256);
  for (int n : {1, 2, 5}) {
    const auto psi = well_eigenstate(w, n);
    const double energy_n = std::pow(n * std::numbers::pi, 2) / 2.0;
    const double t = 0.37;
    const auto out = evolve(psi, well_spec(w, t / 37.0), t, 37).back().psi;
    const cplx phase = std::polar(1.0, -energy_n * t);
    for (std::size_t j = 0; j < w.size(); ++j) CHECK(std::abs(out.at(j) - phase * psi.at(j)) < 1e-9);
    CHECK(energy(psi, well_spec(w, 0.1)) == doctest::Approx(energy_n).epsilon(1e-9));
  }
}

TEST_CASE("infinite well: walls stay at zero and the packet reflects") {
  const double L = 1.0;
  const Grid w = make_well_grid(L, 1024);
  const double k0 = 40.0 * 2.0 * std::numbers::pi;
  const auto psi = gaussian_packet(w, 0.5, 0.025, k0);
  // Transit from the centre to the right wall and back takes L / k0.
  const double t_back = L / k0;
  const double dt = t_back / 400.0;
  const auto tl = evolve(psi, well_spec(w, dt), t_back, 100);
  for (const auto& s : tl) {
    CHECK(s.psi.at(0) == cplx(0.0));
    CHECK(std::abs(norm(s.psi) - 1.0) < 1e-10);
  }
  CHECK(std::abs(expectation_position(tl[2].psi)[0] - 1.0) < 0.05);
  CHECK(std::abs(expectation_position(tl.back().psi)[0] - 0.5) < 0.01);
  CHECK(expectation_momentum(tl.back().psi)[0] < -0.9 * k0);
}

TEST_CASE("2D: product states stay products without coupling") {
  const Axis ax = make_axis(-8.0, 8.0, 128);
  const Axis ay = make_axis(-6.0, 6.0, 64);
  const auto a = gaussian_packet(Grid::line(ax), -1.0, 0.8, 1.0);
  const auto b = gaussian_packet(Grid::line(ay), 0.5, 0.9, -0.5);
  auto spec = free_spec(make_grid_2d(ax, ay), 0.02);
  spec.interaction = std::vector<double>(ax.n * ay.n, 0.0);
  const auto psi = product_state(a, b);
  const auto out = evolve_2d_coupled(psi, spec, 1.0, 50).back().psi;
  const auto ea = evolve(a, free_spec(a.grid(), 0.02), 1.0, 50).back().psi;
  const auto eb = evolve(b, free_spec(b.grid(), 0.02), 1.0, 50).back().psi;
  double worst = 0.0;
  for (std::size_t ix = 0; ix < ax.n; ++ix) {
    for (std::size_t iy = 0; iy < ay.n; ++iy) worst = std::max(worst, std::abs(out.at(ix, iy) - ea.at(ix) * eb.at(iy)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("2D coupled evolution agrees with a dense RK4 oracle") {
  const Axis ax = make_axis(-8.0, 8.0, 64);
  const Axis ay = make_axis(-8.0, 8.0, 64);
  const Grid g = make_grid_2d(ax, ay);
  const auto psi = product_state(gaussian_packet(Grid::line(ax), -0.5, 1.2, 0.5),
                                 gaussian_packet(Grid::line(ay), 0.3, 1.2, 0.0));
  std::vector<double> vint(g.size());
  for (std::size_t ix = 0; ix < g.nx(); ++ix) {
    for (std::size_t iy = 0; iy < g.ny(); ++iy) vint[g.index(ix, iy)] = 0.3 * ax.point(ix) * ay.point(iy);
  }
  auto spec = free_spec(g, 0.002);
  spec.interaction = vint;
  const double t = 0.4;
  const auto split = evolve_2d_coupled(psi, spec, t, 1000).back().psi;
  const std::vector<cplx> init(psi.amplitudes().begin(), psi.amplitudes().end());
  const auto dense = dense_evolve(g, init, vint, t, 400);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) acc += std::norm(split.amplitudes()[i] - dense[i]);
  CHECK(std::sqrt(acc * g.cell_volume()) < 1e-4);
}

TEST_CASE("validation errors") {
  const Grid g = make_grid(-4.0, 4.0, 64);
  const Grid w = make_well_grid(1.0, 64);
  const auto psi = gaussian_packet(g, 0.0, 0.5, 0.0);
  auto bad = free_spec(g, 0.0);
  CHECK_THROWS_AS(step(psi, bad), PreconditionError);
  CHECK_THROWS_AS(step(gaussian_packet(w, 0.5, 0.1, 0.0), free_spec(w, 0.01)), PreconditionError);
  auto wrong = free_spec(g, 0.01);
  wrong.scheme = Scheme::sine_spectral_dirichlet;
  CHECK_THROWS_AS(step(psi, wrong), PreconditionError);
  auto well_on_periodic = free_spec(w, 0.01);
  well_on_periodic.potential = Potential::infinite_well(w);
  CHECK_THROWS_AS(step(gaussian_packet(w, 0.5, 0.1, 0.0), well_on_periodic), PreconditionError);
  CHECK_THROWS_AS(evolve(psi, free_spec(g, 0.01), 0.015, 1), PreconditionError);
  CHECK_THROWS_AS(evolve_2d_coupled(psi, free_spec(g, 0.01), 0.1, 1), PreconditionError);
}
