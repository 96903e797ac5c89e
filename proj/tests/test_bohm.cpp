#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "bohmlab/bohm.hpp"
#include "bohmlab/error.hpp"
#include "bohmlab/propagate.hpp"

using namespace bohmlab;
using namespace bohmlab::bohm;
using qgrid::make_grid;
using qgrid::make_well_grid;

namespace {

propagate::PropagatorSpec free_spec(const Grid& g, double dt) {
  propagate::PropagatorSpec s;
  s.dt = dt;
  s.potential = qgrid::Potential::free(g);
  return s;
}

WaveFunction plane_wave(const Grid& g, double k) {
  std::vector<cplx> amp(g.size());
  for (std::size_t j = 0; j < g.nx(); ++j) amp[j] = std::polar(1.0, k * g.axis(0).point(j));
  return qgrid::normalize(WaveFunction(g, std::move(amp)));
}

double normal_cdf(double x, double mean, double sd) { return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0))); }

// Independent KS against a closed-form CDF.
template <class F>
double ks_against(std::vector<double> xs, F cdf) {
  std::sort(xs.begin(), xs.end());
  const auto n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

std::vector<double> xs_of(const std::vector<Point>& p) {
  std::vector<double> out;
  for (const auto& q : p) out.push_back(q[0]);
  return out;
}

} // namespace

TEST_CASE("velocity_field: plane wave moves at k") {
  const Grid g = make_grid(0.0, 1.0, 128);
  const double k = 2.0 * std::numbers::pi * 3.0;
  const auto psi = plane_wave(g, k);
  for (double q : {0.0, 0.1, 0.37, 0.5, 0.99, 1.0}) {
    const auto v = velocity_field(psi, {q, 0.0});
    CHECK(v.v[0] == doctest::Approx(k).epsilon(1e-3));
    CHECK_FALSE(v.regularized);
  }
}

TEST_CASE("velocity_field: real states and symmetric superpositions") {
  const Grid w = make_well_grid(1.0, 128);
  const auto eig = qgrid::well_eigenstate(w, 3);
  for (double q : {0.05, 0.2, 0.41, 0.77}) CHECK(std::abs(velocity_field(eig, {q, 0.0}).v[0]) < 1e-9);

  const Grid g = make_grid(-16.0, 16.0, 1024);
  const std::vector<cplx> c{1.0, 1.0};
  const std::vector<WaveFunction> s{qgrid::gaussian_packet(g, 0.0, 1.0, 2.0), qgrid::gaussian_packet(g, 0.0, 1.0, -2.0)};
  CHECK(std::abs(velocity_field(qgrid::superpose(c, s), {0.0, 0.0}).v[0]) < 1e-9);
}

TEST_CASE("velocity_field: analytic packet phase gradient") {
  // psi ~ exp(-x^2/4 + 2 i x): Im(psi'/psi) = 2 at every x when t = 0.
  const Grid g = make_grid(-16.0, 16.0, 1024);
  const auto psi = qgrid::gaussian_packet(g, 0.0, 1.0, 2.0);
  for (double q : {0.5, -1.3, 2.01}) CHECK(std::abs(velocity_field(psi, {q, 0.0}).v[0] - 2.0) < 1e-3);
  CHECK_THROWS_AS(velocity_field(psi, {17.0, 0.0}), NumericalGuardError);
}

TEST_CASE("velocity_field: node guard clamps and flags") {
  const Grid w = make_well_grid(1.0, 128);
  std::vector<cplx> amp(128);
  // sin(2 pi x) + i sin(4 pi x) / 10^9 has a node at x = 1/2 with a singular phase gradient.
  for (std::size_t j = 1; j < 128; ++j) {
    const double x = w.axis(0).point(j);
    amp[j] = cplx(std::sin(2 * std::numbers::pi * x), 1e-9 * std::sin(6 * std::numbers::pi * x));
  }
  const WaveFunction psi(w, amp);
  FieldOptions o;
  o.dt_traj = 1e-3;
  const auto v = velocity_field(psi, {0.5, 0.0}, o);
  CHECK(v.regularized);
  CHECK(std::abs(v.v[0]) <= w.axis(0).dx() / o.dt_traj + 1e-12);
  CHECK_FALSE(velocity_field(psi, {0.25, 0.0}, o).regularized);
}

TEST_CASE("integrate_trajectory: stationary and ballistic cases") {
  const Grid w = make_well_grid(1.0, 128);
  propagate::PropagatorSpec ws;
  ws.scheme = propagate::Scheme::sine_spectral_dirichlet;
  ws.dt = 1e-3;
  ws.potential = qgrid::Potential::infinite_well(w);
  const auto tl = propagate::evolve(qgrid::well_eigenstate(w, 2), ws, 0.1, 10);
  const auto tr = integrate_trajectory(tl, {0.3, 0.0}, 1e-3);
  CHECK(tr.samples.size() == tl.size());
  for (const auto& s : tr.samples) CHECK(std::abs(s.q[0] - 0.3) < 1e-9);

  const Grid g = make_grid(-16.0, 16.0, 1024);
  const auto tl2 = propagate::evolve(qgrid::gaussian_packet(g, -2.0, 1.0, 2.0), free_spec(g, 0.01), 0.5, 5);
  const auto tr2 = integrate_trajectory(tl2, {-2.0, 0.0}, 0.01);
  for (const auto& s : tr2.samples) {
    const double expect = -2.0 + 2.0 * s.t;
    CHECK(std::abs(s.q[0] - expect) <= 0.01 * std::max(1.0, 2.0 * s.t));
  }
  for (std::size_t i = 1; i < tr2.samples.size(); ++i) CHECK(tr2.samples[i].t > tr2.samples[i - 1].t);
}

TEST_CASE("integrate_trajectory: periodic axes wrap") {
  const Grid g = make_grid(-8.0, 8.0, 256);
  const auto tl = propagate::evolve(qgrid::gaussian_packet(g, 5.0, 0.5, 3.0), free_spec(g, 0.01), 1.5, 10);
  const auto tr = integrate_trajectory(tl, {5.0, 0.0}, 0.01);
  for (const auto& s : tr.samples) CHECK(g.contains(s.q));
  CHECK(tr.samples.back().q[0] == doctest::Approx(-6.5).epsilon(0.01));
  CHECK_THROWS_AS(integrate_trajectory(tl, {7.0, 0.0}, 0.03), PreconditionError);
}

TEST_CASE("property: 1D trajectories never cross") {
  const Grid w = make_well_grid(1.0, 256);
  const std::vector<cplx> c{1.0, 1.0};
  const std::vector<WaveFunction> s{qgrid::gaussian_packet(w, 0.3, 0.05, 40.0), qgrid::gaussian_packet(w, 0.6, 0.05, -30.0)};
  const auto psi = qgrid::superpose(c, s);
  propagate::PropagatorSpec ws;
  ws.scheme = propagate::Scheme::sine_spectral_dirichlet;
  ws.dt = 2e-4;
  ws.potential = qgrid::Potential::infinite_well(w);
  const auto tl = propagate::evolve(psi, ws, 0.04, 1);
  auto q0 = sample_quantum_equilibrium(psi, 200, 11);
  FieldOptions o;
  o.dt_traj = 1e-4;
  const auto ens = integrate_ensemble(tl, q0, o, 2, 11, "two packets");
  std::vector<std::size_t> order(q0.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return q0[a][0] < q0[b][0]; });
  std::size_t violations = 0;
  for (std::size_t k = 0; k < tl.size(); ++k) {
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (!(ens.trajectories[order[i - 1]].samples[k].q[0] <= ens.trajectories[order[i]].samples[k].q[0])) ++violations;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("LinearDensity: cdf inverts quantile") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> knots(33);
    for (auto& k : knots) k = u(rng) < 0.2 ? 0.0 : u(rng);
    knots[5] = 1.0;
    const LinearDensity f(-1.0, 0.125, knots);
    for (int i = 0; i < 100; ++i) {
      const double p = u(rng);
      CHECK(std::abs(f.cdf(f.quantile(p)) - p) < 1e-12);
    }
  }
}

TEST_CASE("sample_quantum_equilibrium: uniform, Gaussian, determinism") {
  const Grid unit = make_grid(0.0, 1.0, 256);
  const auto flat = plane_wave(unit, 2.0 * std::numbers::pi);
  const auto pts = sample_quantum_equilibrium(flat, 10000, 1);
  CHECK(ks_against(xs_of(pts), [](double x) { return std::clamp(x, 0.0, 1.0); }) < 0.02);

  const Grid g = make_grid(-16.0, 16.0, 1024);
  const auto gauss = qgrid::gaussian_packet(g, 0.0, 1.0, 0.0);
  const auto gp = sample_quantum_equilibrium(gauss, 10000, 2);
  double m = 0.0, m2 = 0.0;
  for (const auto& q : gp) {
    m += q[0];
    m2 += q[0] * q[0];
  }
  m /= 1e4;
  CHECK(std::abs(m2 / 1e4 - m * m - 1.0) < 0.05);

  const auto again = sample_quantum_equilibrium(gauss, 10000, 2);
  CHECK(std::equal(gp.begin(), gp.end(), again.begin()));
  CHECK_FALSE(std::equal(gp.begin(), gp.end(), sample_quantum_equilibrium(gauss, 10000, 3).begin()));
  // A prefix of a larger draw is the smaller draw.
  const auto more = sample_quantum_equilibrium(gauss, 20000, 2);
  CHECK(std::equal(gp.begin(), gp.end(), more.begin()));
}

TEST_CASE("sample_quantum_equilibrium: 2D product Gaussian marginals") {
  const auto ax = qgrid::make_axis(-8.0, 8.0, 128);
  const auto ay = qgrid::make_axis(-10.0, 10.0, 128);
  const auto psi = qgrid::product_state(qgrid::gaussian_packet(Grid::line(ax), 1.0, 1.0, 0.0),
                                        qgrid::gaussian_packet(Grid::line(ay), -2.0, 2.0, 0.0));
  const auto pts = sample_quantum_equilibrium(psi, 10000, 9);
  std::vector<double> ys;
  for (const auto& q : pts) ys.push_back(q[1]);
  CHECK(ks_against(xs_of(pts), [](double x) { return normal_cdf(x, 1.0, 1.0); }) < 0.02);
  CHECK(ks_against(ys, [](double y) { return normal_cdf(y, -2.0, 2.0); }) < 0.02);
  CHECK(ks_statistic(pts, psi) < 0.02);
}

TEST_CASE("equivariance on a spreading free packet") {
  const Grid g = make_grid(-16.0, 16.0, 512);
  const auto psi = qgrid::gaussian_packet(g, 0.0, 1.0, 1.0);
  const auto tl = propagate::evolve(psi, free_spec(g, 0.02), 2.0, 10);
  FieldOptions o;
  o.dt_traj = 0.02;
  const auto q0 = sample_quantum_equilibrium(psi, 10000, 4);
  const auto ens = integrate_ensemble(tl, q0, o, 1, 4, "free");
  const double ks0 = equivariance_check(ens, tl.front().psi, 0.0);
  CHECK(ks0 < 0.02);
  for (const auto& s : tl) CHECK(equivariance_check(ens, s.psi, s.t) < 0.03);
  // Oracle: the evolved density is N(t, 1 + t^2/4) in closed form.
  CHECK(ks_against(xs_of(positions_at(ens, 2.0)), [](double x) { return normal_cdf(x, 2.0, std::sqrt(2.0)); }) < 0.03);
  CHECK(equivariance_check(ens, tl.front().psi, 2.0) > 0.3);
  CHECK_THROWS_AS(equivariance_check(ens, tl.back().psi, 0.123), PreconditionError);
}

TEST_CASE("ensemble integration is independent of the thread count") {
  const Grid g = make_grid(-16.0, 16.0, 512);
  const auto psi = qgrid::gaussian_packet(g, 0.0, 1.0, 1.0);
  const auto tl = propagate::evolve(psi, free_spec(g, 0.02), 0.4, 2);
  FieldOptions o;
  o.dt_traj = 0.01;
  const auto q0 = sample_quantum_equilibrium(psi, 500, 8);
  const auto a = integrate_ensemble(tl, q0, o, 1, 8, "");
  const auto b = integrate_ensemble(tl, q0, o, 5, 8, "");
  bool same = true;
  for (std::size_t i = 0; i < q0.size(); ++i) {
    for (std::size_t k = 0; k < tl.size(); ++k) {
      const auto& x = a.trajectories[i].samples[k];
      const auto& y = b.trajectories[i].samples[k];
      same = same && x.q == y.q && x.v == y.v && x.regularized == y.regularized;
    }
  }
  CHECK(same);
}
