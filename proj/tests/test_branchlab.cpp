#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "bohmlab/branchlab.hpp"
#include "bohmlab/error.hpp"
#include "bohmlab/propagate.hpp"
#include "test_support.hpp"

using namespace bohmlab;
using namespace bohmlab::branchlab;
using qgrid::make_grid;
using qgrid::make_well_grid;

namespace {

WaveFunction two_packets(const Grid& g, double xa, double xb, double sigma, double wa) {
  const std::vector<cplx> c{std::sqrt(wa), std::sqrt(1.0 - wa)};
  const std::vector<WaveFunction> s{qgrid::gaussian_packet(g, xa, sigma, 0.0), qgrid::gaussian_packet(g, xb, sigma, 0.0)};
  return qgrid::superpose(c, s);
}

// The symmetric well state: cos-modulated Gaussian centred at L/2.
WaveFunction well_state(const Grid& w, double sigma, double k0) {
  const double x0 = 0.5 * w.axis(0).length();
  const std::vector<cplx> c{std::polar(1.0, -k0 * x0), std::polar(1.0, k0 * x0)};
  const std::vector<WaveFunction> s{qgrid::gaussian_packet(w, x0, sigma, k0), qgrid::gaussian_packet(w, x0, sigma, -k0)};
  return qgrid::superpose(c, s);
}

propagate::PropagatorSpec well_spec(const Grid& w, double dt) {
  propagate::PropagatorSpec s;
  s.scheme = propagate::Scheme::sine_spectral_dirichlet;
  s.dt = dt;
  s.potential = qgrid::Potential::infinite_well(w);
  return s;
}

} // namespace

TEST_CASE("epsilon_support: uniform block and Gaussian quantile") {
  const Grid g = make_grid(0.0, 1.0, 128);
  std::vector<cplx> amp(128, 0.0);
  for (std::size_t j = 30; j < 70; ++j) amp[j] = 1.0;
  const auto flat = qgrid::normalize(WaveFunction(g, amp));
  CHECK(epsilon_support(flat, 0.25).size() == 30); // ceil(0.75 * 40)

  const Grid h = make_grid(-16.0, 16.0, 1024);
  const double sigma = 1.0;
  const auto gauss = qgrid::gaussian_packet(h, 0.0, sigma, 0.0);
  const auto s = epsilon_support(gauss, 0.05);
  const double width = static_cast<double>(s.size()) * h.axis(0).dx();
  CHECK(std::abs(width - 2.0 * 1.959963984540054 * sigma) <= h.axis(0).dx());

  // Small delta: every cell above the noise floor.
  const auto tight = epsilon_support(gauss, 1e-14);
  const auto rho = qgrid::density(gauss);
  const double peak = *std::max_element(rho.begin(), rho.end());
  for (std::size_t j = 0; j < rho.size(); ++j) {
    if (rho[j] > 1e-12 * peak) CHECK(std::binary_search(tight.begin(), tight.end(), j));
  }
  CHECK_THROWS_AS(epsilon_support(gauss, 0.6), PreconditionError);
}

TEST_CASE("overlap_report on structured pairs") {
  const Grid g = make_grid(-32.0, 32.0, 2048);
  const auto a = qgrid::gaussian_packet(g, 0.0, 1.0, 0.0);

  const auto same = overlap_report(a, a);
  CHECK(same.orthogonality == doctest::Approx(1.0));
  CHECK(same.support_overlap == doctest::Approx(1.0));
  CHECK_FALSE(same.verdict_standard);
  CHECK_FALSE(same.verdict_bohmian);

  const auto far = overlap_report(a, qgrid::gaussian_packet(g, 10.0, 1.0, 0.0));
  CHECK(far.orthogonality == doctest::Approx(std::exp(-100.0 / 8.0)).epsilon(1e-6));
  CHECK(far.orthogonality < 1e-5);
  CHECK(far.support_overlap < 1e-4);
  CHECK(far.verdict_standard);
  CHECK(far.verdict_bohmian);
  CHECK(far.support_intersection_mass == 0.0);

  // Oscillator modes psi0 and psi1 ~ x psi0: orthogonal, yet the L1 overlap
  // is E|x| / sqrt(E x^2) = sqrt(2 / pi), up to the quadrature error at the cusp.
  std::vector<cplx> amp(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) amp[j] = g.axis(0).point(j) * a.at(j);
  const auto b = qgrid::normalize(WaveFunction(g, amp));
  const auto modes = overlap_report(a, b);
  CHECK(modes.orthogonality < 1e-10);
  CHECK(modes.support_overlap == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(2e-4));
  CHECK(modes.verdict_standard);
  CHECK_FALSE(modes.verdict_bohmian);
  CHECK(modes.support_intersection_mass > 0.5);

  CHECK_THROWS_AS(overlap_report(a, qgrid::gaussian_packet(make_grid(-32.0, 32.0, 1024), 0.0, 1.0, 0.0)),
                  PreconditionError);
}

TEST_CASE("property: orthogonality never exceeds support overlap") {
  const Grid g = make_grid(-4.0, 4.0, 128);
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    const auto r = overlap_report(testsupport::random_state(g, seed), testsupport::random_state(g, seed + 1000, 0.0));
    CHECK(r.orthogonality <= r.support_overlap + 1e-10);
    CHECK(r.support_overlap <= 1.0 + 1e-10);
    CHECK(r.orthogonality >= 0.0);
  }
}

TEST_CASE("decompose_branches") {
  const Grid g = make_grid(-32.0, 32.0, 2048);
  SUBCASE("single Gaussian") {
    const auto br = decompose_branches(qgrid::gaussian_packet(g, 3.0, 1.0, 2.0));
    REQUIRE(br.size() == 1);
    CHECK(br[0].label == 1);
    CHECK(br[0].weight == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("two packets with weights 0.3 / 0.7") {
    const auto psi = two_packets(g, -5.0, 5.0, 1.0, 0.3);
    const auto br = decompose_branches(psi);
    REQUIRE(br.size() == 2);
    CHECK(std::abs(br[0].weight - 0.3) < 1e-3);
    CHECK(std::abs(br[1].weight - 0.7) < 1e-3);
    CHECK(std::abs(br[0].weight + br[1].weight - 1.0) < 1e-6);
    Region both;
    std::set_intersection(br[0].support.begin(), br[0].support.end(), br[1].support.begin(), br[1].support.end(),
                          std::back_inserter(both));
    CHECK(both.empty());
    for (const auto& b : br) {
      double m = 0.0;
      for (std::size_t c : b.support) m += std::norm(psi.at(c)) * g.axis(0).dx();
      CHECK(m >= (1.0 - 1e-4) * b.weight - 1e-12);
    }
    CHECK(effective_branch(br, {-5.0, 0.0}) == 1);
    CHECK(effective_branch(br, {5.0, 0.0}) == 2);
    CHECK_FALSE(effective_branch(br, {0.0, 0.0}).has_value());
  }
  SUBCASE("fragmented state") {
    std::vector<cplx> amp(g.size(), 0.0);
    for (int k = 0; k < 20; ++k) amp[50 + 100 * k] = 1.0;
    CHECK_THROWS_AS(decompose_branches(qgrid::normalize(WaveFunction(g, amp))), NumericalGuardError);
  }
  SUBCASE("2D blocks are 4-connected components") {
    const auto ax = qgrid::make_axis(-8.0, 8.0, 64);
    const auto ay = qgrid::make_axis(-8.0, 8.0, 64);
    const Grid g2 = qgrid::make_grid_2d(ax, ay);
    std::vector<cplx> amp(g2.size(), 0.0);
    for (std::size_t i = 5; i < 15; ++i) {
      for (std::size_t j = 5; j < 15; ++j) amp[g2.index(i, j)] = 1.0;
      for (std::size_t j = 40; j < 50; ++j) amp[g2.index(i, j)] = std::sqrt(2.0);
    }
    const auto br = decompose_branches(qgrid::normalize(WaveFunction(g2, amp)));
    REQUIRE(br.size() == 2);
    CHECK(br[0].weight == doctest::Approx(1.0 / 3.0));
    CHECK(br[1].weight == doctest::Approx(2.0 / 3.0));
  }
}

TEST_CASE("Born statistics on equilibrium samples") {
  const Grid g = make_grid(-32.0, 32.0, 2048);
  const auto psi = two_packets(g, -6.0, 6.0, 1.0, 0.3);
  const auto br = decompose_branches(psi);
  const auto pts = bohm::sample_quantum_equilibrium(psi, 10000, 21);
  const auto stats = born_statistics(pts, br);
  REQUIRE(stats.labels.size() == 2);
  CHECK(std::abs(stats.labels[0].frequency - 0.3) < 0.015);
  CHECK(std::abs(stats.labels[1].frequency - 0.7) < 0.015);
  CHECK(stats.none_rate < 0.01);
  CHECK(stats.labels[0].ci.lo < stats.labels[0].frequency);
  CHECK(stats.labels[0].ci.hi > stats.labels[0].frequency);

  const auto half = two_packets(g, -6.0, 6.0, 1.0, 0.5);
  const auto hs = born_statistics(bohm::sample_quantum_equilibrium(half, 10000, 22), decompose_branches(half));
  CHECK(std::abs(hs.labels[0].frequency - 0.5) < 0.015);

  const auto one = qgrid::gaussian_packet(g, 0.0, 1.0, 0.0);
  const auto os = born_statistics(bohm::sample_quantum_equilibrium(one, 1000, 23), decompose_branches(one));
  CHECK(os.labels[0].frequency == 1.0);
  CHECK(os.labels[0].count + os.none_count == 1000);

  // A tail sample counts toward none-rate only.
  const std::vector<Point> few = {{0.0, 0.0}, {0.5, 0.0}, {9.9, 0.0}, {-0.2, 0.0}};
  const auto tail = born_statistics(few, decompose_branches(one));
  CHECK(tail.none_count == 1);
  CHECK(tail.none_rate == 0.25);
  CHECK(tail.labels[0].count == 3);
  CHECK(tail.labels[0].frequency == 1.0);
}

TEST_CASE("wilson interval") {
  const auto ci = wilson_interval(50, 100);
  CHECK(ci.lo == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(ci.hi == doctest::Approx(0.5962).epsilon(1e-3));
  const auto edge = wilson_interval(0, 20);
  CHECK(edge.lo == 0.0);
  CHECK(edge.hi == doctest::Approx(0.1611).epsilon(1e-3));
}

TEST_CASE("branch tracking through the well caustic") {
  const double L = 1.0, sigma = 0.025, k0 = 80.0 * 2.0 * std::numbers::pi;
  const double t_c = 2.0 * (L / 2.0) / k0;
  const Grid w = make_well_grid(L, 1024);
  const auto psi = well_state(w, sigma, k0);
  const double dt = t_c / 2000.0;
  BranchTracker tracker;
  std::size_t last_count = 0;
  propagate::evolve_streaming(psi, well_spec(w, dt), 1.2 * t_c, 20, [&](const propagate::Snapshot& s) {
    last_count = tracker.push(s.psi, s.t).branches.size();
  });
  // Past t_c the packets overlap at the centre: one branch.
  CHECK(last_count == 1);
  const auto& merges = tracker.merges();
  REQUIRE_FALSE(merges.empty());
  CHECK(merges.front().t > 0.6 * t_c);
  CHECK(merges.front().t < 1.05 * t_c);
  CHECK(merges.front().labels.size() == 2);

  // A trajectory sitting in the left branch sees the merge.
  bohm::Trajectory tr;
  for (const auto& snap : tracker.timeline()) tr.samples.push_back(bohm::Sample{snap.t, {0.3, 0.0}, {0.0, 0.0}, false});
  const auto rec = ewf_stability(tr, tracker.timeline(), merges, 0.3 * t_c);
  CHECK(rec.merge_time.has_value());
}

TEST_CASE("ewf_stability on a single branch") {
  const Grid g = make_grid(-16.0, 16.0, 512);
  BranchTracker tracker;
  bohm::Trajectory tr;
  for (int k = 0; k < 5; ++k) {
    tracker.push(qgrid::gaussian_packet(g, 0.1 * k, 1.0, 0.0), 0.1 * k);
    tr.samples.push_back(bohm::Sample{0.1 * k, {0.1 * k, 0.0}, {}, false});
  }
  const auto rec = ewf_stability(tr, tracker.timeline(), tracker.merges());
  CHECK(rec.stability == 1.0);
  CHECK(rec.samples == 5);
  CHECK_FALSE(rec.first_exit.has_value());
  CHECK_FALSE(rec.merge_time.has_value());
}
