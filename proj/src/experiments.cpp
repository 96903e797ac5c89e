#include "bohmlab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include "bohmlab/error.hpp"

namespace bohmlab::experiments {

using bohm::Ensemble;
using bohm::FieldFrame;
using branchlab::BranchTracker;
using qgrid::cplx;
using qgrid::Grid;
using qgrid::WaveFunction;
using scatterdec::ModelKind;

namespace {

bool is_well(ExperimentKind k) {
  return k == ExperimentKind::well_caustic || k == ExperimentKind::decohered_well ||
         k == ExperimentKind::condition_separation;
}

bool is_1d(ExperimentKind k) { return k == ExperimentKind::free_packet || k == ExperimentKind::well_caustic; }

WaveFunction packet(const Grid& g, double x0, double sigma, double k0, const std::string& sigma_key,
                    const std::string& k0_key) {
  try {
    return qgrid::gaussian_packet(g, x0, sigma, k0);
  } catch (const ResolutionError& e) {
    const std::string m = e.what();
    throw ConfigError(m.find("nyquist") != std::string::npos ? k0_key : sigma_key, m);
  }
}

// Symmetric pair of +/- k0 packets at x0, phases referenced to x0 so the
// state is mirror symmetric about the box centre.
WaveFunction well_state(const ExperimentConfig& c, const Grid& g) {
  const auto& p = c.physical;
  const double x0 = p.x0.value_or(0.5 * p.L);
  const std::vector<WaveFunction> s{packet(g, x0, p.sigma, p.k0, "physical.sigma", "physical.k0"),
                                    packet(g, x0, p.sigma, -p.k0, "physical.sigma", "physical.k0")};
  const std::vector<cplx> coeff{std::polar(1.0, -p.k0 * x0), std::polar(1.0, p.k0 * x0)};
  return qgrid::superpose(coeff, s);
}

propagate::PropagatorSpec make_spec(const ExperimentConfig& c, const Grid& g, double second_mass) {
  propagate::PropagatorSpec spec;
  spec.dt = c.numerics.dt;
  spec.units = {c.physical.hbar, {c.physical.mass, second_mass}};
  if (g.axis(0).boundary == qgrid::Boundary::dirichlet) {
    spec.scheme = propagate::Scheme::sine_spectral_dirichlet;
    spec.potential = qgrid::Potential::infinite_well(g);
  } else {
    spec.scheme = propagate::Scheme::split_step_periodic;
    spec.potential = qgrid::Potential::free(g);
  }
  return spec;
}

bohm::FieldOptions field_options(const ExperimentConfig& c, const propagate::Units& u) {
  bohm::FieldOptions o;
  o.eps_node = c.numerics.eps_node;
  o.dt_traj = c.numerics.dt_traj;
  o.units = u;
  return o;
}

branchlab::DecomposeOptions decompose_options(const ExperimentConfig& c) {
  branchlab::DecomposeOptions o;
  o.delta = c.numerics.delta;
  return o;
}

branchlab::Thresholds thresholds(const ExperimentConfig& c) {
  return {c.numerics.delta, c.numerics.tau_orth, c.numerics.tau_supp};
}

std::vector<Point> sample(const WaveFunction& psi, std::size_t n, std::uint64_t seed) {
  if (n == 0) return {};
  return bohm::sample_quantum_equilibrium(psi, n, seed);
}

DensitySnapshot density_snapshot(const WaveFunction& psi, std::size_t step, double t, std::size_t every) {
  const Grid& g = psi.grid();
  DensitySnapshot d;
  d.step = step;
  d.t = t;
  d.dims = g.dims();
  for (std::size_t i = 0; i < g.nx(); i += every) d.x.push_back(g.axis(0).point(i));
  if (g.dims() == 2) {
    for (std::size_t j = 0; j < g.ny(); j += every) d.y.push_back(g.axis(1).point(j));
  }
  for (std::size_t i = 0; i < g.nx(); i += every) {
    if (g.dims() == 1) {
      d.density.push_back(std::norm(psi.at(i)));
      continue;
    }
    for (std::size_t j = 0; j < g.ny(); j += every) d.density.push_back(std::norm(psi.at(i, j)));
  }
  return d;
}

json merges_json(const std::vector<branchlab::MergeEvent>& merges) {
  json out = json::array();
  for (const auto& m : merges) out.push_back({{"t", m.t}, {"labels", m.labels}, {"into", m.into}});
  return out;
}

json born_json(const branchlab::BornStatistics& s) {
  json labels = json::array();
  for (const auto& f : s.labels) {
    labels.push_back({{"label", f.label},
                      {"count", f.count},
                      {"frequency", f.frequency},
                      {"weight", f.weight},
                      {"ci_lo", f.ci.lo},
                      {"ci_hi", f.ci.hi}});
  }
  return {{"n", s.n}, {"labels", labels}, {"none_count", s.none_count}, {"none_rate", s.none_rate}};
}

json report_json(const OverlapRow& r) {
  return {{"x", r.x},
          {"x_prime", r.x_prime},
          {"orthogonality", r.report.orthogonality},
          {"support_overlap", r.report.support_overlap},
          {"support_intersection_mass", r.report.support_intersection_mass},
          {"verdict_standard", r.report.verdict_standard},
          {"verdict_bohmian", r.report.verdict_bohmian}};
}

// Per-frame bookkeeping shared by every run: field frames for the
// integrator, norm drift, density output, equivariance and branch tracking.
class Recorder {
public:
  Recorder(const ExperimentConfig& c, RunArtifacts& out, unsigned threads) : c_(c), out_(out), threads_(threads) {}

  std::function<WaveFunction(const WaveFunction&)> tracker_view;
  std::function<void(const WaveFunction&, double)> on_frame;
  std::unique_ptr<BranchTracker> tracker;
  std::size_t step_offset = 0;
  double norm_drift = 0.0;
  json ks_timeline = json::array();

  void begin(std::vector<Point> q0, const bohm::FieldOptions& opts) {
    integ_ = std::make_unique<bohm::EnsembleIntegrator>(std::move(q0), opts, threads_);
  }

  void frame(const WaveFunction& psi, double t, std::size_t local_step, bool start, bool outputs = true) {
    const std::size_t step = step_offset + local_step;
    const double n = qgrid::norm(psi);
    norm_drift = std::max(norm_drift, std::abs(n * n - 1.0));
    if (on_frame) on_frame(psi, t);
    const bool snap = step % c_.numerics.snapshot_stride == 0;
    if (integ_) {
      const FieldFrame f(psi, t);
      if (start) {
        integ_->start(f);
      } else {
        integ_->advance(f, snap);
      }
    }
    if (!snap || !outputs) return;
    out_.densities.push_back(density_snapshot(psi, step, t, c_.output.density_subsample));
    if (integ_ && c_.ensemble.n_traj > 0) {
      ks_timeline.push_back({{"t", t}, {"ks", bohm::ks_statistic(integ_->positions(), psi)}});
    }
    if (tracker) {
      const auto& s = tracker_view ? tracker->push(tracker_view(psi), t) : tracker->push(psi, t);
      for (const auto& b : s.branches) out_.branches.push_back({t, b.label, b.weight, b.support.size()});
    }
  }

  std::vector<Point> positions() const { return integ_ ? integ_->positions() : std::vector<Point>{}; }

  /// Moves the phase's trajectories into the artifacts. A phase that starts
  /// where the previous one ended replaces that last sample.
  void flush() {
    if (!integ_) return;
    auto ens = std::move(*integ_).finish(c_.ensemble.seed, to_string(c_.experiment));
    integ_.reset();
    auto& dst = out_.ensemble.trajectories;
    out_.ensemble.seed = ens.seed;
    out_.ensemble.psi_ref = ens.psi_ref;
    if (dst.empty()) {
      dst = std::move(ens.trajectories);
      return;
    }
    for (std::size_t i = 0; i < dst.size() && i < ens.trajectories.size(); ++i) {
      auto& a = dst[i].samples;
      auto& b = ens.trajectories[i].samples;
      if (!a.empty() && !b.empty() && std::abs(a.back().t - b.front().t) <= 1e-12 * std::max(1.0, std::abs(b.front().t))) {
        a.pop_back();
      }
      a.insert(a.end(), b.begin(), b.end());
    }
  }

  void finish_summary() {
    out_.summary["norm_drift"] = norm_drift;
    out_.summary["ks_timeline"] = ks_timeline;
    double worst = 0.0;
    for (const auto& k : ks_timeline) worst = std::max(worst, k.at("ks").get<double>());
    out_.summary["ks_max"] = ks_timeline.empty() ? json(nullptr) : json(worst);
  }

private:
  const ExperimentConfig& c_;
  RunArtifacts& out_;
  unsigned threads_;
  std::unique_ptr<bohm::EnsembleIntegrator> integ_;
};

void base_summary(RunArtifacts& out) {
  auto& s = out.summary;
  s = json::object();
  s["experiment"] = to_string(out.config.experiment);
  s["t_R"] = nullptr;
  s["t_c"] = nullptr;
  s["crossing_fraction"] = nullptr;
  s["born_frequencies"] = nullptr;
  s["ewf_stability"] = nullptr;
  s["ks_timeline"] = json::array();
  s["overlap_reports"] = json::array();
}

void add_trajectory_summary(RunArtifacts& out) {
  if (!out.has_trajectories) return;
  const json t = trajectory_summary(out.ensemble, out.config);
  for (const auto& [k, v] : t.items()) out.summary[k] = v;
}

json stability_json(const std::vector<branchlab::StabilityRecord>& recs) {
  if (recs.empty()) return nullptr;
  double sum = 0.0, lo = 1.0;
  std::size_t exits = 0, merged = 0, perfect = 0;
  for (const auto& r : recs) {
    sum += r.stability;
    lo = std::min(lo, r.stability);
    if (r.first_exit) ++exits;
    if (r.merge_time) ++merged;
    if (r.stability == 1.0) ++perfect;
  }
  const double n = static_cast<double>(recs.size());
  return {{"mean", sum / n},
          {"min", lo},
          {"fraction_stable", static_cast<double>(perfect) / n},
          {"exit_fraction", static_cast<double>(exits) / n},
          {"merged_fraction", static_cast<double>(merged) / n}};
}

std::vector<branchlab::StabilityRecord> stabilities(const Ensemble& e, const BranchTracker& tracker, double t_from) {
  std::vector<branchlab::StabilityRecord> out;
  out.reserve(e.trajectories.size());
  for (const auto& tr : e.trajectories) {
    out.push_back(branchlab::ewf_stability(tr, tracker.timeline(), tracker.merges(), t_from));
  }
  return out;
}

// Free packet and the 1D well share this path.
void run_1d(const ExperimentConfig& c, RunArtifacts& out, const RunOptions& opts) {
  const auto& p = c.physical;
  const auto& nu = c.numerics;
  const bool well = c.experiment == ExperimentKind::well_caustic;
  const Grid g = well ? qgrid::make_well_grid(p.L, nu.n_grid) : qgrid::make_grid(-0.5 * p.L, 0.5 * p.L, nu.n_grid);
  const WaveFunction psi0 = well ? well_state(c, g)
                                 : packet(g, p.x0.value_or(0.0), p.sigma, p.k0, "physical.sigma", "physical.k0");
  const auto spec = make_spec(c, g, 1.0);
  out.dims = 1;
  out.has_trajectories = opts.mode != RunMode::propagate_only;

  Recorder rec(c, out, opts.threads);
  if (out.has_trajectories) rec.begin(sample(psi0, c.ensemble.n_traj, c.ensemble.seed), field_options(c, spec.units));
  if (well && opts.mode == RunMode::full) rec.tracker = std::make_unique<BranchTracker>(decompose_options(c));

  // Mass within 2 sigma of the centre, for the packet return time.
  std::vector<double> times, centre;
  if (well) {
    rec.on_frame = [&](const WaveFunction& psi, double t) {
      double m = 0.0;
      for (std::size_t i = 0; i < g.nx(); ++i) {
        if (std::abs(g.axis(0).point(i) - 0.5 * p.L) < 2.0 * p.sigma) m += std::norm(psi.at(i));
      }
      times.push_back(t);
      centre.push_back(m * g.axis(0).dx());
    };
  }

  double e0 = 0.0, e1 = 0.0;
  try {
    propagate::evolve_streaming(psi0, spec, nu.t_final, nu.field_stride, [&](const propagate::Snapshot& s) {
      rec.frame(s.psi, s.t, s.step, s.step == 0);
      if (s.step == 0) e0 = propagate::energy(s.psi, spec);
      e1 = propagate::energy(s.psi, spec);
    });
  } catch (...) {
    rec.flush();
    throw;
  }
  rec.flush();

  rec.finish_summary();
  auto& s = out.summary;
  s["energy_drift"] = std::abs(e1 - e0) / std::max(1.0, std::abs(e0));
  if (well) {
    const auto tc = predict_caustic_times(c);
    s["t_R"] = tc.t_R;
    s["t_c"] = tc.t_c;
    const double rt = peak_time(times, centre, tc.t_R);
    s["return_time"] = rt;
    s["return_time_error"] = std::abs(rt - tc.t_c) / tc.t_c;
    if (out.has_trajectories) {
      std::vector<double> x0, ts;
      for (const auto& tr : out.ensemble.trajectories) x0.push_back(tr.samples.front().q[0]);
      if (!out.ensemble.trajectories.empty()) {
        for (const auto& smp : out.ensemble.trajectories.front().samples) ts.push_back(smp.t);
      }
      const double v = p.hbar * std::abs(p.k0) / p.mass;
      s["classical_crossing_fraction"] = x0.empty() ? json(nullptr) : json(classical_crossing_fraction(x0, p.L, v, ts));
    }
    if (rec.tracker) {
      s["merges"] = merges_json(rec.tracker->merges());
      if (out.has_trajectories) s["ewf_stability"] = stability_json(stabilities(out.ensemble, *rec.tracker, 0.0));
    }
  }
  add_trajectory_summary(out);
}

// 16 system nodes spread over the epsilon-support, on the stride of rho.
std::vector<std::size_t> sample_nodes(const WaveFunction& psi, double delta, std::size_t stride) {
  std::vector<std::size_t> cand;
  for (std::size_t cell : branchlab::epsilon_support(psi, delta)) {
    if (cell % stride == 0) cand.push_back(cell);
  }
  if (cand.size() < 16) throw NumericalGuardError("decoherence check: system support has fewer than 16 sample nodes");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < 16; ++k) out.push_back(cand[k * (cand.size() - 1) / 15]);
  return out;
}

cplx analytic_factor(const ScatteringParams& sp, double dx) {
  if (sp.model == ModelKind::displacement) {
    const double d = sp.coupling * dx;
    return std::exp(-d * d / (8.0 * sp.sigma_chi * sp.sigma_chi));
  }
  const double k = sp.coupling * dx;
  return std::polar(std::exp(-0.5 * k * k * sp.sigma_chi * sp.sigma_chi), k * sp.y0);
}

// Reduced density matrix right after scattering against the two oracles,
// plus the overlap reports for pairs straddling the two packets.
json decoherence_analysis(const ExperimentConfig& c, const WaveFunction& before, const WaveFunction& after,
                          const scatterdec::ScatteringModel& model, RunArtifacts& out) {
  const auto& sp = *c.scattering;
  const auto rho = scatterdec::partial_trace(after);
  json dm = {{"trace", rho.trace()},
             {"purity", rho.purity()},
             {"hermiticity_error", rho.hermiticity_error()},
             {"min_eigenvalue", rho.min_eigenvalue()}};
  rho.check_invariants();
  const auto nodes = sample_nodes(before, c.numerics.delta, rho.stride);
  const auto& ax = before.grid().axis(0);
  double factor_err = 0.0, analytic_err = 0.0;
  for (std::size_t i : nodes) {
    for (std::size_t j : nodes) {
      const cplx r0 = before.at(i) * std::conj(before.at(j));
      const cplx r1 = rho.rho(static_cast<Eigen::Index>(i / rho.stride), static_cast<Eigen::Index>(j / rho.stride));
      const cplx ratio = r1 / r0;
      factor_err = std::max(factor_err, std::abs(ratio - scatterdec::decoherence_factor(model, ax.point(i), ax.point(j))));
      analytic_err = std::max(analytic_err, std::abs(ratio - analytic_factor(sp, ax.point(i) - ax.point(j))));
    }
  }

  std::vector<double> left, right;
  for (std::size_t i : nodes) (ax.point(i) < 0.5 * c.physical.L ? left : right).push_back(ax.point(i));
  auto pick = [](const std::vector<double>& v) {
    std::vector<double> o;
    if (v.empty()) return o;
    const std::size_t m = std::min<std::size_t>(4, v.size());
    for (std::size_t k = 0; k < m; ++k) o.push_back(v[m == 1 ? 0 : k * (v.size() - 1) / (m - 1)]);
    return o;
  };
  bool all_standard = true, any_bohmian = false;
  json reports = json::array();
  for (double x : pick(left)) {
    for (double xp : pick(right)) {
      OverlapRow row{x, xp, scatterdec::condition_reports(model, x, xp, thresholds(c))};
      all_standard = all_standard && row.report.verdict_standard;
      any_bohmian = any_bohmian || row.report.verdict_bohmian;
      reports.push_back(report_json(row));
      out.overlaps.push_back(row);
    }
  }
  out.summary["overlap_reports"] = reports;
  return {{"density_matrix", dm},
          {"sample_nodes", nodes.size()},
          {"decoherence_factor_error", factor_err},
          {"analytic_factor_error", analytic_err},
          {"verdict_standard_all", all_standard},
          {"verdict_bohmian_any", any_bohmian}};
}

double wrap(double y, const qgrid::Axis& a) {
  const double L = a.length();
  double u = std::fmod(y - a.min, L);
  if (u < 0.0) u += L;
  return a.min + u;
}

// Well evolution to t_s, sudden scattering of one environment particle, then
// joint-space evolution and trajectories.
void run_scattered(const ExperimentConfig& c, RunArtifacts& out, const RunOptions& opts) {
  const auto& p = c.physical;
  const auto& nu = c.numerics;
  const auto& sp = *c.scattering;
  const auto tc = predict_caustic_times(c);
  const Grid g = qgrid::make_well_grid(p.L, nu.n_grid);
  const WaveFunction psi0 = well_state(c, g);
  const auto spec1 = make_spec(c, g, sp.env_mass);
  const auto env_axis = qgrid::make_axis(sp.y_min, sp.y_max, sp.n_env, qgrid::Boundary::periodic);
  const WaveFunction chi_in = packet(Grid::line(env_axis), sp.y0, sp.sigma_chi, 0.0, "scattering.sigma_chi", "scattering.sigma_chi");
  const scatterdec::ScatteringModel model{sp.model, sp.coupling, chi_in};
  const std::size_t n_s = propagate::step_count(sp.t_s, nu.dt);
  const std::size_t n = c.ensemble.n_traj;
  out.dims = 2;
  out.summary["t_R"] = tc.t_R;
  out.summary["t_c"] = tc.t_c;

  Recorder rec(c, out, opts.threads);
  rec.begin(sample(psi0, n, c.ensemble.seed), field_options(c, spec1.units));
  std::optional<WaveFunction> psi_s;
  try {
    propagate::evolve_streaming(psi0, spec1, sp.t_s, nu.field_stride, [&](const propagate::Snapshot& s) {
      rec.frame(s.psi, s.t, s.step, s.step == 0, s.step < n_s);
      if (s.step == n_s) psi_s = s.psi;
    });
  } catch (...) {
    rec.flush();
    throw;
  }
  const auto x_s = rec.positions();
  rec.flush();

  WaveFunction joint = [&] {
    try {
      return scatterdec::apply_scattering(*psi_s, model, nu.delta);
    } catch (const ConfigError&) {
      throw;
    } catch (const PreconditionError& e) {
      throw ConfigError("scattering.coupling", e.what());
    }
  }();
  out.summary["decoherence"] = decoherence_analysis(c, *psi_s, joint, model, out);

  // The environment particle sits at y0 ~ |chi_in|^2 until the event; the
  // displacement carries it to y0 + g x, the kick leaves it in place.
  const auto chi_density = bohm::marginal(chi_in, 0);
  std::vector<Point> q_s(n);
  for (std::size_t i = 0; i < n; ++i) {
    bohm::SubstreamRng rng(c.ensemble.seed, n + i);
    const double y0 = chi_density.quantile(rng.uniform());
    for (auto& smp : out.ensemble.trajectories[i].samples) smp.q[1] = y0;
    const double x = x_s[i][0];
    q_s[i] = {x, sp.model == ModelKind::displacement ? wrap(y0 + sp.coupling * x, env_axis) : y0};
  }

  const auto spec2 = make_spec(c, joint.grid(), sp.env_mass);
  const auto born = branchlab::born_statistics(q_s, branchlab::decompose_branches(joint, decompose_options(c)));
  out.summary["born_frequencies"] = born_json(born);

  rec.step_offset = n_s;
  rec.tracker = std::make_unique<BranchTracker>(decompose_options(c));
  rec.begin(q_s, field_options(c, spec2.units));
  try {
    propagate::evolve_streaming(
        joint, spec2, nu.t_final - sp.t_s, nu.field_stride,
        [&](const propagate::Snapshot& s) { rec.frame(s.psi, s.t, s.step, s.step == 0); }, sp.t_s);
  } catch (...) {
    rec.flush();
    throw;
  }
  rec.flush();

  rec.finish_summary();
  auto& s = out.summary;
  s["merges"] = merges_json(rec.tracker->merges());
  s["ewf_stability"] = stability_json(stabilities(out.ensemble, *rec.tracker, sp.t_s));
  add_trajectory_summary(out);
  const auto& dec = s["decoherence"];
  const bool standard = dec["verdict_standard_all"].get<bool>();
  const bool bohmian = dec["verdict_bohmian_any"].get<bool>();
  s["regime"] = std::string(standard ? "standard-yes" : "standard-no") + "/" + (bohmian ? "bohmian-yes" : "bohmian-no");
  if (!s["ewf_stability"].is_null()) s["stable_ewf"] = s["ewf_stability"]["mean"].get<double>() >= 0.99;
  if (!s["crossing_fraction"].is_null()) s["classical_crossing_restored"] = s["crossing_fraction"].get<double>() >= 0.95;
}

WaveFunction pointer_marginal(const WaveFunction& psi) {
  const auto m = qgrid::marginal_density(psi, 1);
  std::vector<cplx> amp(m.size());
  for (std::size_t j = 0; j < m.size(); ++j) amp[j] = std::sqrt(m[j]);
  return WaveFunction(Grid::line(psi.grid().axis(1)), std::move(amp));
}

bohm::Trajectory pointer_projection(const bohm::Trajectory& tr) {
  bohm::Trajectory out{tr.id, tr.samples};
  for (auto& s : out.samples) s.q = {s.q[1], 0.0};
  return out;
}

void run_measurement(const ExperimentConfig& c, RunArtifacts& out, const RunOptions& opts) {
  const auto& p = c.physical;
  const auto& nu = c.numerics;
  const auto& m = *c.measurement;
  const Grid gx = qgrid::make_grid(-0.5 * p.L, 0.5 * p.L, nu.n_grid);
  const auto y_axis = qgrid::make_axis(m.y_min, m.y_max, m.n_pointer, qgrid::Boundary::periodic);
  const std::vector<WaveFunction> branches{packet(gx, -m.offset, p.sigma, p.k0, "physical.sigma", "physical.k0"),
                                           packet(gx, m.offset, p.sigma, p.k0, "physical.sigma", "physical.k0")};
  const std::vector<cplx> coeff{m.alpha, m.beta};
  const WaveFunction system = qgrid::superpose(coeff, branches);
  const WaveFunction pointer =
      packet(Grid::line(y_axis), 0.0, m.sigma_pointer, 0.0, "measurement.sigma_pointer", "measurement.sigma_pointer");
  const WaveFunction psi0 = qgrid::product_state(system, pointer);
  const Grid& g = psi0.grid();

  auto spec_free = make_spec(c, g, m.pointer_mass);
  auto spec_int = spec_free;
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.nx(); ++i) {
    for (std::size_t j = 0; j < g.ny(); ++j) v[g.index(i, j)] = m.coupling * g.axis(0).point(i) * g.axis(1).point(j);
  }
  spec_int.interaction = std::move(v);
  const std::size_t n_int = propagate::step_count(m.t_int, nu.dt);
  out.dims = 2;

  Recorder rec(c, out, opts.threads);
  rec.begin(sample(psi0, c.ensemble.n_traj, c.ensemble.seed), field_options(c, spec_free.units));
  rec.tracker = std::make_unique<BranchTracker>(decompose_options(c));
  rec.tracker_view = pointer_marginal;
  std::optional<WaveFunction> last;
  try {
    propagate::evolve_streaming(psi0, spec_int, m.t_int, nu.field_stride, [&](const propagate::Snapshot& s) {
      rec.frame(s.psi, s.t, s.step, s.step == 0);
      last = s.psi;
    });
    if (nu.t_final - m.t_int > 0.5 * nu.dt) {
      rec.step_offset = n_int;
      propagate::evolve_streaming(
          *last, spec_free, nu.t_final - m.t_int, nu.field_stride,
          [&](const propagate::Snapshot& s) {
            if (s.step > 0) rec.frame(s.psi, s.t, s.step, false);
          },
          m.t_int);
    }
  } catch (...) {
    rec.flush();
    throw;
  }
  const auto q_final = rec.positions();
  rec.flush();
  rec.finish_summary();

  auto& s = out.summary;
  const double a2 = m.alpha * m.alpha / (m.alpha * m.alpha + m.beta * m.beta);
  s["alpha_weight"] = a2;
  s["merges"] = merges_json(rec.tracker->merges());
  const auto& timeline = rec.tracker->timeline();
  const auto& final_branches = timeline.back().branches;
  const bool expect_two = std::min(a2, 1.0 - a2) > nu.delta;
  if (expect_two && final_branches.size() < 2) {
    s["weak_measurement"] = true;
    add_trajectory_summary(out);
    throw NumericalGuardError("weak measurement: pointer branches did not separate by t_final");
  }
  s["weak_measurement"] = false;

  // The alpha packet sits at x = -offset, so its pointer drifts along
  // sign(coupling * offset).
  const double drift = m.coupling * m.offset;
  int alpha_label = final_branches.front().label;
  double best = -1e300;
  for (const auto& b : final_branches) {
    double centroid = 0.0;
    for (std::size_t cell : b.support) centroid += y_axis.point(cell);
    centroid /= static_cast<double>(b.support.size());
    const double score = drift > 0 ? centroid : -centroid;
    if (score > best) {
      best = score;
      alpha_label = b.label;
    }
  }

  std::vector<Point> proj;
  for (const auto& q : q_final) proj.push_back({q[1], 0.0});
  const auto stats = branchlab::born_statistics(proj, final_branches, Grid::line(y_axis));
  json born = born_json(stats);
  born["alpha_label"] = alpha_label;
  for (const auto& f : stats.labels) {
    if (f.label == alpha_label) born["alpha_frequency"] = f.frequency;
  }
  s["born_frequencies"] = born;

  std::optional<double> t_sep;
  for (const auto& snap : timeline) {
    if (snap.branches.size() >= (expect_two ? 2u : 1u)) {
      t_sep = snap.t;
      break;
    }
  }
  s["separation_time"] = t_sep ? json(*t_sep) : json(nullptr);
  if (t_sep && !out.ensemble.trajectories.empty()) {
    std::vector<branchlab::StabilityRecord> recs;
    std::size_t leaked = 0;
    for (const auto& tr : out.ensemble.trajectories) {
      recs.push_back(branchlab::ewf_stability(pointer_projection(tr), timeline, rec.tracker->merges(), *t_sep));
      if (recs.back().stability < 1.0) ++leaked;
    }
    s["ewf_stability"] = stability_json(recs);
    s["leakage_fraction"] = static_cast<double>(leaked) / static_cast<double>(recs.size());
  }
  add_trajectory_summary(out);
}

} // namespace

void run(const ExperimentConfig& c, RunArtifacts& out, const RunOptions& opts) {
  out = RunArtifacts{};
  out.config = c;
  base_summary(out);
  if (opts.mode != RunMode::full && !is_1d(c.experiment)) {
    throw ConfigError("experiment", "propagate and trajectories runs support free_packet and well_caustic");
  }
  switch (c.experiment) {
  case ExperimentKind::free_packet:
  case ExperimentKind::well_caustic: run_1d(c, out, opts); break;
  case ExperimentKind::decohered_well:
  case ExperimentKind::condition_separation: run_scattered(c, out, opts); break;
  case ExperimentKind::measurement_model: run_measurement(c, out, opts); break;
  }
}

namespace {

RunArtifacts run_checked(const ExperimentConfig& c, const RunOptions& opts, ExperimentKind want) {
  if (c.experiment != want) throw ConfigError("experiment", "expected " + to_string(want));
  RunArtifacts out;
  run(c, out, opts);
  return out;
}

} // namespace

RunArtifacts run_free_packet(const ExperimentConfig& c, const RunOptions& o) {
  return run_checked(c, o, ExperimentKind::free_packet);
}
RunArtifacts run_well_caustic(const ExperimentConfig& c, const RunOptions& o) {
  return run_checked(c, o, ExperimentKind::well_caustic);
}
RunArtifacts run_decohered_well(const ExperimentConfig& c, const RunOptions& o) {
  return run_checked(c, o, ExperimentKind::decohered_well);
}
RunArtifacts run_condition_separation(const ExperimentConfig& c, const RunOptions& o) {
  return run_checked(c, o, ExperimentKind::condition_separation);
}
RunArtifacts run_measurement_model(const ExperimentConfig& c, const RunOptions& o) {
  return run_checked(c, o, ExperimentKind::measurement_model);
}

double crossing_fraction(const Ensemble& ensemble, double midpoint, double t_from, double t_to) {
  if (ensemble.trajectories.empty()) return 0.0;
  std::size_t crossed = 0;
  for (const auto& tr : ensemble.trajectories) {
    if (tr.samples.empty()) continue;
    const bool right = tr.samples.front().q[0] >= midpoint;
    for (const auto& s : tr.samples) {
      const double tol = 1e-12 * std::max(1.0, std::abs(s.t));
      if (s.t < t_from - tol || s.t > t_to + tol) continue;
      if ((s.q[0] >= midpoint) != right) {
        ++crossed;
        break;
      }
    }
  }
  return static_cast<double>(crossed) / static_cast<double>(ensemble.trajectories.size());
}

namespace {

std::uint64_t count_inversions(std::vector<double>& a, std::vector<double>& tmp, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t inv = count_inversions(a, tmp, lo, mid) + count_inversions(a, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[j] < a[i]) {
      inv += mid - i;
      tmp[k++] = a[j++];
    } else {
      tmp[k++] = a[i++];
    }
  }
  while (i < mid) tmp[k++] = a[i++];
  while (j < hi) tmp[k++] = a[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            a.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

} // namespace

OrderingReport ordering_violations(const Ensemble& ensemble) {
  OrderingReport r;
  const auto& trs = ensemble.trajectories;
  if (trs.size() < 2) return r;
  std::size_t samples = trs.front().samples.size();
  for (const auto& tr : trs) samples = std::min(samples, tr.samples.size());
  if (samples == 0) return r;
  std::vector<std::size_t> order(trs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trs[a].samples.front().q[0] < trs[b].samples.front().q[0];
  });
  const std::uint64_t n = trs.size();
  std::vector<double> a(trs.size()), tmp(trs.size());
  for (std::size_t k = 0; k < samples; ++k) {
    for (std::size_t i = 0; i < order.size(); ++i) a[i] = trs[order[i]].samples[k].q[0];
    r.violations += count_inversions(a, tmp, 0, a.size());
    r.pair_checks += n * (n - 1) / 2;
  }
  return r;
}

double classical_crossing_fraction(const std::vector<double>& x0, double L, double v, const std::vector<double>& times) {
  if (x0.empty()) return 0.0;
  std::size_t crossed = 0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double vel = i % 2 == 0 ? v : -v;
    const bool right = x0[i] >= 0.5 * L;
    for (double t : times) {
      double u = std::fmod(x0[i] + vel * t, 2.0 * L);
      if (u < 0.0) u += 2.0 * L;
      const double x = u <= L ? u : 2.0 * L - u;
      if ((x >= 0.5 * L) != right) {
        ++crossed;
        break;
      }
    }
  }
  return static_cast<double>(crossed) / static_cast<double>(x0.size());
}

double peak_time(const std::vector<double>& t, const std::vector<double>& value, double t_after) {
  if (t.size() != value.size() || t.empty()) throw PreconditionError("peak_time: series size mismatch");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] > t_after && (!best || value[i] > value[*best])) best = i;
  }
  if (!best) throw PreconditionError("peak_time: no samples after t_after");
  const std::size_t i = *best;
  if (i == 0 || i + 1 >= t.size()) return t[i];
  // Vertex of the parabola through the three points.
  const double x0 = t[i - 1], x1 = t[i], x2 = t[i + 1];
  const double y0 = value[i - 1], y1 = value[i], y2 = value[i + 1];
  const double d = (x0 - x1) * (x0 - x2) * (x1 - x2);
  const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d;
  const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d;
  if (!(a < 0.0)) return t[i];
  return std::clamp(-b / (2.0 * a), x0, x2);
}

json trajectory_summary(const Ensemble& ensemble, const ExperimentConfig& c) {
  json j;
  std::size_t total = 0, flagged = 0;
  for (const auto& tr : ensemble.trajectories) {
    for (const auto& s : tr.samples) {
      ++total;
      if (s.regularized) ++flagged;
    }
  }
  j["n_traj"] = ensemble.trajectories.size();
  j["regularized_fraction"] = total == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(total);
  if (is_well(c.experiment)) {
    const double mid = 0.5 * c.physical.L;
    const double t_end = c.numerics.t_final;
    std::size_t left = 0;
    for (const auto& tr : ensemble.trajectories) {
      if (!tr.samples.empty() && tr.samples.front().q[0] < mid) ++left;
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, ensemble.trajectories.size()));
    j["side_occupancy"] = {{"left", static_cast<double>(left) / n},
                           {"right", static_cast<double>(ensemble.trajectories.size() - left) / n}};
    if (c.experiment == ExperimentKind::well_caustic) {
      j["crossing_fraction"] = crossing_fraction(ensemble, mid, 0.0, t_end);
    } else {
      const double tc = predict_caustic_times(c).t_c;
      j["crossing_fraction"] = crossing_fraction(ensemble, mid, tc, t_end);
      j["crossing_fraction_total"] = crossing_fraction(ensemble, mid, 0.0, t_end);
    }
  }
  if (is_1d(c.experiment)) {
    const auto o = ordering_violations(ensemble);
    j["ordering"] = {{"violations", o.violations}, {"pair_checks", o.pair_checks}};
  }
  return j;
}

} // namespace bohmlab::experiments
