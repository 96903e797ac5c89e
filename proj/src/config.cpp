#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bohmlab/error.hpp"
#include "bohmlab/experiments.hpp"
#include "bohmlab/propagate.hpp"

namespace bohmlab::experiments {

using scatterdec::ModelKind;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
  case ExperimentKind::free_packet: return "free_packet";
  case ExperimentKind::well_caustic: return "well_caustic";
  case ExperimentKind::decohered_well: return "decohered_well";
  case ExperimentKind::condition_separation: return "condition_separation";
  case ExperimentKind::measurement_model: return "measurement_model";
  }
  return "unknown";
}

namespace {

// One JSON object of the config. Tracks which keys were read so leftovers
// can be reported as unknown.
class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "must be an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }

  double number(const std::string& k) {
    const json& v = get(k);
    if (!v.is_number()) throw ConfigError(key(k), "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(key(k), "must be finite");
    return d;
  }
  double number(const std::string& k, double fallback) { return has(k) ? number(k) : (seen_.insert(k), fallback); }

  std::uint64_t integer(const std::string& k) {
    const json& v = get(k);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      throw ConfigError(key(k), "must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  std::uint64_t integer(const std::string& k, std::uint64_t fallback) {
    return has(k) ? integer(k) : (seen_.insert(k), fallback);
  }

  std::string text(const std::string& k) {
    const json& v = get(k);
    if (!v.is_string()) throw ConfigError(key(k), "must be a string");
    return v.get<std::string>();
  }

  Section child(const std::string& k) { return Section(get(k), key(k)); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
    }
  }

private:
  const json& get(const std::string& k) {
    if (!j_.contains(k)) throw ConfigError(key(k), "required key is missing");
    seen_.insert(k);
    return j_.at(k);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::free_packet, ExperimentKind::well_caustic, ExperimentKind::decohered_well,
                 ExperimentKind::condition_separation, ExperimentKind::measurement_model}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("experiment", "unknown experiment '" + s + "'");
}

ModelKind parse_model(const std::string& s) {
  if (s == "displacement") return ModelKind::displacement;
  if (s == "momentum_kick") return ModelKind::momentum_kick;
  throw ConfigError("scattering.model", "must be displacement or momentum_kick");
}

std::string model_name(ModelKind m) { return m == ModelKind::displacement ? "displacement" : "momentum_kick"; }

void require(bool ok, const std::string& key, const std::string& msg) {
  if (!ok) throw ConfigError(key, msg);
}

bool is_multiple(double t, double dt) {
  try {
    propagate::step_count(t, dt);
    return true;
  } catch (const PreconditionError&) {
    return false;
  }
}

bool is_pow2(std::size_t n) { return n >= 16 && (n & (n - 1)) == 0; }

void validate(const ExperimentConfig& c) {
  const auto& p = c.physical;
  const auto& n = c.numerics;
  require(p.L > 0.0, "physical.L", "must be > 0");
  require(p.sigma > 0.0, "physical.sigma", "must be > 0");
  require(p.hbar > 0.0, "physical.hbar", "must be > 0");
  require(p.mass > 0.0, "physical.mass", "must be > 0");
  require(is_pow2(n.n_grid), "numerics.n_grid", "must be a power of two >= 16");
  require(n.dt > 0.0, "numerics.dt", "must be > 0");
  require(n.t_final > 0.0, "numerics.t_final", "must be > 0");
  require(n.snapshot_stride >= 1, "numerics.snapshot_stride", "must be >= 1");
  require(n.field_stride >= 1, "numerics.field_stride", "must be >= 1");
  require(n.snapshot_stride % n.field_stride == 0, "numerics.snapshot_stride", "must be a multiple of field_stride");
  require(is_multiple(n.t_final, n.dt), "numerics.t_final", "must be an integer multiple of dt");
  const std::size_t steps = propagate::step_count(n.t_final, n.dt);
  require(steps % n.snapshot_stride == 0, "numerics.t_final", "step count must be a multiple of snapshot_stride");
  require(n.dt_traj > 0.0, "numerics.dt_traj", "must be > 0");
  const double sub = static_cast<double>(n.field_stride) * n.dt / n.dt_traj;
  require(std::abs(sub - std::round(sub)) <= 1e-6 * std::max(1.0, sub) && std::round(sub) >= 1.0, "numerics.dt_traj",
          "must divide field_stride * dt into an integer number of substeps");
  require(n.eps_node > 0.0 && n.eps_node < 1.0, "numerics.eps_node", "must lie in (0, 1)");
  require(n.delta > 0.0 && n.delta < 0.5, "numerics.delta", "must lie in (0, 0.5)");
  require(n.tau_orth > 0.0 && n.tau_orth < 1.0, "numerics.tau_orth", "must lie in (0, 1)");
  require(n.tau_supp > 0.0 && n.tau_supp < 1.0, "numerics.tau_supp", "must lie in (0, 1)");
  require(c.output.density_subsample >= 1, "output.density_subsample", "must be >= 1");

  const double snap_dt = static_cast<double>(n.snapshot_stride) * n.dt;
  const bool well = c.experiment == ExperimentKind::well_caustic || c.experiment == ExperimentKind::decohered_well ||
                    c.experiment == ExperimentKind::condition_separation;
  if (well) require(p.k0 != 0.0, "physical.k0", "must be nonzero for the well experiments");

  if (c.experiment == ExperimentKind::decohered_well || c.experiment == ExperimentKind::condition_separation) {
    require(c.scattering.has_value(), "scattering", "required key is missing");
    const auto& s = *c.scattering;
    const auto want = c.experiment == ExperimentKind::decohered_well ? ModelKind::displacement : ModelKind::momentum_kick;
    require(s.model == want, "scattering.model", "must be " + model_name(want) + " for " + to_string(c.experiment));
    require(s.sigma_chi > 0.0, "scattering.sigma_chi", "must be > 0");
    require(s.y_max > s.y_min, "scattering.y_max", "must exceed y_min");
    require(is_pow2(s.n_env), "scattering.n_env", "must be a power of two >= 16");
    require(s.env_mass > 0.0, "scattering.env_mass", "must be > 0");
    require(s.t_s > 0.0, "scattering.t_s", "must be > 0");
    const auto tc = predict_caustic_times(p.L, p.k0, p.hbar, p.mass).t_c;
    require(s.t_s < tc, "scattering.t_s", "must be shorter than the first caustic time t_c");
    require(s.t_s < n.t_final, "scattering.t_s", "must be < numerics.t_final");
    require(is_multiple(s.t_s, snap_dt), "scattering.t_s", "must be a multiple of snapshot_stride * dt");
  } else {
    require(!c.scattering.has_value(), "scattering", "only used by decohered_well and condition_separation");
  }

  if (c.experiment == ExperimentKind::measurement_model) {
    require(c.measurement.has_value(), "measurement", "required key is missing");
    const auto& m = *c.measurement;
    require(m.alpha * m.alpha + m.beta * m.beta > 0.0, "measurement.alpha", "alpha and beta cannot both vanish");
    require(m.offset > 0.0, "measurement.offset", "must be > 0");
    require(m.coupling != 0.0, "measurement.coupling", "must be nonzero");
    require(m.t_int > 0.0 && m.t_int <= n.t_final, "measurement.t_int", "must lie in (0, t_final]");
    require(is_multiple(m.t_int, snap_dt), "measurement.t_int", "must be a multiple of snapshot_stride * dt");
    require(m.sigma_pointer > 0.0, "measurement.sigma_pointer", "must be > 0");
    require(m.y_max > m.y_min, "measurement.y_max", "must exceed y_min");
    require(is_pow2(m.n_pointer), "measurement.n_pointer", "must be a power of two >= 16");
    require(m.pointer_mass > 0.0, "measurement.pointer_mass", "must be > 0");
  } else {
    require(!c.measurement.has_value(), "measurement", "only used by measurement_model");
  }
}

} // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  Section root(j, "");
  c.experiment = parse_kind(root.text("experiment"));

  Section ph = root.child("physical");
  c.physical.L = ph.number("L");
  c.physical.sigma = ph.number("sigma");
  c.physical.k0 = ph.number("k0", 0.0);
  c.physical.hbar = ph.number("hbar", 1.0);
  c.physical.mass = ph.number("mass", 1.0);
  if (ph.has("x0")) c.physical.x0 = ph.number("x0");
  ph.finish();

  Section nu = root.child("numerics");
  c.numerics.n_grid = nu.integer("n_grid");
  c.numerics.dt = nu.number("dt");
  c.numerics.t_final = nu.number("t_final");
  c.numerics.snapshot_stride = nu.integer("snapshot_stride");
  c.numerics.field_stride = nu.integer("field_stride", 1);
  c.numerics.dt_traj = nu.number("dt_traj", c.numerics.dt);
  c.numerics.eps_node = nu.number("eps_node", 1e-12);
  c.numerics.delta = nu.number("delta", 1e-4);
  c.numerics.tau_orth = nu.number("tau_orth", 1e-3);
  c.numerics.tau_supp = nu.number("tau_supp", 1e-3);
  nu.finish();

  Section en = root.child("ensemble");
  c.ensemble.n_traj = en.integer("n_traj");
  c.ensemble.seed = en.integer("seed");
  en.finish();

  if (root.has("scattering")) {
    Section s = root.child("scattering");
    ScatteringParams sp;
    sp.model = parse_model(s.text("model"));
    sp.coupling = s.number("coupling");
    sp.sigma_chi = s.number("sigma_chi");
    sp.y0 = s.number("y0", 0.0);
    sp.y_min = s.number("y_min");
    sp.y_max = s.number("y_max");
    sp.n_env = s.integer("n_env");
    sp.env_mass = s.number("env_mass", 1.0);
    sp.t_s = s.number("t_s");
    s.finish();
    c.scattering = sp;
  }

  if (root.has("measurement")) {
    Section s = root.child("measurement");
    MeasurementParams m;
    m.alpha = s.number("alpha");
    m.beta = s.number("beta");
    m.offset = s.number("offset");
    m.coupling = s.number("coupling");
    m.t_int = s.number("t_int");
    m.sigma_pointer = s.number("sigma_pointer");
    m.y_min = s.number("y_min");
    m.y_max = s.number("y_max");
    m.n_pointer = s.integer("n_pointer");
    m.pointer_mass = s.number("pointer_mass", 1.0);
    s.finish();
    c.measurement = m;
  }

  if (root.has("output")) {
    Section o = root.child("output");
    c.output.density_subsample = o.integer("density_subsample", 1);
    o.finish();
  }
  root.finish();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  // A manifest carries its resolved config.
  if (j.is_object() && j.contains("config") && j.contains("checksums")) return parse_config(j.at("config"));
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  const auto& p = c.physical;
  j["physical"] = {{"L", p.L}, {"sigma", p.sigma}, {"k0", p.k0}, {"hbar", p.hbar}, {"mass", p.mass}};
  if (p.x0) j["physical"]["x0"] = *p.x0;
  const auto& n = c.numerics;
  j["numerics"] = {{"n_grid", n.n_grid},
                   {"dt", n.dt},
                   {"t_final", n.t_final},
                   {"snapshot_stride", n.snapshot_stride},
                   {"field_stride", n.field_stride},
                   {"dt_traj", n.dt_traj},
                   {"eps_node", n.eps_node},
                   {"delta", n.delta},
                   {"tau_orth", n.tau_orth},
                   {"tau_supp", n.tau_supp}};
  j["ensemble"] = {{"n_traj", c.ensemble.n_traj}, {"seed", c.ensemble.seed}};
  if (c.scattering) {
    const auto& s = *c.scattering;
    j["scattering"] = {{"model", model_name(s.model)}, {"coupling", s.coupling}, {"sigma_chi", s.sigma_chi},
                       {"y0", s.y0},                   {"y_min", s.y_min},       {"y_max", s.y_max},
                       {"n_env", s.n_env},             {"env_mass", s.env_mass}, {"t_s", s.t_s}};
  }
  if (c.measurement) {
    const auto& m = *c.measurement;
    j["measurement"] = {{"alpha", m.alpha},
                        {"beta", m.beta},
                        {"offset", m.offset},
                        {"coupling", m.coupling},
                        {"t_int", m.t_int},
                        {"sigma_pointer", m.sigma_pointer},
                        {"y_min", m.y_min},
                        {"y_max", m.y_max},
                        {"n_pointer", m.n_pointer},
                        {"pointer_mass", m.pointer_mass}};
  }
  j["output"] = {{"density_subsample", c.output.density_subsample}};
  return j;
}

CausticTimes predict_caustic_times(double L, double k0, double hbar, double mass) {
  if (k0 == 0.0) throw PreconditionError("predict_caustic_times: k0 must be nonzero");
  if (!(L > 0.0)) throw PreconditionError("predict_caustic_times: L must be > 0");
  const double t_R = 0.5 * L / (hbar * std::abs(k0) / mass);
  return {t_R, 2.0 * t_R};
}

CausticTimes predict_caustic_times(const ExperimentConfig& c) {
  if (c.physical.k0 == 0.0) throw ConfigError("physical.k0", "must be nonzero to predict caustic times");
  return predict_caustic_times(c.physical.L, c.physical.k0, c.physical.hbar, c.physical.mass);
}

} // namespace bohmlab::experiments
