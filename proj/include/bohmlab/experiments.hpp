#pragma once

// Config-driven runs of the well, decoherence and measurement scenarios, and
// the trajectory analyses their summaries report.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bohmlab/bohm.hpp"
#include "bohmlab/branchlab.hpp"
#include "bohmlab/scatterdec.hpp"

namespace bohmlab::experiments {

using nlohmann::json;
using qgrid::Point;

enum class ExperimentKind { free_packet, well_caustic, decohered_well, condition_separation, measurement_model };

std::string to_string(ExperimentKind kind);

struct PhysicalParams {
  double L = 1.0;
  double sigma = 0.025;
  double k0 = 0.0;
  double hbar = 1.0;
  double mass = 1.0;
  /// Packet centre; defaults to the middle of the box.
  std::optional<double> x0;
};

struct NumericsParams {
  std::size_t n_grid = 1024;
  double dt = 1e-3;
  double t_final = 1.0;
  std::size_t snapshot_stride = 10;
  /// Steps between the field frames trajectories are integrated through.
  std::size_t field_stride = 1;
  double dt_traj = 1e-3;
  double eps_node = 1e-12;
  double delta = 1e-4;
  double tau_orth = 1e-3;
  double tau_supp = 1e-3;
};

struct EnsembleParams {
  std::size_t n_traj = 0;
  std::uint64_t seed = 0;
};

struct ScatteringParams {
  scatterdec::ModelKind model = scatterdec::ModelKind::displacement;
  double coupling = 0.0;
  double sigma_chi = 1.0;
  double y0 = 0.0;
  double y_min = -8.0;
  double y_max = 8.0;
  std::size_t n_env = 256;
  double env_mass = 1.0;
  double t_s = 0.0;
};

/// alpha psi(x + offset) + beta psi(x - offset), pointer coupled by
/// V = coupling x y for t < t_int.
struct MeasurementParams {
  double alpha = 1.0;
  double beta = 0.0;
  double offset = 3.0;
  double coupling = 1.0;
  double t_int = 0.5;
  double sigma_pointer = 1.0;
  double y_min = -16.0;
  double y_max = 16.0;
  std::size_t n_pointer = 256;
  double pointer_mass = 1.0;
};

struct OutputParams {
  /// Density files keep every n-th node along each axis.
  std::size_t density_subsample = 1;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::well_caustic;
  PhysicalParams physical;
  NumericsParams numerics;
  EnsembleParams ensemble;
  std::optional<ScatteringParams> scattering;
  std::optional<MeasurementParams> measurement;
  OutputParams output;
};

/// Parses and validates a config. Throws ConfigError naming the dotted key.
ExperimentConfig parse_config(const json& j);
ExperimentConfig load_config(const std::string& path);
/// Every field, defaults resolved; parse_config(to_json(c)) == c.
json to_json(const ExperimentConfig& c);

struct CausticTimes {
  double t_R = 0.0;
  double t_c = 0.0;
};

/// Ballistic estimate t_R = (L/2) / (hbar |k0| / m), t_c = 2 t_R.
CausticTimes predict_caustic_times(double L, double k0, double hbar = 1.0, double mass = 1.0);
CausticTimes predict_caustic_times(const ExperimentConfig& c);

struct DensitySnapshot {
  std::size_t step = 0;
  double t = 0.0;
  int dims = 1;
  std::vector<double> x;
  std::vector<double> y;       // empty in 1D
  std::vector<double> density; // x-major
};

struct BranchRow {
  double t = 0.0;
  int label = 0;
  double weight = 0.0;
  std::size_t support_cells = 0;
};

struct OverlapRow {
  double x = 0.0;
  double x_prime = 0.0;
  branchlab::OverlapReport report;
};

struct RunArtifacts {
  ExperimentConfig config;
  int dims = 1; // configuration-space dimension of the trajectory table
  bool has_trajectories = true;
  bohm::Ensemble ensemble;
  std::vector<DensitySnapshot> densities;
  std::vector<BranchRow> branches;
  std::vector<OverlapRow> overlaps;
  json summary = json::object();
};

enum class RunMode { full, propagate_only, trajectories_only };

struct RunOptions {
  unsigned threads = 1;
  RunMode mode = RunMode::full;
};

/// Runs the configured experiment into `out`. On a mid-run guard failure the
/// exception propagates and `out` holds everything produced so far.
void run(const ExperimentConfig& c, RunArtifacts& out, const RunOptions& opts = {});

RunArtifacts run_free_packet(const ExperimentConfig& c, const RunOptions& opts = {});
RunArtifacts run_well_caustic(const ExperimentConfig& c, const RunOptions& opts = {});
RunArtifacts run_decohered_well(const ExperimentConfig& c, const RunOptions& opts = {});
RunArtifacts run_condition_separation(const ExperimentConfig& c, const RunOptions& opts = {});
RunArtifacts run_measurement_model(const ExperimentConfig& c, const RunOptions& opts = {});

// Trajectory analyses.

/// Fraction of trajectories with a sample in [t_from, t_to] on the other side
/// of `midpoint` from their first sample. Axis 0.
double crossing_fraction(const bohm::Ensemble& ensemble, double midpoint, double t_from, double t_to);

struct OrderingReport {
  std::uint64_t violations = 0;  // pairs whose order differs from t = 0
  std::uint64_t pair_checks = 0; // pairs times samples
};

/// Pairwise ordering of axis-0 positions at every sample time against the
/// initial ordering.
OrderingReport ordering_violations(const bohm::Ensemble& ensemble);

/// Classical particles from the same starting points, velocity +/- v by id
/// parity, reflecting off walls at 0 and L; crossing fraction over `times`.
double classical_crossing_fraction(const std::vector<double>& x0, double L, double v, const std::vector<double>& times);

/// Time of the maximum of a sampled series, refined by a parabola through
/// the neighbours. Only samples with t > t_after compete.
double peak_time(const std::vector<double>& t, const std::vector<double>& value, double t_after);

/// Fields of the summary that follow from the trajectory table and config.
json trajectory_summary(const bohm::Ensemble& ensemble, const ExperimentConfig& c);

} // namespace bohmlab::experiments
