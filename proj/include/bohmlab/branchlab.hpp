#pragma once

// Branch decomposition, epsilon-supports, the two overlap diagnostics,
// effective-wave-function tracking and Born statistics.

#include <optional>
#include <vector>

#include "bohmlab/bohm.hpp"
#include "bohmlab/qgrid.hpp"

namespace bohmlab::branchlab {

using qgrid::cplx;
using qgrid::Grid;
using qgrid::Point;
using qgrid::WaveFunction;

/// Sorted flat cell indices.
using Region = std::vector<std::size_t>;

struct Thresholds {
  double delta = 1e-4;
  double tau_orth = 1e-3;
  double tau_supp = 1e-3;
};

/// Smallest set of cells, taken by descending density (ties by index), whose
/// mass is at least (1 - delta) of the total.
Region epsilon_support(const WaveFunction& psi, double delta);

struct OverlapReport {
  double orthogonality = 0.0;
  double support_overlap = 0.0;
  double support_intersection_mass = 0.0;
  bool verdict_standard = false;
  bool verdict_bohmian = false;
};

OverlapReport overlap_report(const WaveFunction& a, const WaveFunction& b, const Thresholds& thr = {});

struct Branch {
  int label = 0;
  /// psi restricted to the branch's cells, unnormalized. Dropped by the
  /// tracker to bound memory on long 2D runs.
  std::optional<WaveFunction> amplitudes;
  double weight = 0.0;
  Region support;
};

struct DecomposeOptions {
  double delta = 1e-4;
  /// Support cells closer than this many cells are joined before labelling,
  /// so interference fringes inside one packet do not split it.
  int bridge_cells = 3;
  std::size_t max_components = 16;
};

/// Connected components of the dilated global epsilon-support, one branch
/// each, labelled 1.. in order of their first cell. Every cell goes to its
/// nearest component, so the weights sum to the total mass; each branch's
/// support is its own epsilon-support. Throws NumericalGuardError
/// ("fragmented state") past max_components.
std::vector<Branch> decompose_branches(const WaveFunction& psi, const DecomposeOptions& opts = {});

/// Nearest grid cell of q.
std::size_t cell_of(const Grid& grid, const Point& q);

/// Label of the unique branch whose support holds q, or nullopt.
std::optional<int> effective_branch(const std::vector<Branch>& branches, const Point& q);
std::optional<int> effective_branch(const std::vector<Branch>& branches, const Grid& grid, const Point& q);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// 95% Wilson score interval for k successes out of n.
Interval wilson_interval(std::size_t k, std::size_t n);

struct LabelFrequency {
  int label = 0;
  std::size_t count = 0;
  double frequency = 0.0;
  double weight = 0.0;
  Interval ci;
};

// Label frequencies are over the labelled samples; none_rate is over all n.
struct BornStatistics {
  std::size_t n = 0;
  std::vector<LabelFrequency> labels;
  std::size_t none_count = 0;
  double none_rate = 0.0;
};

BornStatistics born_statistics(const std::vector<Point>& positions, const std::vector<Branch>& branches);
BornStatistics born_statistics(const std::vector<Point>& positions, const std::vector<Branch>& branches,
                               const Grid& grid);
BornStatistics born_statistics(const bohm::Ensemble& ensemble, const std::vector<Branch>& branches, double t);

struct MergeEvent {
  double t = 0.0;
  std::vector<int> labels; // prior labels that collapsed
  int into = 0;
};

struct TrackedSnapshot {
  double t = 0.0;
  Grid grid;
  std::vector<Branch> branches;
};

/// Keeps branch labels consistent across snapshots by overlap mass.
class BranchTracker {
public:
  explicit BranchTracker(DecomposeOptions opts = {}) : opts_(opts) {}
  /// Decomposes psi and relabels the branches to match the previous call.
  const TrackedSnapshot& push(const WaveFunction& psi, double t);
  /// Relabels an existing decomposition of a state on `grid`.
  const TrackedSnapshot& push(std::vector<Branch> branches, const Grid& grid, double t);
  const std::vector<TrackedSnapshot>& timeline() const noexcept { return timeline_; }
  const std::vector<MergeEvent>& merges() const noexcept { return merges_; }

private:
  DecomposeOptions opts_;
  std::vector<TrackedSnapshot> timeline_;
  std::vector<MergeEvent> merges_;
  int next_label_ = 1;
};

struct StabilityRecord {
  std::optional<int> modal_label;
  double stability = 1.0; // fraction of considered samples in the modal branch
  std::size_t samples = 0;
  std::optional<double> first_exit;
  std::optional<double> merge_time; // a merge involving the modal label
};

/// Samples at t >= t_from that coincide with a tracked snapshot are scored.
StabilityRecord ewf_stability(const bohm::Trajectory& trajectory, const std::vector<TrackedSnapshot>& timeline,
                              const std::vector<MergeEvent>& merges = {}, double t_from = -1e300);

} // namespace bohmlab::branchlab
