#include "bohmlab/branchlab.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>

#include "bohmlab/error.hpp"

namespace bohmlab::branchlab {

using qgrid::Boundary;

namespace {

Region support_of(const std::vector<double>& rho, const std::vector<std::size_t>& cells, double delta) {
  std::vector<std::size_t> order(cells);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rho[a] != rho[b] ? rho[a] > rho[b] : a < b;
  });
  double total = 0.0;
  for (std::size_t c : cells) total += rho[c];
  const double target = (1.0 - delta - 64.0 * std::numeric_limits<double>::epsilon()) * total;
  Region out;
  double acc = 0.0;
  for (std::size_t c : order) {
    if (acc >= target && !out.empty()) break;
    out.push_back(c);
    acc += rho[c];
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Neighbours of a cell along each axis, wrapping periodic axes.
template <class F>
void for_neighbours(const Grid& g, std::size_t cell, F&& f) {
  const std::size_t ny = g.ny();
  const std::size_t ix = cell / ny, iy = cell % ny;
  const auto step = [&](std::size_t i, std::size_t n, bool wrap, int d, std::size_t& out) {
    if (d < 0) {
      if (i > 0) {
        out = i - 1;
        return true;
      }
      if (wrap) {
        out = n - 1;
        return true;
      }
      return false;
    }
    if (i + 1 < n) {
      out = i + 1;
      return true;
    }
    if (wrap) {
      out = 0;
      return true;
    }
    return false;
  };
  const bool wx = g.axis(0).boundary == Boundary::periodic;
  for (int d : {-1, 1}) {
    std::size_t j = 0;
    if (step(ix, g.nx(), wx, d, j)) f(j * ny + iy);
  }
  if (g.dims() == 2) {
    const bool wy = g.axis(1).boundary == Boundary::periodic;
    for (int d : {-1, 1}) {
      std::size_t j = 0;
      if (step(iy, ny, wy, d, j)) f(ix * ny + j);
    }
  }
}

// Max filter of radius r along one axis of the mask.
std::vector<std::uint8_t> dilate_axis(const Grid& g, const std::vector<std::uint8_t>& in, int axis, int r) {
  const std::size_t nx = g.nx(), ny = g.ny();
  const std::size_t n = axis == 0 ? nx : ny;
  const bool wrap = g.axis(axis).boundary == Boundary::periodic;
  std::vector<std::uint8_t> out(in.size(), 0);
  const std::size_t lines = axis == 0 ? ny : nx;
  const auto at = [&](std::size_t line, std::size_t i) { return axis == 0 ? i * ny + line : line * ny + i; };
  for (std::size_t line = 0; line < lines; ++line) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!in[at(line, i)]) continue;
      for (int d = -r; d <= r; ++d) {
        long j = static_cast<long>(i) + d;
        if (j < 0 || j >= static_cast<long>(n)) {
          if (!wrap) continue;
          j = (j + static_cast<long>(n)) % static_cast<long>(n);
        }
        out[at(line, static_cast<std::size_t>(j))] = 1;
      }
    }
  }
  return out;
}

} // namespace

Region epsilon_support(const WaveFunction& psi, double delta) {
  if (!(delta > 0.0 && delta < 0.5)) throw PreconditionError("epsilon_support: delta must lie in (0, 0.5)");
  const auto rho = qgrid::density(psi);
  std::vector<std::size_t> all(rho.size());
  std::iota(all.begin(), all.end(), 0);
  return support_of(rho, all, delta);
}

OverlapReport overlap_report(const WaveFunction& a, const WaveFunction& b, const Thresholds& thr) {
  qgrid::require_same_grid(a, b, "overlap_report");
  const double na = qgrid::norm(a), nb = qgrid::norm(b);
  if (!(na > 0.0 && nb > 0.0)) throw PreconditionError("overlap_report: zero state");
  OverlapReport r;
  r.orthogonality = std::abs(qgrid::inner_product(a, b)) / (na * nb);
  r.support_overlap = qgrid::pointwise_overlap(a, b) / (na * nb);
  const Region sa = epsilon_support(a, thr.delta);
  const Region sb = epsilon_support(b, thr.delta);
  Region both;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(both));
  const double dv = a.grid().cell_volume();
  double m = 0.0;
  for (std::size_t c : both) {
    m += std::min(std::norm(a.amplitudes()[c]) / (na * na), std::norm(b.amplitudes()[c]) / (nb * nb)) * dv;
  }
  r.support_intersection_mass = m;
  r.verdict_standard = r.orthogonality < thr.tau_orth;
  r.verdict_bohmian = r.support_overlap < thr.tau_supp;
  return r;
}

std::vector<Branch> decompose_branches(const WaveFunction& psi, const DecomposeOptions& opts) {
  const Grid& g = psi.grid();
  const auto rho = qgrid::density(psi);
  const Region support = epsilon_support(psi, opts.delta);

  std::vector<std::uint8_t> mask(rho.size(), 0);
  for (std::size_t c : support) mask[c] = 1;
  if (opts.bridge_cells > 0) {
    mask = dilate_axis(g, mask, 0, opts.bridge_cells);
    if (g.dims() == 2) mask = dilate_axis(g, mask, 1, opts.bridge_cells);
  }

  // Components of the dilated mask, numbered in scan order.
  constexpr int unset = -1;
  std::vector<int> owner(rho.size(), unset);
  std::deque<std::size_t> queue;
  int components = 0;
  for (std::size_t c = 0; c < rho.size(); ++c) {
    if (!mask[c] || owner[c] != unset) continue;
    if (static_cast<std::size_t>(components) >= opts.max_components) {
      throw NumericalGuardError("fragmented state: more than " + std::to_string(opts.max_components) +
                                " support components");
    }
    owner[c] = components;
    queue.push_back(c);
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      for_neighbours(g, cur, [&](std::size_t nb) {
        if (mask[nb] && owner[nb] == unset) {
          owner[nb] = components;
          queue.push_back(nb);
        }
      });
    }
    ++components;
  }

  // Every remaining cell joins its nearest component (breadth-first).
  for (std::size_t c = 0; c < rho.size(); ++c) {
    if (owner[c] != unset) queue.push_back(c);
  }
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    for_neighbours(g, cur, [&](std::size_t nb) {
      if (owner[nb] == unset) {
        owner[nb] = owner[cur];
        queue.push_back(nb);
      }
    });
  }

  std::vector<std::vector<std::size_t>> cells(static_cast<std::size_t>(components));
  for (std::size_t c = 0; c < rho.size(); ++c) {
    if (owner[c] != unset) cells[static_cast<std::size_t>(owner[c])].push_back(c);
  }
  const double dv = g.cell_volume();
  std::vector<Branch> out;
  for (int k = 0; k < components; ++k) {
    const auto& mine = cells[static_cast<std::size_t>(k)];
    std::vector<cplx> amp(rho.size(), cplx{});
    double w = 0.0;
    for (std::size_t c : mine) {
      amp[c] = psi.amplitudes()[c];
      w += rho[c] * dv;
    }
    Branch b;
    b.label = k + 1;
    b.amplitudes = WaveFunction(g, std::move(amp));
    b.weight = w;
    b.support = support_of(rho, mine, opts.delta);
    out.push_back(std::move(b));
  }
  return out;
}

std::size_t cell_of(const Grid& grid, const Point& q) {
  std::size_t idx[2] = {0, 0};
  for (int a = 0; a < grid.dims(); ++a) {
    const auto& ax = grid.axis(a);
    const double u = std::round((q[static_cast<std::size_t>(a)] - ax.min) / ax.dx());
    long j = static_cast<long>(u);
    const long n = static_cast<long>(ax.n);
    if (ax.boundary == Boundary::periodic) {
      j = ((j % n) + n) % n;
    } else {
      j = std::clamp(j, 0L, n - 1);
    }
    idx[a] = static_cast<std::size_t>(j);
  }
  return grid.index(idx[0], idx[1]);
}

std::optional<int> effective_branch(const std::vector<Branch>& branches, const Point& q) {
  if (branches.empty()) return std::nullopt;
  if (!branches.front().amplitudes) throw PreconditionError("effective_branch: branch carries no grid");
  return effective_branch(branches, branches.front().amplitudes->grid(), q);
}

std::optional<int> effective_branch(const std::vector<Branch>& branches, const Grid& grid, const Point& q) {
  const std::size_t cell = cell_of(grid, q);
  std::optional<int> found;
  for (const auto& b : branches) {
    if (std::binary_search(b.support.begin(), b.support.end(), cell)) {
      if (found) throw Error("effective_branch: two branch supports claim one cell");
      found = b.label;
    }
  }
  return found;
}

Interval wilson_interval(std::size_t k, std::size_t n) {
  if (n == 0) return {0.0, 1.0};
  constexpr double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

BornStatistics born_statistics(const std::vector<Point>& positions, const std::vector<Branch>& branches) {
  if (branches.empty()) {
    BornStatistics s;
    s.n = s.none_count = positions.size();
    s.none_rate = s.n == 0 ? 0.0 : 1.0;
    return s;
  }
  if (!branches.front().amplitudes) throw PreconditionError("born_statistics: branch carries no grid");
  return born_statistics(positions, branches, branches.front().amplitudes->grid());
}

BornStatistics born_statistics(const std::vector<Point>& positions, const std::vector<Branch>& branches,
                               const Grid& grid) {
  BornStatistics s;
  s.n = positions.size();
  std::map<int, std::size_t> counts;
  for (const auto& b : branches) counts[b.label] = 0;
  for (const auto& q : positions) {
    const auto l = effective_branch(branches, grid, q);
    if (l) {
      ++counts[*l];
    } else {
      ++s.none_count;
    }
  }
  const std::size_t labelled = s.n - s.none_count;
  const double nl = static_cast<double>(std::max<std::size_t>(labelled, 1));
  for (const auto& b : branches) {
    LabelFrequency f;
    f.label = b.label;
    f.count = counts[b.label];
    f.frequency = static_cast<double>(f.count) / nl;
    f.weight = b.weight;
    f.ci = wilson_interval(f.count, labelled);
    s.labels.push_back(f);
  }
  s.none_rate = static_cast<double>(s.none_count) / static_cast<double>(std::max<std::size_t>(s.n, 1));
  return s;
}

BornStatistics born_statistics(const bohm::Ensemble& ensemble, const std::vector<Branch>& branches, double t) {
  return born_statistics(bohm::positions_at(ensemble, t), branches);
}

const TrackedSnapshot& BranchTracker::push(const WaveFunction& psi, double t) {
  return push(decompose_branches(psi, opts_), psi.grid(), t);
}

const TrackedSnapshot& BranchTracker::push(std::vector<Branch> branches, const Grid& grid, double t) {
  for (auto& b : branches) b.amplitudes.reset();
  if (timeline_.empty()) {
    for (auto& b : branches) b.label = next_label_++;
  } else {
    const auto& prev = timeline_.back().branches;
    // overlap[p][c]: shared support cells between previous p and current c.
    std::vector<std::vector<std::size_t>> overlap(prev.size(), std::vector<std::size_t>(branches.size(), 0));
    for (std::size_t p = 0; p < prev.size(); ++p) {
      for (std::size_t c = 0; c < branches.size(); ++c) {
        Region both;
        std::set_intersection(prev[p].support.begin(), prev[p].support.end(), branches[c].support.begin(),
                              branches[c].support.end(), std::back_inserter(both));
        overlap[p][c] = both.size();
      }
    }
    std::vector<std::vector<std::size_t>> claims(branches.size());
    for (std::size_t p = 0; p < prev.size(); ++p) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < branches.size(); ++c) {
        if (overlap[p][c] > overlap[p][best]) best = c;
      }
      if (!branches.empty() && overlap[p][best] > 0) claims[best].push_back(p);
    }
    for (std::size_t c = 0; c < branches.size(); ++c) {
      if (claims[c].empty()) {
        branches[c].label = next_label_++;
        continue;
      }
      std::size_t keep = claims[c].front();
      for (std::size_t p : claims[c]) {
        if (overlap[p][c] > overlap[keep][c]) keep = p;
      }
      branches[c].label = prev[keep].label;
      if (claims[c].size() > 1) {
        MergeEvent m;
        m.t = t;
        for (std::size_t p : claims[c]) m.labels.push_back(prev[p].label);
        m.into = prev[keep].label;
        merges_.push_back(std::move(m));
      }
    }
  }
  timeline_.push_back(TrackedSnapshot{t, grid, std::move(branches)});
  return timeline_.back();
}

StabilityRecord ewf_stability(const bohm::Trajectory& trajectory, const std::vector<TrackedSnapshot>& timeline,
                              const std::vector<MergeEvent>& merges, double t_from) {
  StabilityRecord r;
  std::vector<std::pair<double, std::optional<int>>> labels;
  std::size_t k = 0;
  for (const auto& s : trajectory.samples) {
    if (s.t < t_from) continue;
    const double tol = 1e-12 * std::max(1.0, std::abs(s.t));
    while (k < timeline.size() && timeline[k].t < s.t - tol) ++k;
    if (k == timeline.size()) break;
    if (std::abs(timeline[k].t - s.t) > tol) continue;
    labels.emplace_back(s.t, effective_branch(timeline[k].branches, timeline[k].grid, s.q));
  }
  r.samples = labels.size();
  if (labels.empty()) return r;

  std::map<int, std::size_t> counts;
  for (const auto& [t, l] : labels) {
    if (l) ++counts[*l];
  }
  if (counts.empty()) {
    r.stability = 0.0;
    return r;
  }
  const auto modal = std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return a.second < b.second;
  });
  r.modal_label = modal->first;
  r.stability = static_cast<double>(modal->second) / static_cast<double>(labels.size());
  bool entered = false;
  for (const auto& [t, l] : labels) {
    if (l == r.modal_label) {
      entered = true;
    } else if (entered) {
      r.first_exit = t;
      break;
    }
  }
  for (const auto& m : merges) {
    if (m.t < t_from) continue;
    if (m.into == *r.modal_label || std::find(m.labels.begin(), m.labels.end(), *r.modal_label) != m.labels.end()) {
      r.merge_time = m.t;
      break;
    }
  }
  return r;
}

} // namespace bohmlab::branchlab
