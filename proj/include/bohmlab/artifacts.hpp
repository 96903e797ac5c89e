#pragma once

// Run artifact files: trajectory and density tables, branch timeline,
// summary, and the checksummed manifest that marks a directory complete.

#include <filesystem>
#include <string>
#include <vector>

#include "bohmlab/experiments.hpp"

namespace bohmlab::artifacts {

using experiments::json;

inline constexpr const char* kToolVersion = "bohmlab 0.1.0";

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::string sha256_hex(const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

/// Header t,id,q_x[,q_y],v_x[,v_y],regularized; rows sorted by (t, id).
std::string trajectories_csv(const bohm::Ensemble& ensemble, int dims);
bohm::Ensemble parse_trajectories_csv(const std::string& text, int& dims);

/// Header x[,y],density.
std::string density_csv(const experiments::DensitySnapshot& d);
std::string branches_csv(const std::vector<experiments::BranchRow>& rows);
std::string summary_text(const json& summary);

/// Writes every artifact, then manifest.json. Returns the manifest.
json write_artifacts(const experiments::RunArtifacts& a, const std::filesystem::path& dir, double wall_seconds);

/// After a failed run: whatever was produced plus manifest.incomplete.json.
/// No manifest.json is written, so the directory never reads as complete.
json write_incomplete(const experiments::RunArtifacts& a, const std::filesystem::path& dir, const std::string& error,
                      double wall_seconds);

struct Verification {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Recomputes every checksum listed in dir/manifest.json.
Verification verify_manifest(const std::filesystem::path& dir);

} // namespace bohmlab::artifacts
