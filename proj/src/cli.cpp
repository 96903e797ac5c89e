#include "bohmlab/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <map>
#include <optional>

#include "bohmlab/artifacts.hpp"
#include "bohmlab/error.hpp"
#include "bohmlab/experiments.hpp"

namespace bohmlab::cli {

namespace fs = std::filesystem;
using experiments::ExperimentKind;
using experiments::json;

namespace {

void error_line(std::ostream& err, const std::string& kind, const std::string& key, const std::string& message) {
  json j = {{"error", kind}, {"message", message}};
  if (!key.empty()) j["key"] = key;
  err << j.dump() << '\n';
}

struct RunArgs {
  std::string config;
  std::string out = "run";
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

int run_command(const std::string& name, const RunArgs& a, std::ostream& out, std::ostream& err) {
  static const std::map<std::string, std::vector<ExperimentKind>> accepts = {
      {"well", {ExperimentKind::well_caustic}},
      {"decohere", {ExperimentKind::decohered_well}},
      {"conditions", {ExperimentKind::condition_separation}},
      {"measure", {ExperimentKind::measurement_model}},
      {"propagate", {ExperimentKind::free_packet, ExperimentKind::well_caustic}},
      {"trajectories", {ExperimentKind::free_packet, ExperimentKind::well_caustic}},
  };
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  experiments::ExperimentConfig cfg;
  experiments::RunOptions opts;
  try {
    cfg = experiments::load_config(a.config);
    if (a.seed) cfg.ensemble.seed = *a.seed;
    const auto& ok = accepts.at(name);
    if (std::find(ok.begin(), ok.end(), cfg.experiment) == ok.end()) {
      throw ConfigError("experiment", "'" + experiments::to_string(cfg.experiment) + "' cannot run under '" + name + "'");
    }
    opts.threads = resolve_threads(a.threads);
  } catch (const ConfigError& e) {
    error_line(err, "config", e.key(), e.detail());
    return 2;
  }
  if (name == "propagate") opts.mode = experiments::RunMode::propagate_only;
  if (name == "trajectories") opts.mode = experiments::RunMode::trajectories_only;

  experiments::RunArtifacts art;
  try {
    experiments::run(cfg, art, opts);
  } catch (const ConfigError& e) {
    error_line(err, "config", e.key(), e.detail());
    return 2;
  } catch (const PreconditionError& e) {
    error_line(err, "precondition", "", e.what());
    return 2;
  } catch (const NumericalGuardError& e) {
    try {
      artifacts::write_incomplete(art, a.out, e.what(), elapsed());
    } catch (const std::exception& w) {
      error_line(err, "io", "", w.what());
    }
    error_line(err, "numerical_guard", "", e.what());
    return 3;
  }
  const json m = artifacts::write_artifacts(art, a.out, elapsed());
  out << json{{"status", "ok"}, {"dir", a.out}, {"files", m.at("checksums").size()}}.dump() << '\n';
  return 0;
}

int report_command(const std::string& dir, std::ostream& out) {
  const fs::path d(dir);
  const auto v = artifacts::verify_manifest(d);
  json r = {{"dir", dir}, {"checksums_ok", v.ok}, {"problems", v.problems}};
  if (!fs::exists(d / "manifest.json")) {
    out << r.dump() << '\n';
    return 1;
  }
  const json manifest = json::parse(artifacts::read_file(d / "manifest.json"));
  const auto cfg = experiments::parse_config(manifest.at("config"));

  const std::string summary_text = artifacts::read_file(d / "summary.json");
  const json summary = json::parse(summary_text);
  r["summary_roundtrip"] = artifacts::summary_text(summary) == summary_text;

  bool all = v.ok && r["summary_roundtrip"].get<bool>();
  if (fs::exists(d / "trajectories.csv")) {
    const std::string text = artifacts::read_file(d / "trajectories.csv");
    int dims = 1;
    const auto ens = artifacts::parse_trajectories_csv(text, dims);
    const bool rt = artifacts::trajectories_csv(ens, dims) == text;
    r["trajectories_roundtrip"] = rt;
    // Trajectory-derived summary fields recomputed from the table.
    json mismatched = json::array();
    const json recomputed = experiments::trajectory_summary(ens, cfg);
    for (const auto& [k, val] : recomputed.items()) {
      if (!summary.contains(k) || summary.at(k) != val) mismatched.push_back(k);
    }
    r["recomputed_mismatch"] = mismatched;
    all = all && rt && mismatched.empty();
  }
  r["ok"] = all;
  out << r.dump() << '\n';
  return all ? 0 : 1;
}

} // namespace

unsigned resolve_threads(int flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (flag < 0) throw ConfigError("--threads", "must be >= 1");
  if (const char* env = std::getenv("BOHMLAB_THREADS"); env && *env) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1) throw ConfigError("BOHMLAB_THREADS", "must be an integer >= 1");
    return static_cast<unsigned>(n);
  }
  return 1;
}

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bohmian trajectory and decoherence experiments"};
  app.require_subcommand(1);
  RunArgs ra;
  std::uint64_t seed = 0;
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"well", "infinite-well caustic run"},
      {"decohere", "well with a displacement scattering event"},
      {"conditions", "well with a momentum-kick scattering event"},
      {"measure", "pointer measurement and Born statistics"},
      {"propagate", "wavefunction evolution only"},
      {"trajectories", "evolution plus trajectory ensemble"},
  };
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, CLI::Option*> seed_opts;
  for (const auto& [name, help] : runs) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", ra.config, "experiment config (JSON) or a manifest.json")->required();
    s->add_option("--out", ra.out, "artifact directory");
    seed_opts[name] = s->add_option("--seed", seed, "override ensemble.seed");
    s->add_option("--threads", ra.threads, "worker threads (default: BOHMLAB_THREADS or 1)");
    subs[name] = s;
  }
  std::string dir;
  auto* report = app.add_subcommand("report", "verify an artifact directory and round-trip its files");
  report->add_option("--dir", dir, "artifact directory")->required();

  std::vector<std::string> argv_s{"bohmlab"};
  argv_s.insert(argv_s.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_s) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    error_line(err, "usage", "", e.what());
    return 2;
  }

  try {
    if (report->parsed()) return report_command(dir, out);
    for (const auto& [name, s] : subs) {
      if (!s->parsed()) continue;
      if (seed_opts[name]->count() > 0) ra.seed = seed;
      return run_command(name, ra, out, err);
    }
  } catch (const ConfigError& e) {
    error_line(err, "config", e.key(), e.detail());
    return 2;
  } catch (const std::exception& e) {
    error_line(err, "internal", "", e.what());
    return 1;
  }
  return 1;
}

} // namespace bohmlab::cli
