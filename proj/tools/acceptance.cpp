// Runs the shipped configs and prints one PASS/FAIL line per acceptance
// criterion. Exit status is nonzero if any criterion fails.
//
//   bohmlab_acceptance <config dir> [scratch dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "bohmlab/artifacts.hpp"
#include "bohmlab/error.hpp"
#include "bohmlab/experiments.hpp"

using namespace bohmlab;
using experiments::json;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kKsMax = 0.03;
constexpr double kA1Seconds = 60.0;
constexpr std::uint64_t kMinPairChecks = 2'000'000;
constexpr double kReturnTimeError = 0.05;
constexpr double kA3Seconds = 300.0;
constexpr double kBornTarget = 0.3;
constexpr double kBornTolerance = 0.015;
constexpr double kNoneRate = 0.01;
constexpr double kLeakage = 0.005;
constexpr double kStability = 0.99;
constexpr double kCrossingRestored = 0.95;
constexpr double kA5Seconds = 1800.0;
constexpr double kFactorError = 1e-6;
constexpr double kAnalyticError = 1e-4;
constexpr double kNormDrift = 1e-8;
constexpr double kTraceError = 1e-10;
constexpr double kHermiticity = 1e-10;
constexpr double kMinEigenvalue = -1e-10;

struct Run {
  json summary;
  json checksums;
  double seconds = 0.0;
  std::string error;
};

class Runner {
public:
  Runner(fs::path configs, fs::path scratch) : configs_(std::move(configs)), scratch_(std::move(scratch)) {}

  const Run& get(const std::string& name, unsigned threads = 1) {
    const std::string key = name + "/" + std::to_string(threads);
    if (auto it = runs_.find(key); it != runs_.end()) return it->second;
    Run r;
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto cfg = experiments::load_config((configs_ / (name + ".json")).string());
      experiments::RunArtifacts art;
      experiments::run(cfg, art, experiments::RunOptions{threads, experiments::RunMode::full});
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      r.summary = art.summary;
      r.checksums = artifacts::write_artifacts(art, scratch_ / key, r.seconds)["checksums"];
    } catch (const std::exception& e) {
      r.error = e.what();
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    std::cerr << "  ran " << key << " in " << r.seconds << " s" << (r.error.empty() ? "" : " (error)") << '\n';
    return runs_.emplace(key, std::move(r)).first->second;
  }

private:
  fs::path configs_, scratch_;
  std::map<std::string, Run> runs_;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
  bool failed_run(const Run& r, const std::string& name) {
    if (r.error.empty()) return false;
    check(false, name + " failed: " + r.error);
    return true;
  }
};

double get(const json& j, const char* a, const char* b = nullptr) {
  const json& v = b ? j.at(a).at(b) : j.at(a);
  return v.get<double>();
}

Verdict a1(Runner& R) {
  Verdict v;
  const auto& r = R.get("free_packet");
  if (v.failed_run(r, "free_packet")) return v;
  const double ks = get(r.summary, "ks_max");
  v.check(ks < kKsMax, "max KS " + num(ks) + " < " + num(kKsMax));
  v.check(r.seconds < kA1Seconds, "runtime " + num(r.seconds) + " s < " + num(kA1Seconds) + " s");
  return v;
}

Verdict a2(Runner& R) {
  Verdict v;
  std::uint64_t checks = 0, violations = 0;
  for (const char* name : {"free_packet", "well"}) {
    const auto& r = R.get(name);
    if (v.failed_run(r, name)) return v;
    checks += r.summary.at("ordering").at("pair_checks").get<std::uint64_t>();
    violations += r.summary.at("ordering").at("violations").get<std::uint64_t>();
  }
  v.check(violations == 0, std::to_string(violations) + " violations");
  v.check(checks >= kMinPairChecks, std::to_string(checks) + " pair-sample checks >= " + std::to_string(kMinPairChecks));
  return v;
}

Verdict a3(Runner& R) {
  Verdict v;
  const auto& r = R.get("well");
  if (v.failed_run(r, "well")) return v;
  const double cf = get(r.summary, "crossing_fraction");
  const double err = get(r.summary, "return_time_error");
  v.check(r.summary.at("n_traj").get<std::size_t>() == 2000, "n_traj 2000");
  v.check(cf == 0.0, "crossing fraction " + num(cf) + " == 0");
  v.check(err < kReturnTimeError, "return-time error " + num(err) + " < " + num(kReturnTimeError));
  v.check(r.seconds < kA3Seconds, "runtime " + num(r.seconds) + " s < " + num(kA3Seconds) + " s");
  return v;
}

Verdict a4(Runner& R) {
  Verdict v;
  const auto& r = R.get("measure");
  if (v.failed_run(r, "measure")) return v;
  const auto& born = r.summary.at("born_frequencies");
  const double f = born.at("alpha_frequency").get<double>();
  const double none = born.at("none_rate").get<double>();
  const double leak = get(r.summary, "leakage_fraction");
  v.check(std::abs(f - kBornTarget) <= kBornTolerance,
          "|alpha|^2 branch frequency " + num(f) + " within " + num(kBornTarget) + " +/- " + num(kBornTolerance));
  v.check(none < kNoneRate, "none-rate " + num(none) + " < " + num(kNoneRate));
  v.check(leak < kLeakage, "leakage " + num(leak) + " < " + num(kLeakage));
  const auto& pure = R.get("measure_pure");
  if (v.failed_run(pure, "measure_pure")) return v;
  const double fp = pure.summary.at("born_frequencies").at("alpha_frequency").get<double>();
  v.check(fp == 1.0, "|alpha|^2 = 1 frequency " + num(fp) + " == 1");
  return v;
}

Verdict a5(Runner& R) {
  Verdict v;
  const auto& r = R.get("decohere");
  if (v.failed_run(r, "decohere")) return v;
  const double stab = get(r.summary, "ewf_stability", "mean");
  const double cf = get(r.summary, "crossing_fraction");
  v.check(stab >= kStability, "EWF stability " + num(stab) + " >= " + num(kStability));
  v.check(cf >= kCrossingRestored, "crossing after t_c " + num(cf) + " >= " + num(kCrossingRestored));
  v.check(r.seconds < kA5Seconds, "runtime " + num(r.seconds) + " s < " + num(kA5Seconds) + " s");
  const auto& ctl = R.get("decohere_control");
  if (v.failed_run(ctl, "decohere_control")) return v;
  const double c0 = get(ctl.summary, "crossing_fraction_total");
  const auto& well = R.get("well");
  v.check(c0 == 0.0 && well.error.empty() && c0 == get(well.summary, "crossing_fraction"),
          "g=0 control crossing " + num(c0) + " == well run");
  return v;
}

Verdict a6(Runner& R) {
  Verdict v;
  for (const char* name : {"decohere", "conditions"}) {
    const auto& r = R.get(name);
    if (v.failed_run(r, name)) return v;
    const auto& d = r.summary.at("decoherence");
    const double e = d.at("decoherence_factor_error").get<double>();
    const auto n = d.at("sample_nodes").get<std::size_t>();
    v.check(e < kFactorError && n == 16,
            std::string(name) + " " + std::to_string(n) + "x" + std::to_string(n) + " max error " + num(e) + " < " +
                num(kFactorError));
  }
  return v;
}

Verdict a7(Runner& R) {
  Verdict v;
  const auto& r = R.get("conditions");
  if (v.failed_run(r, "conditions")) return v;
  const auto& d = r.summary.at("decoherence");
  bool standard = true, bohmian = false;
  for (const auto& rep : r.summary.at("overlap_reports")) {
    standard = standard && rep.at("verdict_standard").get<bool>();
    bohmian = bohmian || rep.at("verdict_bohmian").get<bool>();
  }
  const auto pairs = r.summary.at("overlap_reports").size();
  const double e = d.at("analytic_factor_error").get<double>();
  v.check(pairs > 0 && standard, "verdict_standard true at all " + std::to_string(pairs) + " separations");
  v.check(!bohmian, "verdict_bohmian false at all separations");
  v.check(e < kAnalyticError, "analytic suppression error " + num(e) + " < " + num(kAnalyticError));
  // Recorded only.
  const json& st = r.summary.at("ewf_stability");
  v.detail += "; recorded: stability " + (st.is_null() ? std::string("n/a") : num(st.at("mean").get<double>())) +
              ", crossing after t_c " + num(get(r.summary, "crossing_fraction"));
  return v;
}

Verdict a8(Runner& R) {
  Verdict v;
  double worst = 0.0;
  for (const char* name : {"free_packet", "well", "decohere", "decohere_control", "conditions", "measure",
                           "measure_pure"}) {
    const auto& r = R.get(name);
    if (v.failed_run(r, name)) continue;
    worst = std::max(worst, get(r.summary, "norm_drift"));
  }
  v.check(worst < kNormDrift, "worst norm drift " + num(worst) + " < " + num(kNormDrift));
  for (const char* name : {"decohere", "decohere_control", "conditions"}) {
    const auto& r = R.get(name);
    if (!r.error.empty()) continue;
    const auto& dm = r.summary.at("decoherence").at("density_matrix");
    const bool ok = std::abs(dm.at("trace").get<double>() - 1.0) < kTraceError &&
                    dm.at("hermiticity_error").get<double>() < kHermiticity &&
                    dm.at("min_eigenvalue").get<double>() > kMinEigenvalue;
    v.check(ok, std::string(name) + " rho Hermitian, trace 1, PSD");
  }
  for (const char* name : {"free_packet", "well", "measure_pure"}) {
    const auto& one = R.get(name, 1);
    const auto& two = R.get(name, 2);
    if (v.failed_run(two, name) || !one.error.empty()) continue;
    v.check(one.checksums == two.checksums, std::string(name) + " checksums equal at 1 and 2 threads");
  }
  return v;
}

} // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: bohmlab_acceptance <config dir> [scratch dir]\n";
    return 2;
  }
  const fs::path scratch = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "bohmlab_acceptance";
  fs::remove_all(scratch);
  Runner R(argv[1], scratch);
  const std::vector<std::pair<std::string, std::function<Verdict(Runner&)>>> criteria = {
      {"A1 equivariance", a1},
      {"A2 no-crossing", a2},
      {"A3 caustic confinement", a3},
      {"A4 Born rule", a4},
      {"A5 decoherence restores classicality", a5},
      {"A6 decoherence factor", a6},
      {"A7 condition separation", a7},
      {"A8 numerical hygiene", a8},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const Verdict v = fn(R);
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria pass" : std::to_string(failed) + " criteria fail") << std::endl;
  return failed == 0 ? 0 : 1;
}
