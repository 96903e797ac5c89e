#include "bohmlab/artifacts.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <tuple>

#include "bohmlab/error.hpp"

namespace bohmlab::artifacts {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw Error("short write to " + path.string());
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw Error("bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct Files {
  std::vector<std::pair<std::string, std::string>> items; // name, bytes
};

Files render(const experiments::RunArtifacts& a) {
  Files f;
  if (a.has_trajectories) f.items.emplace_back("trajectories.csv", trajectories_csv(a.ensemble, a.dims));
  for (const auto& d : a.densities) f.items.emplace_back("density_" + std::to_string(d.step) + ".csv", density_csv(d));
  if (!a.branches.empty()) f.items.emplace_back("branches.csv", branches_csv(a.branches));
  f.items.emplace_back("summary.json", summary_text(a.summary));
  return f;
}

json manifest_base(const experiments::RunArtifacts& a, double wall_seconds) {
  json m;
  m["tool"] = kToolVersion;
  m["experiment"] = experiments::to_string(a.config.experiment);
  m["seed"] = a.config.ensemble.seed;
  m["config"] = experiments::to_json(a.config);
  m["wall_seconds"] = wall_seconds;
  return m;
}

} // namespace

std::string trajectories_csv(const bohm::Ensemble& ensemble, int dims) {
  std::vector<std::tuple<double, std::size_t, const bohm::Sample*>> rows;
  for (const auto& tr : ensemble.trajectories) {
    for (const auto& s : tr.samples) rows.emplace_back(s.t, tr.id, &s);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  std::string out = dims == 2 ? "t,id,q_x,q_y,v_x,v_y,regularized\n" : "t,id,q_x,v_x,regularized\n";
  for (const auto& [t, id, s] : rows) {
    out += format_double(t);
    out += ',';
    out += std::to_string(id);
    out += ',';
    out += format_double(s->q[0]);
    if (dims == 2) {
      out += ',';
      out += format_double(s->q[1]);
    }
    out += ',';
    out += format_double(s->v[0]);
    if (dims == 2) {
      out += ',';
      out += format_double(s->v[1]);
    }
    out += s->regularized ? ",1\n" : ",0\n";
  }
  return out;
}

bohm::Ensemble parse_trajectories_csv(const std::string& text, int& dims) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("trajectories.csv: missing header");
  if (line == "t,id,q_x,v_x,regularized") {
    dims = 1;
  } else if (line == "t,id,q_x,q_y,v_x,v_y,regularized") {
    dims = 2;
  } else {
    throw Error("trajectories.csv: unexpected header '" + line + "'");
  }
  const std::size_t cols = dims == 2 ? 7 : 5;
  bohm::Ensemble e;
  while (std::getline(in, line)) {
    const auto f = split(line);
    if (f.size() != cols) throw Error("trajectories.csv: bad row '" + line + "'");
    std::size_t id = 0;
    const auto r = std::from_chars(f[1].data(), f[1].data() + f[1].size(), id);
    if (r.ec != std::errc()) throw Error("trajectories.csv: bad id");
    if (id >= e.trajectories.size()) {
      const std::size_t old = e.trajectories.size();
      e.trajectories.resize(id + 1);
      for (std::size_t i = old; i <= id; ++i) e.trajectories[i].id = i;
    }
    bohm::Sample s;
    s.t = parse_double(f[0]);
    s.q[0] = parse_double(f[2]);
    if (dims == 2) {
      s.q[1] = parse_double(f[3]);
      s.v = {parse_double(f[4]), parse_double(f[5])};
    } else {
      s.v[0] = parse_double(f[3]);
    }
    s.regularized = f.back() == "1";
    e.trajectories[id].samples.push_back(s);
  }
  return e;
}

std::string density_csv(const experiments::DensitySnapshot& d) {
  std::string out = d.dims == 2 ? "x,y,density\n" : "x,density\n";
  std::size_t k = 0;
  for (double x : d.x) {
    if (d.dims == 1) {
      out += format_double(x) + ',' + format_double(d.density[k++]) + '\n';
      continue;
    }
    for (double y : d.y) out += format_double(x) + ',' + format_double(y) + ',' + format_double(d.density[k++]) + '\n';
  }
  return out;
}

std::string branches_csv(const std::vector<experiments::BranchRow>& rows) {
  std::string out = "t,label,weight,support_cells\n";
  for (const auto& r : rows) {
    out += format_double(r.t) + ',' + std::to_string(r.label) + ',' + format_double(r.weight) + ',' +
           std::to_string(r.support_cells) + '\n';
  }
  return out;
}

std::string summary_text(const json& summary) { return summary.dump(2) + "\n"; }

json write_artifacts(const experiments::RunArtifacts& a, const fs::path& dir, double wall_seconds) {
  fs::create_directories(dir);
  fs::remove(dir / "manifest.json");
  fs::remove(dir / "manifest.incomplete.json");
  json m = manifest_base(a, wall_seconds);
  m["complete"] = true;
  json sums = json::object();
  for (const auto& [name, bytes] : render(a).items) {
    write_file(dir / name, bytes);
    sums[name] = sha256_hex(bytes);
  }
  m["checksums"] = sums;
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

json write_incomplete(const experiments::RunArtifacts& a, const fs::path& dir, const std::string& error,
                      double wall_seconds) {
  fs::create_directories(dir);
  fs::remove(dir / "manifest.json");
  json m = manifest_base(a, wall_seconds);
  m["complete"] = false;
  m["error"] = error;
  json sums = json::object();
  for (const auto& [name, bytes] : render(a).items) {
    write_file(dir / name, bytes);
    sums[name] = sha256_hex(bytes);
  }
  m["checksums"] = sums;
  write_file(dir / "manifest.incomplete.json", m.dump(2) + "\n");
  return m;
}

Verification verify_manifest(const fs::path& dir) {
  Verification v;
  if (!fs::exists(dir / "manifest.json")) {
    v.ok = false;
    v.problems.push_back("manifest.json is missing");
    return v;
  }
  const json m = json::parse(read_file(dir / "manifest.json"));
  for (const auto& [name, sum] : m.at("checksums").items()) {
    if (!fs::exists(dir / name)) {
      v.ok = false;
      v.problems.push_back(name + ": missing");
    } else if (sha256_hex(read_file(dir / name)) != sum.get<std::string>()) {
      v.ok = false;
      v.problems.push_back(name + ": checksum mismatch");
    }
  }
  return v;
}

} // namespace bohmlab::artifacts
