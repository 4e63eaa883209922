#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpwalk/config.hpp"
#include "lpwalk/error.hpp"
#include "lpwalk/experiments.hpp"
#include "lpwalk/format.hpp"

namespace lpwalk {

inline constexpr const char* kToolVersion = "lpwalk 1.0.0";

enum ExitCode : int {
  kExitPass = 0,
  kExitThresholdFailure = 1,
  kExitConfigError = 2,
  kExitRuntimeError = 3,
};

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string hash;  // FNV-1a 64 of the file bytes
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string tool_version = kToolVersion;
  std::vector<std::pair<std::string, std::uint64_t>> replicates;  // experiment -> replicate count
  std::vector<ManifestEntry> outputs;
  std::vector<std::pair<std::string, std::string>> errors;       // experiment -> message
  double wall_clock_seconds = 0.0;
  int exit_code = kExitPass;
};

// Statistic rows: experiment, statistic, horizon, value, lower, upper.
inline std::string results_csv(const ExperimentResult& r) {
  std::string out = "experiment,statistic,horizon,value,lower,upper\n";
  for (const auto& s : r.statistics) {
    out += r.name;
    out += ',';
    out += s.name;
    out += ',';
    out += std::to_string(s.horizon);
    out += ',';
    out += shortest(s.value);
    out += ',';
    if (s.lower) out += shortest(*s.lower);
    out += ',';
    if (s.upper) out += shortest(*s.upper);
    out += '\n';
  }
  return out;
}

inline std::string plot_dat(const PlotSeries& p) {
  std::string out = "x,y,y_lo,y_hi\n";
  for (const auto& row : p.rows) {
    out += shortest(row[0]) + ',' + shortest(row[1]) + ',' + shortest(row[2]) + ',' + shortest(row[3]) + '\n';
  }
  return out;
}

inline Json result_summary(const ExperimentResult& r) {
  Json flags = Json::array();
  for (const auto& f : r.flags) {
    flags.push_back({{"name", f.name}, {"pass", f.pass}, {"value", f.value}, {"threshold", f.threshold}, {"comparison", f.comparison}});
  }
  return {{"name", r.name},   {"kind", to_string(r.kind)}, {"claim", claim(r.kind)}, {"seed", r.seed},
          {"config_hash", r.config_hash}, {"passed", r.passed()}, {"flags", flags}, {"notes", r.notes}};
}

inline std::string report_text(const std::vector<ExperimentResult>& results, const RunManifest& m) {
  std::ostringstream os;
  os << kToolVersion << "  config " << m.config_hash << "  seed " << m.seed << "\n\n";
  for (const auto& r : results) {
    os << (r.passed() ? "PASS " : "FAIL ") << r.name << " [" << to_string(r.kind) << "]\n";
    os << "  claim: " << claim(r.kind) << "\n";
    for (const auto& f : r.flags) {
      os << "  " << (f.pass ? "ok   " : "FAIL ") << f.name << ": " << shortest(f.value) << " (want " << f.comparison << ' '
         << shortest(f.threshold) << ")\n";
    }
    for (const auto& n : r.notes) os << "  note: " << n << "\n";
    os << "\n";
  }
  for (const auto& [name, msg] : m.errors) os << "ERROR " << name << ": " << msg << "\n";
  return os.str();
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + p.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing " + p.string());
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("cannot read " + p.string());
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline void ensure_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("output directory " + dir.string() + " cannot be created: " + ec.message());
  const auto probe = dir / ".lpwalk_write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw Error("output directory " + dir.string() + " is not writable");
  }
  std::filesystem::remove(probe, ec);
}

}  // namespace detail

inline Json manifest_json(const RunManifest& m) {
  Json outputs = Json::array(), reps = Json::object(), errors = Json::array();
  for (const auto& o : m.outputs) outputs.push_back({{"path", o.path}, {"fnv1a64", o.hash}});
  for (const auto& [n, r] : m.replicates) reps[n] = r;
  for (const auto& [n, e] : m.errors) errors.push_back({{"experiment", n}, {"error", e}});
  return {{"config_hash", m.config_hash}, {"seed", m.seed},       {"workers", m.workers},
          {"tool_version", m.tool_version}, {"replicates", reps}, {"outputs", outputs},
          {"errors", errors},           {"wall_clock_seconds", m.wall_clock_seconds}, {"exit_code", m.exit_code}};
}

// Runs every experiment in order (replicates in parallel), writing
// <name>.csv, <name>.<plot>.dat, summary.json, report.txt, errors.json and
// manifest.json. A failing experiment does not stop the others.
inline RunManifest run_all(const ParsedConfig& cfg, unsigned workers, const std::filesystem::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::ensure_writable(out_dir);
  RunManifest m;
  m.config_hash = cfg.config_hash;
  m.seed = cfg.seed;
  m.workers = workers;
  std::vector<ExperimentResult> results;
  Json summary = Json::array();
  auto emit = [&](const std::string& rel, const std::string& bytes) {
    detail::write_file(out_dir / rel, bytes);
    m.outputs.push_back({rel, hex64(fnv1a64(bytes))});
  };
  bool any_fail = false;
  for (const auto& spec : cfg.experiments) {
    m.replicates.emplace_back(spec.name, spec.replicates);
    try {
      auto r = run_experiment(spec, workers);
      r.config_hash = cfg.config_hash;
      emit(spec.name + ".csv", results_csv(r));
      for (const auto& p : r.plots) emit(spec.name + "." + p.name + ".dat", plot_dat(p));
      any_fail = any_fail || !r.passed();
      summary.push_back(result_summary(r));
      results.push_back(std::move(r));
    } catch (const std::exception& e) {
      m.errors.emplace_back(spec.name, e.what());
    }
  }
  m.exit_code = !m.errors.empty() ? kExitRuntimeError : (any_fail ? kExitThresholdFailure : kExitPass);
  Json sj = {{"config_hash", cfg.config_hash}, {"seed", cfg.seed}, {"passed", m.exit_code == kExitPass}, {"experiments", summary}};
  emit("summary.json", sj.dump(2) + "\n");
  emit("report.txt", report_text(results, m));
  Json errs = Json::array();
  for (const auto& [n, e] : m.errors) errs.push_back({{"experiment", n}, {"error", e}});
  emit("errors.json", errs.dump(2) + "\n");
  m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  detail::write_file(out_dir / "manifest.json", manifest_json(m).dump(2) + "\n");
  return m;
}

// Files whose current bytes do not match the manifest's recorded hash (or are missing).
inline std::vector<std::string> verify_manifest(const std::filesystem::path& out_dir) {
  const auto doc = Json::parse(detail::read_file(out_dir / "manifest.json"));
  std::vector<std::string> bad;
  for (const auto& o : doc.at("outputs")) {
    const auto rel = o.at("path").get<std::string>();
    const auto p = out_dir / rel;
    if (!std::filesystem::exists(p) || hex64(fnv1a64(detail::read_file(p))) != o.at("fnv1a64").get<std::string>()) {
      bad.push_back(rel);
    }
  }
  return bad;
}

}  // namespace lpwalk
