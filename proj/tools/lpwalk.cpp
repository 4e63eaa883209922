// Command-line front end: run experiments, export exact oracle tables, check configs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lpwalk/condition_b.hpp"
#include "lpwalk/config.hpp"
#include "lpwalk/exact_oracle.hpp"
#include "lpwalk/io.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw lpwalk::ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int cmd_run(const std::string& config, const std::string& out, unsigned workers, std::optional<std::uint64_t> seed) {
  const auto cfg = lpwalk::parse_config(slurp(config), seed);
  const auto m = lpwalk::run_all(cfg, workers, out);
  std::cout << lpwalk::detail::read_file(std::filesystem::path(out) / "report.txt");
  return m.exit_code;
}

int cmd_oracle(const std::string& law_spec, std::uint64_t nmax, std::optional<std::int64_t> window, const std::string& out) {
  const std::string text = std::filesystem::exists(law_spec) ? slurp(law_spec) : law_spec;
  const auto law = lpwalk::parse_law_text(text);
  lpwalk::ReturnTailTable table;
  if (law.kind() == lpwalk::LawKind::SimpleNeighbor && law.dim() <= 2 && !window) {
    table = lpwalk::simple_walk_return_table(law.dim(), nmax);
  } else {
    lpwalk::GridOptions opt;
    opt.nmax = nmax;
    opt.window = window;
    table = lpwalk::return_tail_exact(lpwalk::build_grid(law, opt));
  }
  if (out.empty()) {
    lpwalk::write_return_tail_csv(std::cout, table);
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw lpwalk::Error("cannot write " + out);
    lpwalk::write_return_tail_csv(f, table);
  }
  std::cerr << "period " << table.period << ", renewal identity residual " << lpwalk::shortest(table.max_identity_residual)
            << "\n";
  return lpwalk::kExitPass;
}

int cmd_check(const std::string& config, std::optional<std::uint64_t> seed) {
  const auto cfg = lpwalk::parse_config(slurp(config), seed);
  bool ok = true;
  std::cout << "config " << cfg.config_hash << ": " << cfg.experiments.size() << " experiment(s) valid\n";
  for (const auto& s : cfg.experiments) {
    std::cout << s.name << " [" << lpwalk::to_string(s.kind) << "]";
    if (s.membrane.empty()) {
      std::cout << ": no membrane, Condition B not needed\n";
      continue;
    }
    try {
      const auto rep = lpwalk::condition_b_check(s.base, s.membrane, lpwalk::detail::auto_search_radius(s));
      std::cout << ": aperiodic " << (rep.aperiodic ? "yes" : "no") << ", strongly aperiodic "
                << (rep.strongly_aperiodic ? "yes" : "no") << ", subgroup index "
                << (rep.generated_subgroup_index ? std::to_string(*rep.generated_subgroup_index) : "infinite")
                << ", accessibility " << (rep.accessibility_ok ? "ok" : "FAILS") << " (radius " << rep.search_radius << ")\n";
      const bool needs = s.kind == lpwalk::ExperimentKind::OccupationGrowth || s.kind == lpwalk::ExperimentKind::DonskerPreservation;
      if (needs && !rep.holds()) ok = false;
    } catch (const lpwalk::InconclusiveError& e) {
      std::cout << ": inconclusive: " << e.what() << "\n";
    }
  }
  return ok ? lpwalk::kExitPass : lpwalk::kExitThresholdFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally perturbed lattice random walks: experiments and exact oracles"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "run every experiment in a config");
  std::string run_config, run_out = "results";
  unsigned workers = lpwalk::hardware_workers();
  run->add_option("config", run_config, "config JSON")->required();
  run->add_option("--out", run_out, "output directory");
  run->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "override the master seed");

  auto* oracle = app.add_subcommand("oracle", "export exact U_k / R_k table as CSV");
  std::string law_spec, oracle_out;
  std::uint64_t nmax = 1000;
  std::optional<std::int64_t> window;
  oracle->add_option("law", law_spec, "law spec JSON (inline or file)")->required();
  oracle->add_option("--nmax", nmax, "largest k")->required();
  oracle->add_option("--window", window, "grid half-width");
  oracle->add_option("--out", oracle_out, "CSV path (default stdout)");

  auto* check = app.add_subcommand("check", "validate a config and check Condition B");
  std::string check_config;
  check->add_option("config", check_config, "config JSON")->required();
  check->add_option("--seed", seed, "override the master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : lpwalk::kExitConfigError;
  }

  try {
    if (*run) return cmd_run(run_config, run_out, workers, seed);
    if (*oracle) return cmd_oracle(law_spec, nmax, window, oracle_out);
    if (*check) return cmd_check(check_config, seed);
  } catch (const lpwalk::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return lpwalk::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lpwalk::kExitRuntimeError;
  }
  return lpwalk::kExitRuntimeError;
}
