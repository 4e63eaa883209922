#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lpwalk/condition_b.hpp"
#include "lpwalk/error.hpp"
#include "lpwalk/exact_oracle.hpp"
#include "lpwalk/jump_law.hpp"
#include "lpwalk/lattice.hpp"
#include "lpwalk/parallel.hpp"
#include "lpwalk/rng.hpp"
#include "lpwalk/stats.hpp"
#include "lpwalk/walker.hpp"

namespace lpwalk {

enum class ExperimentKind {
  OccupationGrowth,
  ReturnTail,
  LocalLimit,
  DonskerPreservation,
  Skew1D,
  TransientPreservation,
  Counterexample,
  GRatio,
};

inline const char* to_string(ExperimentKind k) noexcept {
  switch (k) {
    case ExperimentKind::OccupationGrowth: return "occupation_growth";
    case ExperimentKind::ReturnTail: return "return_tail";
    case ExperimentKind::LocalLimit: return "local_limit";
    case ExperimentKind::DonskerPreservation: return "donsker_preservation";
    case ExperimentKind::Skew1D: return "skew_1d";
    case ExperimentKind::TransientPreservation: return "transient_preservation";
    case ExperimentKind::Counterexample: return "counterexample";
    case ExperimentKind::GRatio: return "g_ratio";
  }
  return "unknown";
}

inline std::optional<ExperimentKind> experiment_kind_from_string(std::string_view s) noexcept {
  for (auto k : {ExperimentKind::OccupationGrowth, ExperimentKind::ReturnTail, ExperimentKind::LocalLimit,
                 ExperimentKind::DonskerPreservation, ExperimentKind::Skew1D, ExperimentKind::TransientPreservation,
                 ExperimentKind::Counterexample, ExperimentKind::GRatio}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

// The claim each experiment probes, for the human-readable report.
inline const char* claim(ExperimentKind k) noexcept {
  switch (k) {
    case ExperimentKind::OccupationGrowth:
      return "recurrent 2-D walk: T(n)/log n is bounded in probability; auxiliary chain limit is exponential";
    case ExperimentKind::ReturnTail: return "2-D return tail: P{tau_0 > n} decays like K / log n";
    case ExperimentKind::LocalLimit: return "local limit: P{S(cn) = 0} ~ const / n";
    case ExperimentKind::DonskerPreservation:
      return "2-D recurrent walk with light-tailed membrane kicks keeps its Brownian scaling limit";
    case ExperimentKind::Skew1D: return "diagonal walk with asymmetric kick at the origin converges to skew Brownian motion";
    case ExperimentKind::TransientPreservation:
      return "transient walk visits the membrane finitely often and keeps the unperturbed scaling limit";
    case ExperimentKind::Counterexample:
      return "log-log tailed kicks at the origin break tightness: P{max |X(k)| > n} stays bounded away from 0";
    case ExperimentKind::GRatio: return "ratio P{tau_(A-y) > n} / P{tau_0 > n} converges to g_A(y)";
  }
  return "";
}

struct ExperimentParams {
  // occupation growth
  double quantile_factor = 1.5;
  double qq_threshold = 0.97;
  std::optional<LatticePoint> auxiliary_target;
  // donsker / transient
  std::vector<double> times{0.25, 0.5, 1.0};
  double alpha = 0.05;
  double covariance_tolerance = 0.05;
  double pass_fraction = 0.9;
  std::uint32_t seed_repetitions = 1;
  std::uint64_t baseline_replicates = 0;  // unperturbed sample size; 0 means same as replicates
  std::uint64_t ks_horizon = 0;           // transient two-sample horizon; 0 means first horizon
  double stabilization_tolerance = 0.01;
  // skew
  double probability_tolerance = 0.02;
  double ks_max = 0.03;
  // counterexample
  double confidence = 0.99;
  double probability_floor = 0.05;
  // return tail / local limit
  std::uint64_t mc_max_k = 50;
  double sd_tolerance = 5.0;
  std::uint64_t exact_nmax = 0;  // 0 means largest horizon
  double decade_tolerance = 0.15;
  double llt_tolerance = 0.10;
  // g ratio
  std::optional<LatticePoint> target_y;
  // Condition B window; 0 picks one from the laws
  std::int64_t search_radius = 0;
};

struct ExperimentSpec {
  std::string name;
  ExperimentKind kind = ExperimentKind::OccupationGrowth;
  std::uint64_t seed = 0;
  std::uint32_t index = 0;  // experiment slot in the stream key
  std::uint64_t replicates = 100;
  std::vector<std::uint64_t> horizons;
  LatticePoint start;
  JumpLaw base = JumpLaw::simple_neighbor(2);
  Membrane membrane;
  Norm norm = Norm::Sup;
  ExperimentParams params;

  int dim() const noexcept { return start.dim(); }

  void validate() const {
    if (name.empty()) throw ConfigError("experiment name is empty");
    if (replicates < 100) throw ConfigError(name + ": replicate count must be at least 100");
    if (horizons.empty()) throw ConfigError(name + ": horizons list is empty");
    if (!std::is_sorted(horizons.begin(), horizons.end()) ||
        std::adjacent_find(horizons.begin(), horizons.end()) != horizons.end()) {
      throw ConfigError(name + ": horizons must be strictly ascending");
    }
    if (horizons.front() < 1) throw ConfigError(name + ": horizons must be positive");
    if (start.empty()) throw ConfigError(name + ": walk start is missing");
    if (base.dim() != dim()) throw ConfigError(name + ": base law dimension differs from the start point");
    for (const auto& p : membrane.points()) {
      if (p.dim() != dim()) throw ConfigError(name + ": membrane point dimension differs from the walk");
    }
    if (params.seed_repetitions < 1) throw ConfigError(name + ": seed_repetitions must be at least 1");
  }
};

struct Statistic {
  std::string name;
  std::uint64_t horizon = 0;
  double value = 0.0;
  std::optional<double> lower;
  std::optional<double> upper;
};

struct Flag {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string comparison;  // how value relates to threshold when passing, e.g. "<=" or ">="
};

// Plot data: rows of (x, y, y_lo, y_hi).
struct PlotSeries {
  std::string name;
  std::vector<std::array<double, 4>> rows;
};

struct ExperimentResult {
  std::string name;
  ExperimentKind kind = ExperimentKind::OccupationGrowth;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<Statistic> statistics;
  std::vector<Flag> flags;
  std::vector<PlotSeries> plots;
  std::vector<std::string> notes;

  bool passed() const noexcept {
    return std::all_of(flags.begin(), flags.end(), [](const Flag& f) { return f.pass; });
  }

  void stat(std::string n, std::uint64_t h, double v, std::optional<double> lo = {}, std::optional<double> hi = {}) {
    statistics.push_back({std::move(n), h, v, lo, hi});
  }

  const Flag& flag(const std::string& n) const {
    for (const auto& f : flags) {
      if (f.name == n) return f;
    }
    throw Error("no flag named " + n);
  }

  double value(const std::string& n, std::uint64_t h) const {
    for (const auto& s : statistics) {
      if (s.name == n && s.horizon == h) return s.value;
    }
    throw Error("no statistic " + n + " at horizon " + std::to_string(h));
  }

  void flag_at_most(std::string n, double v, double threshold) { flags.push_back({std::move(n), v <= threshold, v, threshold, "<="}); }
  void flag_at_least(std::string n, double v, double threshold) { flags.push_back({std::move(n), v >= threshold, v, threshold, ">="}); }
};

namespace detail {

inline ExperimentResult new_result(const ExperimentSpec& s) {
  ExperimentResult r;
  r.name = s.name;
  r.kind = s.kind;
  r.seed = s.seed;
  return r;
}

inline StreamKey key_for(const ExperimentSpec& s, std::uint32_t substream, std::uint64_t replicate) {
  return StreamKey{s.seed, s.index, substream, static_cast<std::uint32_t>(replicate), 0};
}

inline WalkConfig walk_config(const ExperimentSpec& s, std::uint64_t horizon) {
  WalkConfig c;
  c.start = s.start;
  c.base = s.base;
  c.membrane = s.membrane;
  c.horizon = horizon;
  return c;
}

inline std::int64_t auto_search_radius(const ExperimentSpec& s) {
  if (s.params.search_radius > 0) return s.params.search_radius;
  std::int64_t r = 4;
  auto widen = [&](const JumpLaw& law) {
    if (law.finite_support()) {
      r = std::max(r, 2 * law.max_support_norm() + 2);
    } else {
      r = std::max<std::int64_t>(r, 24);
    }
  };
  widen(s.base);
  for (std::size_t i = 0; i < s.membrane.size(); ++i) widen(s.membrane.law(i));
  for (const auto& p : s.membrane.points()) r = std::max(r, sup_norm(p) + 2);
  if (s.dim() == 3) r = std::min<std::int64_t>(r, 100);
  return r;
}

inline void require_condition_b(const ExperimentSpec& s, ExperimentResult& res) {
  const auto rep = condition_b_check(s.base, s.membrane, auto_search_radius(s));
  if (!rep.aperiodic) throw DomainError(s.name + ": base law is not aperiodic (Condition B fails)");
  if (!rep.accessibility_ok) throw DomainError(s.name + ": membrane exits do not reach every window point (Condition B fails)");
  res.notes.push_back("condition B verified in window radius " + std::to_string(rep.search_radius));
}

inline std::vector<double> sorted_copy(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

inline double log_horizon(std::uint64_t n) { return std::log(static_cast<double>(std::max<std::uint64_t>(n, 2))); }

}  // namespace detail

// Quantiles of T(n)/log n across horizons, plus the auxiliary chain's QQ shape.
inline ExperimentResult exp_occupation_growth(const ExperimentSpec& s, unsigned workers) {
  s.validate();
  auto res = detail::new_result(s);
  if (s.dim() != 2) throw ConfigError(s.name + ": occupation growth needs a 2-D base law");
  const auto mom = s.base.mean_and_covariance();
  if (std::abs(mom.mean[0]) > 1e-12 || std::abs(mom.mean[1]) > 1e-12) throw ConfigError(s.name + ": base law must have zero mean");
  if (!s.membrane.empty()) detail::require_condition_b(s, res);

  auto cfg = detail::walk_config(s, s.horizons.back());
  cfg.checkpoints = s.horizons;
  auto occupations = parallel_map(s.replicates, workers, [&](std::size_t r) {
    const auto sum = run(cfg, detail::key_for(s, 0, r));
    std::vector<std::uint64_t> t;
    for (const auto& c : sum.checkpoints) t.push_back(c.occupation);
    return t;
  });

  std::vector<double> q99;
  PlotSeries plot{"q99_T_over_log_n", {}};
  for (std::size_t h = 0; h < s.horizons.size(); ++h) {
    const auto n = s.horizons[h];
    std::vector<double> v;
    v.reserve(s.replicates);
    for (const auto& o : occupations) v.push_back(static_cast<double>(o[h]) / detail::log_horizon(n));
    const auto sv = detail::sorted_copy(std::move(v));
    res.stat("mean_T_over_log_n", n, mean(sv));
    res.stat("q50_T_over_log_n", n, quantile(sv, 0.5));
    res.stat("q90_T_over_log_n", n, quantile(sv, 0.9));
    const double q = quantile(sv, 0.99);
    res.stat("q99_T_over_log_n", n, q);
    q99.push_back(q);
    plot.rows.push_back({static_cast<double>(n), q, quantile(sv, 0.9), q});
  }
  res.plots.push_back(std::move(plot));
  const double hi = *std::max_element(q99.begin(), q99.end());
  const double lo = *std::min_element(q99.begin(), q99.end());
  const double ratio = hi == 0.0 ? 1.0 : (lo == 0.0 ? INFINITY : hi / lo);
  res.stat("q99_ratio_across_horizons", s.horizons.back(), ratio);
  res.flag_at_most("q99_stable_across_horizons", ratio, s.params.quantile_factor);

  if (s.params.auxiliary_target) {
    const auto& v = *s.params.auxiliary_target;
    auto aux_cfg = detail::walk_config(s, s.horizons.back());
    auto aux = parallel_map(s.replicates, workers, [&](std::size_t r) {
      const auto sum = run_auxiliary(aux_cfg, v, detail::key_for(s, 1, r));
      return static_cast<double>(sum.occupation.total) / detail::log_horizon(s.horizons.back());
    });
    const double corr = exponential_qq_correlation(aux);
    res.stat("auxiliary_mean_T_over_log_n", s.horizons.back(), mean(aux));
    res.stat("auxiliary_exponential_qq_correlation", s.horizons.back(), corr);
    res.flag_at_least("auxiliary_exponential_qq", corr, s.params.qq_threshold);
    const auto sorted = detail::sorted_copy(aux);
    PlotSeries qq{"auxiliary_exponential_qq", {}};
    const auto m = static_cast<double>(sorted.size());
    const std::size_t stride = std::max<std::size_t>(1, sorted.size() / 200);
    for (std::size_t i = 0; i < sorted.size(); i += stride) {
      const double e = -std::log1p(-(static_cast<double>(i) + 0.5) / m);
      qq.rows.push_back({e, sorted[i], sorted[i], sorted[i]});
    }
    res.plots.push_back(std::move(qq));
  }
  return res;
}

// Exact return tail via the renewal identity plus Monte Carlo at short horizons.
inline ExperimentResult exp_return_tail(const ExperimentSpec& s, unsigned workers) {
  s.validate();
  auto res = detail::new_result(s);
  if (s.dim() != 2) throw ConfigError(s.name + ": return tail experiment needs a 2-D base law");
  if (!s.base.finite_support()) throw ConfigError(s.name + ": return tail experiment needs a finite-support law");
  if (!s.membrane.empty()) res.notes.push_back("membrane ignored: the return tail concerns the unperturbed walk");
  const std::uint64_t nmax = std::max(s.params.exact_nmax ? s.params.exact_nmax : s.horizons.back(), s.params.mc_max_k);

  ReturnTailTable table;
  if (s.base.kind() == LawKind::SimpleNeighbor) {
    table = simple_walk_return_table(2, nmax);
    res.notes.push_back("exact U_k from the closed product form");
  } else {
    GridOptions opt;
    opt.nmax = nmax;
    table = return_tail_exact(build_grid(s.base, opt));
    res.notes.push_back("exact U_k from iterated convolution");
  }
  res.stat("renewal_identity_max_residual", nmax, table.max_identity_residual);
  res.flag_at_most("renewal_identity", table.max_identity_residual, 1e-10);

  const auto gamma = s.base.mean_and_covariance().covariance;
  std::vector<std::uint64_t> decades;
  for (auto h : s.horizons) {
    if (h >= 2 && h <= nmax) decades.push_back(h);
  }
  PlotSeries plot{"R_n_log_n", {}};
  for (auto h : decades) {
    const double v = table.R[h] * std::log(static_cast<double>(h));
    res.stat("R_n", h, table.R[h], table.R_lower[h], table.R_upper[h]);
    res.stat("R_n_log_n", h, v);
    plot.rows.push_back({static_cast<double>(h), v, table.R_lower[h] * std::log(static_cast<double>(h)),
                         table.R_upper[h] * std::log(static_cast<double>(h))});
  }
  res.plots.push_back(std::move(plot));
  if (decades.size() >= 2) {
    double worst = 0.0;
    for (std::size_t i = 1; i < decades.size(); ++i) {
      const double a = table.R[decades[i - 1]] * std::log(static_cast<double>(decades[i - 1]));
      const double b = table.R[decades[i]] * std::log(static_cast<double>(decades[i]));
      worst = std::max(worst, std::abs(b / a - 1.0));
    }
    res.flag_at_most("R_log_n_change_per_decade", worst, s.params.decade_tolerance);
    // Increasing on a log-spaced grid from the first to the last decade point.
    bool increasing = true;
    double prev = 0.0;
    const double l0 = std::log(static_cast<double>(decades.front())), l1 = std::log(static_cast<double>(decades.back()));
    for (int i = 0; i <= 200; ++i) {
      auto n = static_cast<std::uint64_t>(std::exp(l0 + (l1 - l0) * i / 200.0));
      n = std::clamp<std::uint64_t>(n & ~std::uint64_t{1}, decades.front(), decades.back());
      const double v = table.R[n] * std::log(static_cast<double>(n));
      if (i > 0 && v < prev) increasing = false;
      prev = v;
    }
    res.flags.push_back({"R_log_n_increasing", increasing, increasing ? 1.0 : 0.0, 1.0, ">="});
    const auto rep = return_tail_constant_report(table.R, gamma, table.period, decades);
    res.stat("fitted_constant", decades.back(), rep.fitted_constant);
    res.stat("statement_constant", decades.back(), rep.statement_constant);
    res.stat("proof_constant", decades.back(), rep.proof_constant);
    res.stat("step_constant", decades.back(), rep.step_constant);
    res.notes.push_back("constant identification: data supports the " + rep.supported +
                        " orientation; closest overall closed form: " + rep.closest_overall);
    const std::uint64_t half = decades.back() / 2;
    if (half >= 2) res.stat("R_2n_over_R_n", half, table.R[2 * half] / table.R[half]);
  }

  // Monte Carlo: first return times of the unperturbed walk, capped at mc_max_k.
  const std::uint64_t K = s.params.mc_max_k;
  WalkConfig cfg;
  cfg.start = s.start;
  cfg.base = s.base;
  cfg.horizon = K;
  cfg.hit_set = {s.start};
  auto taus = parallel_map(s.replicates, workers, [&](std::size_t r) {
    const auto sum = run(cfg, detail::key_for(s, 0, r));
    return sum.first_hit ? *sum.first_hit : K + 1;
  });
  std::vector<std::uint64_t> survivors(K + 1, 0);
  for (auto t : taus) {
    for (std::uint64_t k = 0; k <= K && k < t; ++k) ++survivors[k];
  }
  double worst_sd = 0.0;
  PlotSeries mc{"R_k_monte_carlo", {}};
  const auto N = static_cast<double>(s.replicates);
  for (std::uint64_t k = 1; k <= K; ++k) {
    const double p = static_cast<double>(survivors[k]) / N;
    const double exact = table.R[k];
    const double sd = std::sqrt(std::max(exact * (1.0 - exact), 1e-300) / N);
    worst_sd = std::max(worst_sd, std::abs(p - exact) / sd);
    res.stat("R_k_monte_carlo", k, p, p - 2.0 * sd, p + 2.0 * sd);
    mc.rows.push_back({static_cast<double>(k), p, exact, exact});
  }
  res.plots.push_back(std::move(mc));
  res.stat("monte_carlo_max_sd_deviation", K, worst_sd);
  res.flag_at_most("monte_carlo_vs_exact", worst_sd, s.params.sd_tolerance);
  return res;
}

// n U_{cn} from exact convolution against the closed-form local-limit constant.
inline ExperimentResult exp_local_limit(const ExperimentSpec& s, unsigned /*workers*/) {
  s.validate();
  auto res = detail::new_result(s);
  const std::uint64_t nmax = s.params.exact_nmax ? s.params.exact_nmax : s.horizons.back();
  GridOptions opt;
  opt.nmax = nmax;
  opt.track_first_return = false;
  const auto grid = build_grid(s.base, opt);
  const auto c = period(grid);
  const auto gamma = s.base.mean_and_covariance().covariance;
  const auto rep = llt_constant_report(grid.origin, gamma, c);
  const double target = rep.supported == "statement" ? rep.statement_constant : rep.block_constant;
  for (auto h : s.horizons) {
    if (h / c >= 1 && h / c <= rep.n.size()) res.stat("n_U_cn", h / c, rep.scaled[h / c - 1]);
  }
  PlotSeries plot{"n_U_cn", {}};
  const std::size_t stride = std::max<std::size_t>(1, rep.n.size() / 400);
  for (std::size_t i = 0; i < rep.n.size(); i += stride) {
    plot.rows.push_back({static_cast<double>(rep.n[i]), rep.scaled[i], rep.statement_constant, rep.block_constant});
  }
  res.plots.push_back(std::move(plot));
  res.stat("period", nmax, static_cast<double>(c));
  res.stat("statement_constant", nmax, rep.statement_constant);
  res.stat("block_constant", nmax, rep.block_constant);
  res.stat("extrapolated_limit", nmax, rep.extrapolated);
  res.stat("max_escaped_mass", nmax, grid.escaped.back());
  res.notes.push_back("local-limit constant reading supported by the data: " + rep.supported);
  const double rel = std::abs(rep.last / target - 1.0);
  res.stat("relative_error_at_nmax", nmax, rel);
  res.flag_at_most("n_U_n_near_constant", rel, s.params.llt_tolerance);
  res.flags.push_back({"monotone_approach_last_decade", rep.monotone_last_decade && rep.approaching_last_decade,
                       rep.monotone_last_decade && rep.approaching_last_decade ? 1.0 : 0.0, 1.0, ">="});
  double mass_err = 0.0;
  for (std::size_t k = 0; k < grid.table_mass.size(); ++k) {
    mass_err = std::max(mass_err, std::abs(grid.table_mass[k] + grid.escaped[k] - 1.0));
  }
  res.stat("mass_conservation_error", nmax, mass_err);
  res.flag_at_most("mass_conservation", mass_err, 1e-12);
  return res;
}

// Marginals of X(floor(nt))/sqrt(n) against N(0, t Gamma), per seed repetition.
inline ExperimentResult exp_donsker_preservation(const ExperimentSpec& s, unsigned workers) {
  s.validate();
  auto res = detail::new_result(s);
  if (s.dim() != 2) throw ConfigError(s.name + ": Donsker experiment needs a 2-D base law");
  const auto mom = s.base.mean_and_covariance();
  const auto& gamma = mom.covariance;
  if (!gamma.nondegenerate()) {
    throw DomainError(s.name + ": covariance is degenerate; use the skew_1d experiment for diagonal walks");
  }
  if (std::abs(mom.mean[0]) > 1e-12 || std::abs(mom.mean[1]) > 1e-12) throw ConfigError(s.name + ": base law must have zero mean");
  if (!s.membrane.empty()) detail::require_condition_b(s, res);
  for (std::size_t i = 0; i < s.membrane.size(); ++i) {
    const auto& law = s.membrane.law(i);
    if (law.finite_support()) continue;
    // Tail condition: t -> P{|eta| > t} log t must decay.
    const double a = law.tail(1e3, s.norm).upper * std::log(1e3);
    const double b = law.tail(1e9, s.norm).upper * std::log(1e9);
    if (!(b < a)) res.notes.push_back("warning: kick law at " + s.membrane.point(i).to_string() + " has tail heavier than 1/log t");
  }

  const std::uint64_t n = s.horizons.back();
  std::vector<std::uint64_t> cps;
  for (double t : s.params.times) cps.push_back(static_cast<std::uint64_t>(std::floor(static_cast<double>(n) * t)));
  std::sort(cps.begin(), cps.end());
  auto cfg = detail::walk_config(s, n);
  cfg.checkpoints = cps;
  const double scale = std::sqrt(static_cast<double>(n));
  const std::size_t T = cps.size();
  const auto reps = s.params.seed_repetitions;

  // per-coordinate Bonferroni split so each repetition is one test at level alpha
  const double per_test_alpha = s.params.alpha / 2.0;
  const double thr = ks_threshold(s.replicates, per_test_alpha);
  std::vector<std::uint32_t> passes(T, 0);
  std::vector<double> sxx(T, 0.0), syy(T, 0.0), sxy(T, 0.0);
  double worst_d = 0.0;
  std::vector<double> first_rep_x, first_rep_y;
  for (std::uint32_t rep = 0; rep < reps; ++rep) {
    auto pos = parallel_map(s.replicates, workers, [&](std::size_t r) {
      const auto sum = run(cfg, detail::key_for(s, 2 * rep, r));
      std::vector<double> v;
      v.reserve(2 * T);
      for (const auto& c : sum.checkpoints) {
        v.push_back(static_cast<double>(c.position[0]) / scale);
        v.push_back(static_cast<double>(c.position[1]) / scale);
      }
      return v;
    });
    for (std::size_t j = 0; j < T; ++j) {
      const double t = static_cast<double>(cps[j]) / static_cast<double>(n);
      std::vector<double> x(s.replicates), y(s.replicates);
      for (std::size_t r = 0; r < s.replicates; ++r) {
        x[r] = pos[r][2 * j];
        y[r] = pos[r][2 * j + 1];
      }
      const double s0 = std::sqrt(t * gamma(0, 0)), s1 = std::sqrt(t * gamma(1, 1));
      const double dx = ks_statistic(x, [&](double v) { return normal_cdf(v / s0); });
      const double dy = ks_statistic(y, [&](double v) { return normal_cdf(v / s1); });
      const double d = std::max(dx, dy);
      if (d <= thr) ++passes[j];
      if (j == T - 1) worst_d = std::max(worst_d, d);
      res.stat("ks_rep" + std::to_string(rep) + "_x", cps[j], dx);
      res.stat("ks_rep" + std::to_string(rep) + "_y", cps[j], dy);
      for (std::size_t r = 0; r < s.replicates; ++r) {
        sxx[j] += x[r] * x[r];
        syy[j] += y[r] * y[r];
        sxy[j] += x[r] * y[r];
      }
      if (rep == 0 && j == T - 1) {
        first_rep_x = x;
        first_rep_y = y;
      }
    }
  }
  res.stat("ks_threshold_per_coordinate", n, thr);
  const double total = static_cast<double>(reps) * static_cast<double>(s.replicates);
  const double scale_gamma = gamma.max_abs_entry();
  for (std::size_t j = 0; j < T; ++j) {
    const double t = static_cast<double>(cps[j]) / static_cast<double>(n);
    const double frac = static_cast<double>(passes[j]) / reps;
    res.stat("ks_pass_fraction", cps[j], frac);
    // Zero-mean law: second moments about the origin estimate the covariance.
    const double c00 = sxx[j] / total / t, c11 = syy[j] / total / t, c01 = sxy[j] / total / t;
    res.stat("cov_xx_over_t", cps[j], c00);
    res.stat("cov_yy_over_t", cps[j], c11);
    res.stat("cov_xy_over_t", cps[j], c01);
    if (j == T - 1) {
      res.flag_at_least("ks_gaussian_pass_fraction", frac, s.params.pass_fraction);
      const double err = std::max({std::abs(c00 - gamma(0, 0)), std::abs(c11 - gamma(1, 1)), std::abs(c01 - gamma(0, 1))}) / scale_gamma;
      res.stat("covariance_max_relative_error", cps[j], err);
      res.flag_at_most("covariance_matches_gamma", err, s.params.covariance_tolerance);
    }
  }
  res.stat("ks_worst_at_n", n, worst_d);

  // Two-sample branch: perturbed (first repetition) against the unperturbed walk.
  const std::uint64_t nb = s.params.baseline_replicates ? s.params.baseline_replicates : s.replicates;
  auto base_cfg = detail::walk_config(s, n);
  base_cfg.membrane = Membrane{};
  auto base_pos = parallel_map(nb, workers, [&](std::size_t r) {
    const auto sum = run(base_cfg, detail::key_for(s, 1, r));
    return std::array<double, 2>{static_cast<double>(sum.final_position[0]) / scale,
                                 static_cast<double>(sum.final_position[1]) / scale};
  });
  std::vector<double> bx(nb), by(nb);
  for (std::size_t r = 0; r < nb; ++r) {
    bx[r] = base_pos[r][0];
    by[r] = base_pos[r][1];
  }
  const double d2 = std::max(two_sample_ks(first_rep_x, bx), two_sample_ks(first_rep_y, by));
  const double thr2 = two_sample_ks_threshold(s.replicates, nb, per_test_alpha);
  res.stat("two_sample_ks_vs_unperturbed", n, d2);
  res.stat("two_sample_ks_threshold", n, thr2);
  res.notes.push_back(std::string("two-sample KS against the unperturbed walk ") + (d2 <= thr2 ? "does not reject" : "rejects") +
                      " at the configured level");
  return res;
}

// Diagonal walk with kick (eta, -eta) at the origin: skew Brownian limit.
inline ExperimentResult exp_skew_1d(const ExperimentSpec& s, unsigned workers) {
  s.validate();
  auto res = detail::new_result(s);
  if (s.base.kind() != LawKind::DiagonalEmbedding) throw ConfigError(s.name + ": skew experiment needs a DiagonalEmbedding base");
  if (s.membrane.size() != 1 || !s.membrane.point(0).is_zero()) {
    throw ConfigError(s.name + ": skew experiment needs the membrane {(0,0)}");
  }
  const auto& kick = s.membrane.law(0);
  if (!kick.finite_support()) throw ConfigError(s.name + ": skew kick law must have finite support");
  double e = 0.0, e_abs = 0.0;
  for (const auto& a : kick.atoms()) {
    if (a.point[1] != -a.point[0]) throw ConfigError(s.name + ": skew kick must have the form (eta, -eta)");
    e += a.probability * static_cast<double>(a.point[0]);
    e_abs += a.probability * std::abs(static_cast<double>(a.point[0]));
  }
  if (e_abs == 0.0) throw ConfigError(s.name + ": skew kick must not be identically zero");
  const double gamma = e / e_abs;
  double m2 = 0.0;
  for (const auto& a : s.base.atoms()) m2 += a.probability * static_cast<double>(a.point[0] * a.point[0]);
  const double sigma = std::sqrt(m2);
  const std::uint64_t n = s.horizons.back();
  const SkewBMRef ref{gamma, 1.0};
  res.stat("gamma", n, gamma);
  res.stat("sigma", n, sigma);

  auto cfg = detail::walk_config(s, n);
  cfg.checkpoints = s.horizons;
  struct Out {
    std::vector<std::int64_t> x1;
    bool antisymmetric = true;
  };
  auto outs = parallel_map(s.replicates, workers, [&](std::size_t r) {
    const auto sum = run(cfg, detail::key_for(s, 0, r));
    Out o;
    for (const auto& c : sum.checkpoints) {
      o.x1.push_back(c.position[0]);
      if (c.position[1] != -c.position[0]) o.antisymmetric = false;
    }
    if (sum.final_position[1] != -sum.final_position[0]) o.antisymmetric = false;
    return o;
  });
  bool anti = true;
  for (const auto& o : outs) anti = anti && o.antisymmetric;
  res.flags.push_back({"second_coordinate_is_minus_first", anti, anti ? 1.0 : 0.0, 1.0, ">="});
  const double target = (1.0 + gamma) / 2.0;
  for (std::size_t h = 0; h < s.horizons.size(); ++h) {
    const auto hn = s.horizons[h];
    std::uint64_t positive = 0;
    std::vector<double> scaled(s.replicates);
    const double sc = sigma * std::sqrt(static_cast<double>(hn));
    for (std::size_t r = 0; r < s.replicates; ++r) {
      const auto x = outs[r].x1[h];
      if (x > 0) ++positive;
      scaled[r] = static_cast<double>(x) / sc;
    }
    const double p = static_cast<double>(positive) / static_cast<double>(s.replicates);
    const auto ci = wilson_interval(positive, s.replicates, 0.95);
    const double ks = ks_statistic(scaled, [&](double y) { return skew_bm_cdf(ref, y); });
    res.stat("p_positive", hn, p, ci.lower, ci.upper);
    res.stat("ks_vs_skew_bm", hn, ks);
    if (hn == n) {
      res.flag_at_most("p_positive_near_target", std::abs(p - target), s.params.probability_tolerance);
      res.flag_at_most("ks_vs_skew_bm", ks, s.params.ks_max);
      PlotSeries cdf{"empirical_vs_skew_cdf", {}};
      const auto sorted = detail::sorted_copy(scaled);
      const std::size_t stride = std::max<std::size_t>(1, sorted.size() / 400);
      for (std::size_t i = 0; i < sorted.size(); i += stride) {
        const double f = skew_bm_cdf(ref, sorted[i]);
        cdf.rows.push_back({sorted[i], (static_cast<double>(i) + 1.0) / static_cast<double>(sorted.size()), f, f});
      }
      res.plots.push_back(std::move(cdf));
    }
  }
  res.stat("target_p_positive", n, target);
  return res;
}

namespace detail {

inline bool base_is_transient(const JumpLaw& law) {
  if (law.kind() == LawKind::PolynomialTail) return law.alpha() < 2.0;
  if (law.kind() == LawKind::RegVaryingRadial) return law.alpha() < 1.0 || law.c_plus() != law.c_minus();
  if (law.kind() == LawKind::LogLogRadial) return law.dim() >= 3;
  const auto m = law.mean_and_covariance();
  for (double v : m.mean) {
    if (std::abs(v) > 1e-12) return true;
  }
  return law.dim() >= 3;
}

inline double scaling(const JumpLaw& law, std::uint64_t n) {
  const auto nn = static_cast<double>(n);
  if (law.kind() == LawKind::PolynomialTail && law.alpha() < 2.0) return std::pow(nn, 1.0 / law.alpha());
  if (law.kind() == LawKind::RegVaryingRadial && law.alpha() < 2.0) return std::pow(nn, 1.0 / law.alpha());
  return std::sqrt(nn);
}

}  // namespace detail

// Transient base: T(n) stabilizes; scaled marginals match the unperturbed walk.
inline ExperimentResult exp_transient_preservation(const ExperimentSpec& s, unsigned workers) {
  s.validate();
  auto res = detail::new_result(s);
  if (!detail::base_is_transient(s.base)) throw DomainError(s.name + ": base law looks recurrent; transient experiment requires a transient walk");
  const int d = s.dim();

  auto cfg = detail::walk_config(s, s.horizons.back());
  cfg.checkpoints = s.horizons;
  auto occ = parallel_map(s.replicates, workers, [&](std::size_t r) {
    const auto sum = run(cfg, detail::key_for(s, 0, r));
    std::vector<std::uint64_t> t;
    for (const auto& c : sum.checkpoints) t.push_back(c.occupation);
    return t;
  });
  std::vector<double> means;
  for (std::size_t h = 0; h < s.horizons.size(); ++h) {
    double sum = 0.0;
    for (const auto& o : occ) sum += static_cast<double>(o[h]);
    means.push_back(sum / static_cast<double>(s.replicates));
    res.stat("mean_T", s.horizons[h], means.back());
  }
  if (s.horizons.size() >= 2) {
    const double a = means[means.size() - 2], b = means.back();
    const double rel = a == 0.0 ? (b == 0.0 ? 0.0 : INFINITY) : std::abs(b / a - 1.0);
    res.stat("mean_T_relative_change", s.horizons.back(), rel);
    res.flag_at_most("mean_T_stabilizes", rel, s.params.stabilization_tolerance);
    std::uint64_t grew = 0;
    const std::size_t tenth = static_cast<std::size_t>(
        std::lower_bound(s.horizons.begin(), s.horizons.end(), s.horizons.back() / 10) - s.horizons.begin());
    for (const auto& o : occ) grew += o.back() > o[tenth] ? 1 : 0;
    res.stat("fraction_T_grew_after_nmax_over_10", s.horizons.back(), static_cast<double>(grew) / static_cast<double>(s.replicates));
  }

  const std::uint64_t kn = s.params.ks_horizon ? s.params.ks_horizon : s.horizons.front();
  const double an = detail::scaling(s.base, kn);
  const std::uint64_t nb = s.params.baseline_replicates ? s.params.baseline_replicates : s.replicates;
  auto pert_cfg = detail::walk_config(s, kn);
  auto base_cfg = pert_cfg;
  base_cfg.membrane = Membrane{};
  const double per_test_alpha = s.params.alpha / d;
  const double thr = two_sample_ks_threshold(s.replicates, nb, per_test_alpha);
  std::uint32_t passes = 0;
  for (std::uint32_t rep = 0; rep < s.params.seed_repetitions; ++rep) {
    auto a = parallel_map(s.replicates, workers, [&](std::size_t r) { return run(pert_cfg, detail::key_for(s, 1 + 2 * rep, r)).final_position; });
    auto b = parallel_map(nb, workers, [&](std::size_t r) { return run(base_cfg, detail::key_for(s, 2 + 2 * rep, r)).final_position; });
    double worst = 0.0;
    for (int i = 0; i < d; ++i) {
      std::vector<double> x(a.size()), y(b.size());
      for (std::size_t r = 0; r < a.size(); ++r) x[r] = static_cast<double>(a[r][i]) / an;
      for (std::size_t r = 0; r < b.size(); ++r) y[r] = static_cast<double>(b[r][i]) / an;
      const double ks = two_sample_ks(x, y);
      res.stat("two_sample_ks_rep" + std::to_string(rep) + "_coord" + std::to_string(i), kn, ks);
      worst = std::max(worst, ks);
    }
    if (worst <= thr) ++passes;
  }
  const double frac = static_cast<double>(passes) / s.params.seed_repetitions;
  res.stat("two_sample_ks_threshold", kn, thr);
  res.stat("two_sample_pass_fraction", kn, frac);
  res.flag_at_least("two_sample_ks_pass_fraction", frac, s.params.pass_fraction);
  return res;
}

// P{max_{k<=n} |X(k)| > n} with early exit, against the closed-form first term.
inline ExperimentResult exp_counterexample(const ExperimentSpec& s, unsigned workers) {
  s.validate();
  auto res = detail::new_result(s);
  if (s.norm != Norm::Sup) throw ConfigError(s.name + ": counterexample experiment uses the sup norm");
  if (s.membrane.size() != 1 || s.membrane.law(0).kind() != LawKind::LogLogRadial) {
    throw ConfigError(s.name + ": counterexample needs a single membrane point with a LogLogRadial kick");
  }
  const auto& kick = s.membrane.law(0);
  const double a = kick.scale();
  const double limit = counterexample_first_term_limit(a);
  res.stat("first_term_limit", s.horizons.back(), limit);
  PlotSeries plot{"p_exceed", {}};
  for (std::size_t h = 0; h < s.horizons.size(); ++h) {
    const auto n = s.horizons[h];
    auto cfg = detail::walk_config(s, n);
    cfg.stop_radius = static_cast<std::int64_t>(n);
    auto hit = parallel_map(s.replicates, workers, [&](std::size_t r) {
      const auto sum = run(cfg, detail::key_for(s, static_cast<std::uint32_t>(h), r));
      return static_cast<int>((sum.stop_reasons & kStopRadius) != 0);
    });
    std::uint64_t k = 0;
    for (int v : hit) k += static_cast<std::uint64_t>(v);
    const double p = static_cast<double>(k) / static_cast<double>(s.replicates);
    const auto ci = wilson_interval(k, s.replicates, s.params.confidence);
    res.stat("p_exceed", n, p, ci.lower, ci.upper);
    plot.rows.push_back({static_cast<double>(n), p, ci.lower, ci.upper});
    res.flag_at_least("p_exceed_lower_bound_n" + std::to_string(n), ci.lower, s.params.probability_floor);
    try {
      const double ft = counterexample_first_term(a, [&](double t) { return kick.tail(t, s.norm).lower; }, static_cast<double>(n));
      res.stat("first_term", n, ft);
    } catch (const DomainError&) {
      res.notes.push_back("first term not available at n = " + std::to_string(n) + " (below the exact-tail regime)");
    }
  }
  res.plots.push_back(std::move(plot));
  return res;
}

// Ratio of no-hit probabilities for A - y and {0}, independent samples.
inline ExperimentResult exp_g_ratio(const ExperimentSpec& s, unsigned workers) {
  s.validate();
  auto res = detail::new_result(s);
  if (s.membrane.empty()) throw ConfigError(s.name + ": g ratio needs a nonempty membrane A");
  const LatticePoint y = s.params.target_y ? *s.params.target_y : LatticePoint(s.dim());
  std::vector<LatticePoint> shifted;
  for (const auto& p : s.membrane.points()) shifted.push_back(p - y);
  const LatticePoint origin(s.dim());
  WalkConfig num;
  num.start = origin;
  num.base = s.base;
  num.hit_set = shifted;
  num.horizon = s.horizons.back();
  num.checkpoints = s.horizons;
  WalkConfig den = num;
  den.hit_set = {origin};
  auto first_hits = [&](const WalkConfig& c, std::uint32_t sub) {
    return parallel_map(s.replicates, workers, [&](std::size_t r) {
      const auto sum = run(c, detail::key_for(s, sub, r));
      return sum.first_hit ? *sum.first_hit : s.horizons.back() + 1;
    });
  };
  const auto tn = first_hits(num, 0);
  const auto td = first_hits(den, 1);
  const auto N = static_cast<double>(s.replicates);
  std::optional<Interval> prev;
  bool consistent = true;
  for (auto n : s.horizons) {
    const double p1 = static_cast<double>(std::count_if(tn.begin(), tn.end(), [&](auto t) { return t > n; })) / N;
    const double p2 = static_cast<double>(std::count_if(td.begin(), td.end(), [&](auto t) { return t > n; })) / N;
    if (p1 == 0.0 || p2 == 0.0) {
      res.notes.push_back("degenerate ratio at n = " + std::to_string(n) + ": no surviving paths");
      continue;
    }
    const double r = p1 / p2;
    const double var = r * r * ((1.0 - p1) / (N * p1) + (1.0 - p2) / (N * p2));
    const double half = 1.96 * std::sqrt(var);
    const Interval ci{r - half, r + half};
    res.stat("g_ratio", n, r, ci.lower, ci.upper);
    if (prev && (ci.upper < prev->lower || ci.lower > prev->upper)) consistent = false;
    prev = ci;
  }
  res.flags.push_back({"ratio_consistent_across_horizons", consistent, consistent ? 1.0 : 0.0, 1.0, ">="});
  return res;
}

inline ExperimentResult run_experiment(const ExperimentSpec& s, unsigned workers) {
  switch (s.kind) {
    case ExperimentKind::OccupationGrowth: return exp_occupation_growth(s, workers);
    case ExperimentKind::ReturnTail: return exp_return_tail(s, workers);
    case ExperimentKind::LocalLimit: return exp_local_limit(s, workers);
    case ExperimentKind::DonskerPreservation: return exp_donsker_preservation(s, workers);
    case ExperimentKind::Skew1D: return exp_skew_1d(s, workers);
    case ExperimentKind::TransientPreservation: return exp_transient_preservation(s, workers);
    case ExperimentKind::Counterexample: return exp_counterexample(s, workers);
    case ExperimentKind::GRatio: return exp_g_ratio(s, workers);
  }
  throw Error("unknown experiment kind");
}

}  // namespace lpwalk
