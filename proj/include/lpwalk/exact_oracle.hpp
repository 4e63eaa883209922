#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lpwalk/error.hpp"
#include "lpwalk/format.hpp"
#include "lpwalk/jump_law.hpp"
#include "lpwalk/lattice.hpp"

namespace lpwalk {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct GridOptions {
  std::uint64_t nmax = 0;
  std::optional<std::int64_t> window;   // default: default_window(law, nmax)
  bool track_first_return = true;       // taboo DP for rigorous R_k bounds
  bool keep_tables = false;             // retain every k-step table
  std::size_t memory_guard_cells = std::size_t{1} << 24;
};

// Exact k-step laws of S_xi restricted to the window sup_norm <= W.
struct ExactGrid {
  int dim = 0;
  std::int64_t window = 0;
  std::int64_t halo = 0;                  // padding half-width beyond the window
  std::uint64_t nmax = 0;
  std::vector<double> origin;             // U_k = P{S(k) = 0} restricted to window paths (lower bound)
  std::vector<double> escaped;            // mass that left the window by time k
  std::vector<double> table_mass;         // sum of the k-step window table
  std::vector<double> first_return;       // lower bound on P{tau_0 = k}
  std::vector<double> survival_in_window; // P{tau_0 > k, path stayed in window}
  std::vector<double> taboo_escaped;      // taboo mass lost through the window edge by time k
  bool has_first_return = false;
  std::vector<std::vector<double>> tables;  // padded tables, if kept
  std::vector<double> final_table;          // padded table at k = nmax

  std::int64_t padded_side() const noexcept { return 2 * (window + halo) + 1; }

  std::size_t cell_index(const LatticePoint& x) const {
    const std::int64_t h = window + halo;
    const std::int64_t side = padded_side();
    std::size_t idx = 0;
    for (int i = dim - 1; i >= 0; --i) idx = idx * static_cast<std::size_t>(side) + static_cast<std::size_t>(x[i] + h);
    return idx;
  }

  // P{S(k) = x} restricted to window paths; needs keep_tables unless k == nmax.
  double probability(std::uint64_t k, const LatticePoint& x) const {
    if (x.dim() != dim) throw ConfigError("grid query dimension mismatch");
    if (k > nmax) throw DomainError("grid query beyond nmax");
    if (sup_norm(x) > window) return 0.0;
    if (k == nmax) return final_table[cell_index(x)];
    if (tables.empty()) throw UnavailableError("grid built without keep_tables");
    return tables[k][cell_index(x)];
  }
};

// Window radius: nmax * max|support|, capped at a 12-sigma diffusive envelope
// around the drift. Escaped mass accounts for anything the cap cuts off.
inline std::int64_t default_window(const JumpLaw& law, std::uint64_t nmax) {
  const std::int64_t m = law.max_support_norm();
  const auto mom = law.mean_and_covariance();
  double drift = 0.0, sigma = 0.0;
  for (int i = 0; i < law.dim(); ++i) {
    drift = std::max(drift, std::abs(mom.mean[static_cast<std::size_t>(i)]));
    sigma = std::max(sigma, std::sqrt(mom.covariance(i, i)));
  }
  const double n = static_cast<double>(nmax);
  const auto cap = static_cast<std::int64_t>(std::ceil(drift * n + 12.0 * sigma * std::sqrt(n))) + m;
  const double full = n * static_cast<double>(m);
  return std::max<std::int64_t>(1, full < static_cast<double>(cap) ? static_cast<std::int64_t>(full) : cap);
}

namespace detail {

// Gather-form convolution. Each output cell sums pairs {s, -s} first, so a
// symmetric input under x -> -x produces an exactly symmetric output.
class Convolver {
 public:
  Convolver(const JumpLaw& law, int dim, std::int64_t window, std::int64_t halo) : dim_(dim), window_(window) {
    h_ = window + halo;
    reach_cap_ = window + halo / 2;
    side_ = 2 * h_ + 1;
    stride_.assign(static_cast<std::size_t>(dim), 1);
    for (int i = 1; i < dim; ++i) stride_[static_cast<std::size_t>(i)] = stride_[static_cast<std::size_t>(i - 1)] * side_;
    const auto& atoms = law.atoms();
    std::vector<bool> used(atoms.size(), false);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (used[i]) continue;
      used[i] = true;
      const auto& a = atoms[i];
      if (a.point.is_zero()) {
        center_ += a.probability;
        continue;
      }
      std::optional<std::size_t> mate;
      for (std::size_t j = i + 1; j < atoms.size(); ++j) {
        if (!used[j] && atoms[j].point == -a.point && atoms[j].probability == a.probability) {
          mate = j;
          break;
        }
      }
      if (mate) {
        used[*mate] = true;
        pairs_.push_back({offset(a.point), a.probability});
      } else {
        singles_.push_back({offset(a.point), a.probability});
      }
    }
  }

  std::size_t cells() const noexcept {
    std::size_t c = 1;
    for (int i = 0; i < dim_; ++i) c *= static_cast<std::size_t>(side_);
    return c;
  }

  std::size_t center_index() const noexcept {
    std::size_t idx = 0;
    for (int i = 0; i < dim_; ++i) idx += static_cast<std::size_t>(h_ * stride_[static_cast<std::size_t>(i)]);
    return idx;
  }

  // next = law * cur on |x| <= window + m. Cells beyond the window are
  // accumulated into the returned escaped mass and zeroed.
  double apply(const std::vector<double>& cur, std::vector<double>& next, std::int64_t reach) const {
    std::fill(next.begin(), next.end(), 0.0);
    const std::int64_t ext = std::min(reach, reach_cap_);
    CompensatedSum escaped;
    std::vector<std::int64_t> coord(static_cast<std::size_t>(dim_), -ext);
    for (;;) {
      bool row_outside = false;
      std::int64_t base = 0;
      for (int i = 1; i < dim_; ++i) {
        const auto c = coord[static_cast<std::size_t>(i)];
        if (c > window_ || c < -window_) row_outside = true;
        base += (c + h_) * stride_[static_cast<std::size_t>(i)];
      }
      for (std::int64_t x = -ext; x <= ext; ++x) {
        const auto idx = static_cast<std::size_t>(base + x + h_);
        double v = center_ * cur[idx];
        for (const auto& p : pairs_) {
          v += p.prob * (cur[idx - static_cast<std::size_t>(p.off)] + cur[idx + static_cast<std::size_t>(p.off)]);
        }
        for (const auto& s : singles_) v += s.prob * cur[idx - static_cast<std::size_t>(s.off)];
        if (row_outside || x > window_ || x < -window_) {
          escaped.add(v);
        } else {
          next[idx] = v;
        }
      }
      int i = 1;
      for (; i < dim_; ++i) {
        auto& c = coord[static_cast<std::size_t>(i)];
        if (++c <= ext) break;
        c = -ext;
      }
      if (i >= dim_) break;
    }
    return escaped.value();
  }

 private:
  struct Term {
    std::int64_t off;
    double prob;
  };

  std::int64_t offset(const LatticePoint& p) const noexcept {
    std::int64_t o = 0;
    for (int i = 0; i < dim_; ++i) o += p[i] * stride_[static_cast<std::size_t>(i)];
    return o;
  }

  int dim_;
  std::int64_t window_;
  std::int64_t h_ = 0;
  std::int64_t reach_cap_ = 0;
  std::int64_t side_ = 0;
  std::vector<std::int64_t> stride_;
  double center_ = 0.0;
  std::vector<Term> pairs_;
  std::vector<Term> singles_;
};

inline double table_sum(const std::vector<double>& t) {
  CompensatedSum s;
  for (double v : t) s.add(v);
  return s.value();
}

}  // namespace detail

// Iterated convolution of a finite-support law, k = 0..nmax.
inline ExactGrid build_grid(const JumpLaw& law, const GridOptions& opt) {
  if (!law.finite_support()) throw ConfigError("exact grid needs a finite-support law");
  ExactGrid g;
  g.dim = law.dim();
  g.nmax = opt.nmax;
  g.window = opt.window ? *opt.window : default_window(law, opt.nmax);
  if (g.window < 1) throw ConfigError("grid window must be positive");
  const std::int64_t m = std::max<std::int64_t>(1, law.max_support_norm());
  g.halo = 2 * m;
  double cells = std::pow(static_cast<double>(g.padded_side()), g.dim);
  if (cells > static_cast<double>(opt.memory_guard_cells)) {
    throw MemoryGuardError("grid of " + std::to_string(static_cast<long long>(cells)) + " cells exceeds memory guard");
  }
  if (opt.keep_tables && cells * static_cast<double>(opt.nmax + 1) > static_cast<double>(opt.memory_guard_cells) * 4) {
    throw MemoryGuardError("keeping all grid tables exceeds memory guard");
  }
  detail::Convolver conv(law, g.dim, g.window, g.halo);
  const std::size_t n_cells = conv.cells();
  const std::size_t center = conv.center_index();

  std::vector<double> cur(n_cells, 0.0), next(n_cells, 0.0);
  cur[center] = 1.0;
  std::vector<double> taboo, taboo_next;
  g.has_first_return = opt.track_first_return;
  if (g.has_first_return) {
    taboo.assign(n_cells, 0.0);
    taboo_next.assign(n_cells, 0.0);
    taboo[center] = 1.0;
  }
  const auto reserve = static_cast<std::size_t>(opt.nmax + 1);
  g.origin.reserve(reserve);
  g.escaped.reserve(reserve);
  g.table_mass.reserve(reserve);
  g.origin.push_back(1.0);
  g.escaped.push_back(0.0);
  g.table_mass.push_back(1.0);
  if (g.has_first_return) {
    g.first_return.push_back(0.0);
    g.survival_in_window.push_back(1.0);
    g.taboo_escaped.push_back(0.0);
  }
  if (opt.keep_tables) g.tables.push_back(cur);

  double escaped_total = 0.0, taboo_escaped_total = 0.0;
  for (std::uint64_t k = 1; k <= opt.nmax; ++k) {
    const auto reach = static_cast<std::int64_t>(std::min<std::uint64_t>(k, static_cast<std::uint64_t>(g.window + m))) * m;
    escaped_total += conv.apply(cur, next, reach);
    std::swap(cur, next);
    g.origin.push_back(cur[center]);
    g.escaped.push_back(escaped_total);
    g.table_mass.push_back(detail::table_sum(cur));
    if (g.has_first_return) {
      taboo_escaped_total += conv.apply(taboo, taboo_next, reach);
      std::swap(taboo, taboo_next);
      g.first_return.push_back(taboo[center]);
      taboo[center] = 0.0;
      g.survival_in_window.push_back(detail::table_sum(taboo));
      g.taboo_escaped.push_back(taboo_escaped_total);
    }
    if (opt.keep_tables) g.tables.push_back(cur);
  }
  g.final_table = std::move(cur);
  return g;
}

// gcd of all k in 1..K with U_k > 0.
inline std::uint64_t period(std::span<const double> origin) {
  std::uint64_t c = 0;
  for (std::size_t k = 1; k < origin.size(); ++k) {
    if (origin[k] > 0.0) c = std::gcd(c, static_cast<std::uint64_t>(k));
  }
  if (c == 0) throw DomainError("no return to the origin within nmax");
  return c;
}

inline std::uint64_t period(const ExactGrid& g) { return period(g.origin); }

struct ReturnTailTable {
  std::vector<double> U, U_lower, U_upper;
  std::vector<double> R, R_lower, R_upper;
  std::uint64_t period = 0;
  double max_identity_residual = 0.0;  // max_n |sum_k U_k R_{n-k} - 1|
};

// R_n = (1 - sum_{k=1}^{n} U_k R_{n-k}) / U_0, compensated summation.
inline std::vector<double> renewal_tail(std::span<const double> U) {
  if (U.empty() || !(U[0] > 0.0)) throw DomainError("renewal recursion needs U_0 > 0");
  std::vector<std::size_t> nonzero;
  for (std::size_t k = 1; k < U.size(); ++k) {
    if (U[k] != 0.0) nonzero.push_back(k);
  }
  std::vector<double> R(U.size());
  R[0] = 1.0 / U[0];
  for (std::size_t n = 1; n < U.size(); ++n) {
    CompensatedSum s;
    s.add(1.0);
    for (std::size_t k : nonzero) {
      if (k > n) break;
      s.add(-U[k] * R[n - k]);
    }
    R[n] = s.value() / U[0];
  }
  return R;
}

// max_n |sum_{k=0}^{n} U_k R_{n-k} - 1|, summed in the opposite order to renewal_tail.
inline double renewal_identity_residual(std::span<const double> U, std::span<const double> R) {
  std::vector<std::size_t> nonzero;
  for (std::size_t k = 0; k < U.size(); ++k) {
    if (U[k] != 0.0) nonzero.push_back(k);
  }
  double worst = 0.0;
  for (std::size_t n = 0; n < U.size() && n < R.size(); ++n) {
    CompensatedSum s;
    auto end = std::upper_bound(nonzero.begin(), nonzero.end(), n);
    for (auto it = end; it != nonzero.begin();) {
      --it;
      s.add(U[*it] * R[n - *it]);
    }
    worst = std::max(worst, std::abs(s.value() - 1.0));
  }
  return worst;
}

inline ReturnTailTable return_tail_exact(const ExactGrid& g) {
  ReturnTailTable t;
  t.U = g.origin;
  t.U_lower = g.origin;
  t.U_upper.resize(g.origin.size());
  for (std::size_t k = 0; k < g.origin.size(); ++k) t.U_upper[k] = std::min(1.0, g.origin[k] + g.escaped[k]);
  t.R = renewal_tail(t.U);
  if (g.has_first_return) {
    t.R_lower = g.survival_in_window;
    t.R_upper.resize(t.R_lower.size());
    for (std::size_t k = 0; k < t.R_lower.size(); ++k) t.R_upper[k] = std::min(1.0, t.R_lower[k] + g.taboo_escaped[k]);
  } else {
    t.R_lower = t.R;
    t.R_upper = t.R;
  }
  t.period = period(g);
  t.max_identity_residual = renewal_identity_residual(t.U, t.R);
  return t;
}

// U_k for the simple walk in d = 1 or 2 from the closed form
// U_{2n} = (C(2n, n) 4^{-n})^d, odd k zero.
inline std::vector<double> simple_walk_origin(int dim, std::uint64_t nmax) {
  if (dim != 1 && dim != 2) throw ConfigError("closed-form return probabilities only for d = 1, 2");
  std::vector<double> U(static_cast<std::size_t>(nmax + 1), 0.0);
  U[0] = 1.0;
  double central = 1.0;  // C(2n, n) / 4^n
  for (std::uint64_t n = 1; 2 * n <= nmax; ++n) {
    central *= static_cast<double>(2 * n - 1) / static_cast<double>(2 * n);
    U[static_cast<std::size_t>(2 * n)] = dim == 1 ? central : central * central;
  }
  return U;
}

inline ReturnTailTable simple_walk_return_table(int dim, std::uint64_t nmax) {
  ReturnTailTable t;
  t.U = simple_walk_origin(dim, nmax);
  t.U_lower = t.U;
  t.U_upper = t.U;
  t.R = renewal_tail(t.U);
  t.R_lower = t.R;
  t.R_upper = t.R;
  t.period = period(t.U);
  t.max_identity_residual = renewal_identity_residual(t.U, t.R);
  return t;
}

// Columns k, U_k, U_lower, U_upper, R_k, R_lower, R_upper.
inline void write_return_tail_csv(std::ostream& os, const ReturnTailTable& t) {
  os << "k,U_k,U_lower,U_upper,R_k,R_lower,R_upper\n";
  for (std::size_t k = 0; k < t.U.size(); ++k) {
    os << k << ',' << shortest(t.U[k]) << ',' << shortest(t.U_lower[k]) << ',' << shortest(t.U_upper[k]) << ','
       << shortest(t.R[k]) << ',' << shortest(t.R_lower[k]) << ',' << shortest(t.R_upper[k]) << '\n';
  }
}

// Local-limit check: n U_{cn} against c / (2 pi sqrt det) and 1 / (2 pi sqrt det).
struct LltReport {
  std::uint64_t period = 0;
  double det_gamma = 0.0;
  double statement_constant = 0.0;  // c / (2 pi sqrt det Gamma)
  double block_constant = 0.0;      // 1 / (2 pi sqrt det Gamma)
  std::vector<std::uint64_t> n;
  std::vector<double> scaled;       // n * U_{cn}
  double last = 0.0;
  double extrapolated = 0.0;        // Richardson, assuming an O(1/n) correction
  double rel_error_statement = 0.0;
  double rel_error_block = 0.0;
  std::string supported;            // "statement", "block" or "both"
  std::uint64_t positive_from = 0;  // U_{cn} > 0 for all n >= positive_from
  bool monotone_last_decade = false;
  bool approaching_last_decade = false;
};

inline LltReport llt_constant_report(std::span<const double> origin, const CovarianceMatrix& gamma, std::uint64_t c) {
  if (!gamma.nondegenerate()) throw DomainError("local limit report requires a nondegenerate covariance");
  if (c == 0) throw DomainError("period must be positive");
  LltReport r;
  r.period = c;
  r.det_gamma = gamma.determinant();
  const double root = std::sqrt(r.det_gamma);
  r.statement_constant = static_cast<double>(c) / (2.0 * std::numbers::pi * root);
  r.block_constant = 1.0 / (2.0 * std::numbers::pi * root);
  const std::uint64_t blocks = (origin.size() - 1) / c;
  if (blocks < 20) throw DomainError("local limit report needs at least 20 blocks");
  r.positive_from = blocks + 1;
  for (std::uint64_t n = blocks; n >= 1; --n) {
    if (origin[static_cast<std::size_t>(c * n)] > 0.0) {
      r.positive_from = n;
    } else {
      break;
    }
  }
  for (std::uint64_t n = 1; n <= blocks; ++n) {
    r.n.push_back(n);
    r.scaled.push_back(static_cast<double>(n) * origin[static_cast<std::size_t>(c * n)]);
  }
  r.last = r.scaled.back();
  const double half = r.scaled[static_cast<std::size_t>(blocks / 2 - 1)];
  const double n_last = static_cast<double>(blocks), n_half = static_cast<double>(blocks / 2);
  // v(n) = L + b / n  =>  L = (n_last v_last - n_half v_half) / (n_last - n_half)
  r.extrapolated = (n_last * r.last - n_half * half) / (n_last - n_half);
  r.rel_error_statement = std::abs(r.extrapolated / r.statement_constant - 1.0);
  r.rel_error_block = std::abs(r.extrapolated / r.block_constant - 1.0);
  if (c == 1) {
    r.supported = "both";
  } else {
    r.supported = r.rel_error_statement < r.rel_error_block ? "statement" : "block";
  }
  const std::uint64_t from = std::max<std::uint64_t>(1, blocks / 10);
  bool inc = true, dec = true, approach = true;
  const double target = r.supported == "statement" ? r.statement_constant : r.block_constant;
  for (std::uint64_t n = from + 1; n <= blocks; ++n) {
    const double a = r.scaled[static_cast<std::size_t>(n - 2)], b = r.scaled[static_cast<std::size_t>(n - 1)];
    inc = inc && b >= a;
    dec = dec && b <= a;
    approach = approach && std::abs(b - target) <= std::abs(a - target);
  }
  r.monotone_last_decade = inc || dec;
  r.approaching_last_decade = approach;
  return r;
}

// R_n log n against the two orientations of the constant and the c-free form.
struct ReturnTailConstantReport {
  std::vector<std::uint64_t> n;
  std::vector<double> scaled;        // R_n log n
  double fitted_constant = 0.0;      // K in R_n ~ K / (log n + b), from the last two points
  double statement_constant = 0.0;   // c / (2 pi sqrt det Gamma)
  double proof_constant = 0.0;       // 2 pi sqrt det Gamma / c
  double step_constant = 0.0;        // 2 pi sqrt det Gamma
  std::string supported;             // "statement" or "proof" (closer in log-ratio)
  std::string closest_overall;       // among all three
};

inline ReturnTailConstantReport return_tail_constant_report(std::span<const double> R, const CovarianceMatrix& gamma,
                                                            std::uint64_t c, std::span<const std::uint64_t> horizons) {
  if (horizons.size() < 2) throw DomainError("constant report needs at least two horizons");
  ReturnTailConstantReport rep;
  const double root = std::sqrt(gamma.determinant());
  rep.statement_constant = static_cast<double>(c) / (2.0 * std::numbers::pi * root);
  rep.proof_constant = 2.0 * std::numbers::pi * root / static_cast<double>(c);
  rep.step_constant = 2.0 * std::numbers::pi * root;
  for (auto h : horizons) {
    if (h >= R.size() || h < 2) throw DomainError("constant report horizon outside the table");
    rep.n.push_back(h);
    rep.scaled.push_back(R[h] * std::log(static_cast<double>(h)));
  }
  const auto n1 = static_cast<double>(rep.n[rep.n.size() - 2]), n2 = static_cast<double>(rep.n.back());
  const double r1 = R[rep.n[rep.n.size() - 2]], r2 = R[rep.n.back()];
  rep.fitted_constant = (std::log(n2) - std::log(n1)) / (1.0 / r2 - 1.0 / r1);
  auto dist = [&](double cst) { return std::abs(std::log(rep.fitted_constant / cst)); };
  rep.supported = dist(rep.statement_constant) <= dist(rep.proof_constant) ? "statement" : "proof";
  const double ds = dist(rep.statement_constant), dp = dist(rep.proof_constant), dq = dist(rep.step_constant);
  rep.closest_overall = (ds <= dp && ds <= dq) ? "statement" : (dp <= dq ? "proof" : "step");
  return rep;
}

// Closed-form first summand of the non-tightness lower bound:
// (1 - P{|eta| <= e^sqrt(log n)}^floor(log log n)) P{|eta| > 2n} / P{|eta| > e^sqrt(log n)}.
inline double counterexample_first_term(double a, const std::function<double(double)>& tail, double n) {
  if (!(a > 0.0)) throw DomainError("scale a must be positive");
  if (!(n > std::numbers::e)) throw DomainError("horizon must exceed e");
  const double l1 = std::log(n);
  const double l2 = std::log(l1);
  const double threshold = std::exp(std::sqrt(l1));
  if (threshold < std::exp(std::exp(a))) {
    throw DomainError("horizon " + shortest(n) + " below the exact-tail regime: exp(sqrt(log n)) < exp(exp(a))");
  }
  const double p_big = tail(threshold);
  const double p_le = 1.0 - p_big;
  const double k = std::floor(l2);
  return (1.0 - std::pow(p_le, k)) * tail(2.0 * n) / p_big;
}

// Limit of the first summand as n -> infinity.
inline double counterexample_first_term_limit(double a) { return -std::expm1(-2.0 * a) / 2.0; }

// Smallest integer horizon in the exact-tail regime for scale a.
inline double counterexample_min_horizon(double a) { return std::ceil(std::exp(std::exp(2.0 * a))); }

}  // namespace lpwalk
