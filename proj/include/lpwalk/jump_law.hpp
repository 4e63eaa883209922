#pragma once

#include <gsl/gsl_sf_zeta.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lpwalk/error.hpp"
#include "lpwalk/lattice.hpp"
#include "lpwalk/rng.hpp"

namespace lpwalk {

enum class LawKind {
  Categorical,
  SimpleNeighbor,
  LazySimpleNeighbor,
  PolynomialTail,
  RegVaryingRadial,
  LogLogRadial,
  DiagonalEmbedding,
};

inline const char* to_string(LawKind k) noexcept {
  switch (k) {
    case LawKind::Categorical: return "Categorical";
    case LawKind::SimpleNeighbor: return "SimpleNeighbor";
    case LawKind::LazySimpleNeighbor: return "LazySimpleNeighbor";
    case LawKind::PolynomialTail: return "PolynomialTail";
    case LawKind::RegVaryingRadial: return "RegVaryingRadial";
    case LawKind::LogLogRadial: return "LogLogRadial";
    case LawKind::DiagonalEmbedding: return "DiagonalEmbedding";
  }
  return "?";
}

struct Atom {
  LatticePoint point;
  double probability = 0.0;
};

// One draw. A saturated draw has no representable increment; loglog_radius
// keeps log(log(radius)) of the real-valued magnitude for statistics.
struct Jump {
  LatticePoint increment;
  bool saturated = false;
  double loglog_radius = 0.0;
};

// P{|xi| > t} as an interval; closed-form kinds return lower == upper.
struct TailValue {
  double lower = 0.0;
  double upper = 0.0;
  bool is_exact() const noexcept { return lower == upper; }
  double mid() const noexcept { return 0.5 * (lower + upper); }
};

struct Moments {
  std::vector<double> mean;
  CovarianceMatrix covariance;
};

struct SupportEnumeration {
  std::vector<Atom> atoms;  // probability 0 marks "positive, not evaluated"
  bool truncated = false;
};

// Vose alias table over a finite probability vector.
// Discrete sampler over indices 0..n-1. Dyadic laws (every probability a
// multiple of 2^-k, k <= 12) use a slot table indexed by k random bits;
// uniform laws use one bounded draw; anything else uses Vose's alias method.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(std::span<const double> probs) {
    const std::size_t n = probs.size();
    if (n == 0 || n > 0xFFFFFFFFull) throw ConfigError("alias table size out of range");
    threshold_.assign(n, 0);
    alias_.assign(n, 0);
    double total = 0.0;
    for (double p : probs) total += p;
    if (build_slots(probs, total)) return;
    uniform_ = std::all_of(probs.begin(), probs.end(), [&](double p) { return p == probs[0]; });
    if (uniform_) return;
    std::vector<double> scaled(n);
    std::vector<std::uint32_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = probs[i] / total * static_cast<double>(n);
      (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
    }
    while (!small.empty() && !large.empty()) {
      const std::uint32_t s = small.back();
      small.pop_back();
      const std::uint32_t l = large.back();
      threshold_[s] = to_threshold(scaled[s]);
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (auto i : large) threshold_[i] = kAlways;
    for (auto i : small) threshold_[i] = kAlways;
  }

  std::size_t size() const noexcept { return threshold_.size(); }

  std::size_t sample(Stream& rng) const {
    if (slot_bits_ > 0) return slots_[rng.bits(slot_bits_)];
    const auto n = static_cast<std::uint32_t>(threshold_.size());
    if (uniform_) return n <= 0x10000u ? rng.bounded16(n) : rng.bounded(n);
    const std::uint32_t i = rng.bounded(n);
    return std::uint64_t{rng.next_u32()} < threshold_[i] ? i : alias_[i];
  }

 private:
  static constexpr std::uint64_t kAlways = std::uint64_t{1} << 32;
  static constexpr int kMaxSlotBits = 12;

  static std::uint64_t to_threshold(double p) noexcept {
    const double v = std::ldexp(p, 32);
    if (v >= 0x1.0p32) return kAlways;
    return static_cast<std::uint64_t>(std::llround(v));
  }

  bool build_slots(std::span<const double> probs, double total) {
    if (total != 1.0 || probs.size() == 1) return false;
    for (int k = 1; k <= kMaxSlotBits; ++k) {
      const double scale = std::ldexp(1.0, k);
      bool dyadic = true;
      for (double p : probs) {
        const double c = p * scale;
        if (c != std::floor(c)) {
          dyadic = false;
          break;
        }
      }
      if (!dyadic) continue;
      slots_.clear();
      for (std::size_t i = 0; i < probs.size(); ++i) {
        slots_.insert(slots_.end(), static_cast<std::size_t>(probs[i] * scale), static_cast<std::uint32_t>(i));
      }
      slot_bits_ = k;
      return true;
    }
    return false;
  }

  std::vector<std::uint64_t> threshold_;
  std::vector<std::uint32_t> alias_;
  std::vector<std::uint32_t> slots_;
  int slot_bits_ = 0;
  bool uniform_ = false;
};

// Hurwitz zeta sum_{n >= q} n^{-s}, s > 1, q >= 1.
inline double hurwitz_zeta(double s, double q) {
  gsl_sf_result r;
  if (gsl_sf_hzeta_e(s, q, &r) != 0) throw DomainError("hurwitz zeta evaluation failed");
  return r.val;
}

// Jump distribution on Z^d. Immutable; copies share state.
class JumpLaw {
 public:
  // Radius of the exactly summed core for PolynomialTail normalization.
  static constexpr std::int64_t kPolynomialSumRadius = 512;

  static JumpLaw categorical(std::vector<Atom> atoms, double tolerance = 1e-12) {
    if (atoms.empty()) throw ConfigError("categorical law needs at least one atom");
    const int dim = atoms.front().point.dim();
    double total = 0.0;
    for (const auto& a : atoms) {
      if (a.point.dim() != dim) throw ConfigError("categorical law atoms must share one dimension");
      if (!(a.probability > 0.0)) throw ConfigError("categorical law probabilities must be positive");
      total += a.probability;
    }
    if (std::abs(total - 1.0) > tolerance) {
      throw ConfigError("categorical law probabilities sum to " + format_double(total) + ", not 1");
    }
    auto sorted = atoms;
    std::sort(sorted.begin(), sorted.end(), [](const Atom& a, const Atom& b) { return a.point < b.point; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      if (sorted[i].point == sorted[i - 1].point) {
        throw ConfigError("categorical law support points must be distinct: " + sorted[i].point.to_string());
      }
    }
    auto st = std::make_shared<State>();
    st->kind = LawKind::Categorical;
    st->dim = dim;
    st->atoms = std::move(atoms);
    st->finalize_finite();
    return JumpLaw(std::move(st));
  }

  static JumpLaw simple_neighbor(int dim) {
    check_dim(dim);
    auto st = std::make_shared<State>();
    st->kind = LawKind::SimpleNeighbor;
    st->dim = dim;
    const double p = 1.0 / (2.0 * dim);
    for (int i = 0; i < dim; ++i) {
      st->atoms.push_back({LatticePoint::unit(dim, i, 1), p});
      st->atoms.push_back({LatticePoint::unit(dim, i, -1), p});
    }
    st->finalize_finite();
    return JumpLaw(std::move(st));
  }

  static JumpLaw lazy_simple_neighbor(int dim, double p0) {
    check_dim(dim);
    if (!(p0 > 0.0 && p0 < 1.0)) throw ConfigError("laziness p0 must lie in (0, 1)");
    auto st = std::make_shared<State>();
    st->kind = LawKind::LazySimpleNeighbor;
    st->dim = dim;
    st->params.p0 = p0;
    st->atoms.push_back({LatticePoint(dim), p0});
    const double p = (1.0 - p0) / (2.0 * dim);
    for (int i = 0; i < dim; ++i) {
      st->atoms.push_back({LatticePoint::unit(dim, i, 1), p});
      st->atoms.push_back({LatticePoint::unit(dim, i, -1), p});
    }
    st->finalize_finite();
    return JumpLaw(std::move(st));
  }

  // P{xi = x} proportional to 1 / (1 + |x|^(2 + alpha)) on Z^2, euclidean |x|.
  // Exact sampler: alias table on sup-norm <= window, dominated rejection beyond.
  static JumpLaw polynomial_tail(double alpha, std::int64_t window = 64) {
    if (!(alpha > 0.0)) throw ConfigError("polynomial tail index alpha must be positive");
    if (window < 1 || window > 2048) throw ConfigError("polynomial tail window must lie in [1, 2048]");
    auto st = std::make_shared<State>();
    st->kind = LawKind::PolynomialTail;
    st->dim = 2;
    st->params.alpha = alpha;
    st->params.window = window;
    const std::int64_t side = 2 * window + 1;
    std::vector<double> w(static_cast<std::size_t>(side * side));
    double sum = 0.0;
    for (std::int64_t y = -window; y <= window; ++y) {
      for (std::int64_t x = -window; x <= window; ++x) {
        const double v = polynomial_weight(x, y, alpha);
        w[static_cast<std::size_t>((y + window) * side + (x + window))] = v;
        sum += v;
      }
    }
    st->window_alias = AliasTable(w);
    st->window_mass = sum;
    st->tail_bound = 8.0 / (alpha * std::pow(static_cast<double>(window), alpha));
    return JumpLaw(std::move(st));
  }

  // One-dimensional two-sided lattice Pareto law:
  // P{xi = n} = c_+ n^(-1-alpha) / zeta(1+alpha), P{xi = -n} = c_- n^(-1-alpha) / zeta(1+alpha), n >= 1.
  static JumpLaw reg_varying_radial(double alpha, double c_plus, double c_minus) {
    if (!(alpha > 0.0)) throw ConfigError("regularly varying tail index alpha must be positive");
    if (c_plus < 0.0 || c_minus < 0.0 || std::abs(c_plus + c_minus - 1.0) > 1e-12) {
      throw ConfigError("c_plus and c_minus must be nonnegative and sum to 1");
    }
    auto st = std::make_shared<State>();
    st->kind = LawKind::RegVaryingRadial;
    st->dim = 1;
    st->params.alpha = alpha;
    st->params.c_plus = c_plus;
    st->params.c_minus = c_minus;
    return JumpLaw(std::move(st));
  }

  // Radius R = exp(exp(a / U)), U uniform on (0, 1], lattice magnitude ceil(R)
  // along a uniformly chosen axis direction. P{R > t} = min(1, a / log log t).
  static JumpLaw log_log_radial(int dim, double a) {
    check_dim(dim);
    if (!(a > 0.0)) throw ConfigError("log-log scale a must be positive");
    auto st = std::make_shared<State>();
    st->kind = LawKind::LogLogRadial;
    st->dim = dim;
    st->params.scale = a;
    return JumpLaw(std::move(st));
  }

  // xi = (b, -b) with b drawn from a finite one-dimensional law.
  static JumpLaw diagonal_embedding(const JumpLaw& base) {
    if (base.dim() != 1 || !base.finite_support()) {
      throw ConfigError("diagonal embedding needs a finite one-dimensional base law");
    }
    auto st = std::make_shared<State>();
    st->kind = LawKind::DiagonalEmbedding;
    st->dim = 2;
    for (const auto& a : base.atoms()) st->atoms.push_back({LatticePoint{a.point[0], -a.point[0]}, a.probability});
    st->finalize_finite();
    return JumpLaw(std::move(st));
  }

  LawKind kind() const noexcept { return state_->kind; }
  int dim() const noexcept { return state_->dim; }

  bool finite_support() const noexcept {
    switch (kind()) {
      case LawKind::Categorical:
      case LawKind::SimpleNeighbor:
      case LawKind::LazySimpleNeighbor:
      case LawKind::DiagonalEmbedding: return true;
      default: return false;
    }
  }

  const std::vector<Atom>& atoms() const {
    if (!finite_support()) throw UnavailableError(std::string(to_string(kind())) + " has infinite support");
    return state_->atoms;
  }

  std::int64_t max_support_norm() const {
    std::int64_t m = 0;
    for (const auto& a : atoms()) m = std::max(m, sup_norm(a.point));
    return m;
  }

  double alpha() const noexcept { return state_->params.alpha; }
  double scale() const noexcept { return state_->params.scale; }
  double laziness() const noexcept { return state_->params.p0; }
  double c_plus() const noexcept { return state_->params.c_plus; }
  double c_minus() const noexcept { return state_->params.c_minus; }
  std::int64_t window() const noexcept { return state_->params.window; }

  // Symmetric under x -> -x with equal weights (finite kinds only; others by construction).
  bool symmetric() const {
    switch (kind()) {
      case LawKind::SimpleNeighbor:
      case LawKind::LazySimpleNeighbor:
      case LawKind::PolynomialTail:
      case LawKind::LogLogRadial: return true;
      case LawKind::RegVaryingRadial: return c_plus() == c_minus();
      default: break;
    }
    for (const auto& a : state_->atoms) {
      const auto neg = -a.point;
      bool found = false;
      for (const auto& b : state_->atoms) {
        if (b.point == neg && b.probability == a.probability) found = true;
      }
      if (!found) return false;
    }
    return true;
  }

  // Index into atoms() of one draw; consumes the stream exactly as sample() does.
  std::size_t sample_index(Stream& rng) const { return state_->alias.sample(rng); }

  Jump sample(Stream& rng) const {
    const State& s = *state_;
    switch (s.kind) {
      case LawKind::Categorical:
      case LawKind::SimpleNeighbor:
      case LawKind::LazySimpleNeighbor:
      case LawKind::DiagonalEmbedding: return Jump{s.atoms[s.alias.sample(rng)].point, false, 0.0};
      case LawKind::LogLogRadial: return sample_log_log(rng);
      case LawKind::RegVaryingRadial: return sample_reg_varying(rng);
      case LawKind::PolynomialTail: return sample_polynomial(rng);
    }
    throw Error("unreachable law kind");
  }

  // Exact pmf where a closed form exists. PolynomialTail normalizes with the
  // exact core sum plus a continuum estimate of the remainder, clamped to the
  // rigorous bracket.
  double pmf(const LatticePoint& x) const {
    if (x.dim() != dim()) throw ConfigError("pmf query dimension mismatch");
    const State& s = *state_;
    switch (s.kind) {
      case LawKind::Categorical:
      case LawKind::SimpleNeighbor:
      case LawKind::LazySimpleNeighbor:
      case LawKind::DiagonalEmbedding:
        for (const auto& a : s.atoms) {
          if (a.point == x) return a.probability;
        }
        return 0.0;
      case LawKind::LogLogRadial: {
        int nonzero = 0;
        for (auto c : x.coords()) nonzero += c != 0;
        if (nonzero != 1) return 0.0;
        const double m = static_cast<double>(sup_norm(x));
        return (log_log_tail(m - 1.0) - log_log_tail(m)) / (2.0 * dim());
      }
      case LawKind::RegVaryingRadial: {
        if (x[0] == 0) return 0.0;
        const double w = x[0] > 0 ? c_plus() : c_minus();
        const double sexp = 1.0 + alpha();
        return w * std::pow(std::abs(static_cast<double>(x[0])), -sexp) / std::riemann_zeta(sexp);
      }
      case LawKind::PolynomialTail: {
        normalizer();
        return polynomial_weight(x[0], x[1], alpha()) / state_->normalizer_estimate;
      }
    }
    return 0.0;
  }

  // P{|xi| > t}. Closed forms are exact; PolynomialTail returns a bracket.
  TailValue tail(double t, Norm which) const {
    if (!(t > 0.0)) throw DomainError("tail threshold must be positive");
    const State& s = *state_;
    switch (s.kind) {
      case LawKind::Categorical:
      case LawKind::SimpleNeighbor:
      case LawKind::LazySimpleNeighbor:
      case LawKind::DiagonalEmbedding: {
        double p = 0.0;
        for (const auto& a : s.atoms) {
          if (norm(a.point, which) > t) p += a.probability;
        }
        p = std::min(p, 1.0);
        return {p, p};
      }
      case LawKind::LogLogRadial: {
        // Axis directions: sup and euclidean norms coincide. |X| = ceil(R) > t iff R > floor(t).
        const double p = log_log_tail(std::floor(t));
        return {p, p};
      }
      case LawKind::RegVaryingRadial: {
        const double sexp = 1.0 + alpha();
        const double q = std::floor(t) + 1.0;
        const double p = std::min(1.0, hurwitz_zeta(sexp, q) / std::riemann_zeta(sexp));
        return {p, p};
      }
      case LawKind::PolynomialTail: return polynomial_tail_bracket(t, which);
    }
    throw Error("unreachable law kind");
  }

  // Exact mean and covariance.
  Moments mean_and_covariance() const {
    const State& s = *state_;
    switch (s.kind) {
      case LawKind::LogLogRadial:
        throw UnavailableError("LogLogRadial has no finite moments");
      case LawKind::PolynomialTail:
        throw UnavailableError("PolynomialTail moments have no closed form");
      case LawKind::RegVaryingRadial: {
        if (alpha() <= 2.0) throw UnavailableError("RegVaryingRadial has infinite variance for alpha <= 2");
        const double z = std::riemann_zeta(1.0 + alpha());
        const double mean = (c_plus() - c_minus()) * std::riemann_zeta(alpha()) / z;
        const double second = std::riemann_zeta(alpha() - 1.0) / z;
        Moments m{{mean}, CovarianceMatrix(1)};
        m.covariance(0, 0) = second - mean * mean;
        return m;
      }
      default: break;
    }
    const int d = dim();
    Moments m{std::vector<double>(static_cast<std::size_t>(d), 0.0), CovarianceMatrix(d)};
    for (const auto& a : s.atoms) {
      for (int i = 0; i < d; ++i) m.mean[static_cast<std::size_t>(i)] += a.probability * static_cast<double>(a.point[i]);
    }
    for (const auto& a : s.atoms) {
      for (int i = 0; i < d; ++i) {
        const double di = static_cast<double>(a.point[i]) - m.mean[static_cast<std::size_t>(i)];
        for (int j = 0; j < d; ++j) {
          const double dj = static_cast<double>(a.point[j]) - m.mean[static_cast<std::size_t>(j)];
          m.covariance(i, j) += a.probability * di * dj;
        }
      }
    }
    return m;
  }

  // Support points with sup-norm <= radius. Infinite-support kinds always
  // report truncated = true; their atoms carry probability 0 when no
  // closed-form pmf is evaluated.
  SupportEnumeration support_within(std::int64_t radius) const {
    SupportEnumeration out;
    const State& s = *state_;
    switch (s.kind) {
      case LawKind::Categorical:
      case LawKind::SimpleNeighbor:
      case LawKind::LazySimpleNeighbor:
      case LawKind::DiagonalEmbedding:
        for (const auto& a : s.atoms) {
          if (sup_norm(a.point) <= radius) {
            out.atoms.push_back(a);
          } else {
            out.truncated = true;
          }
        }
        return out;
      case LawKind::LogLogRadial: {
        const auto first = static_cast<std::int64_t>(std::ceil(std::exp(std::exp(scale()))));
        for (std::int64_t m = first; m <= radius; ++m) {
          for (int i = 0; i < dim(); ++i) {
            out.atoms.push_back({LatticePoint::unit(dim(), i, m), 0.0});
            out.atoms.push_back({LatticePoint::unit(dim(), i, -m), 0.0});
          }
        }
        out.truncated = true;
        return out;
      }
      case LawKind::RegVaryingRadial:
        for (std::int64_t n = 1; n <= radius; ++n) {
          if (c_plus() > 0) out.atoms.push_back({LatticePoint{n}, 0.0});
          if (c_minus() > 0) out.atoms.push_back({LatticePoint{-n}, 0.0});
        }
        out.truncated = true;
        return out;
      case LawKind::PolynomialTail:
        for (std::int64_t y = -radius; y <= radius; ++y) {
          for (std::int64_t x = -radius; x <= radius; ++x) out.atoms.push_back({LatticePoint{x, y}, 0.0});
        }
        out.truncated = true;
        return out;
    }
    return out;
  }

  // Bracket on the PolynomialTail normalizing sum over all of Z^2.
  TailValue polynomial_normalizer() const {
    if (kind() != LawKind::PolynomialTail) throw UnavailableError("not a PolynomialTail law");
    return normalizer();
  }

  std::string describe() const {
    switch (kind()) {
      case LawKind::SimpleNeighbor: return "SimpleNeighbor(d=" + std::to_string(dim()) + ")";
      case LawKind::LazySimpleNeighbor:
        return "LazySimpleNeighbor(d=" + std::to_string(dim()) + ", p0=" + format_double(laziness()) + ")";
      case LawKind::PolynomialTail: return "PolynomialTail(alpha=" + format_double(alpha()) + ")";
      case LawKind::RegVaryingRadial:
        return "RegVaryingRadial(alpha=" + format_double(alpha()) + ", c+=" + format_double(c_plus()) + ")";
      case LawKind::LogLogRadial:
        return "LogLogRadial(d=" + std::to_string(dim()) + ", a=" + format_double(scale()) + ")";
      case LawKind::DiagonalEmbedding:
      case LawKind::Categorical: {
        std::string s = std::string(to_string(kind())) + "{";
        bool first = true;
        for (const auto& a : state_->atoms) {
          if (!first) s += ", ";
          first = false;
          s += a.point.to_string() + ":" + format_double(a.probability);
        }
        return s + "}";
      }
    }
    return "?";
  }

  // log log of the largest representable magnitude; draws beyond saturate.
  static double saturation_loglog() noexcept {
    return std::log(std::log(static_cast<double>(kMaxCoordinate)));
  }

 private:
  struct Params {
    double p0 = 0.0;
    double alpha = 0.0;
    double c_plus = 0.0;
    double c_minus = 0.0;
    double scale = 0.0;
    std::int64_t window = 0;
  };

  struct State {
    LawKind kind = LawKind::Categorical;
    int dim = 0;
    Params params;
    std::vector<Atom> atoms;
    AliasTable alias;
    // PolynomialTail
    AliasTable window_alias;
    double window_mass = 0.0;
    double tail_bound = 0.0;
    mutable std::once_flag normalizer_once;
    mutable TailValue normalizer;
    mutable double normalizer_estimate = 0.0;
    mutable std::vector<double> shell_sums;  // exact sup-norm shell sums, r <= kPolynomialSumRadius

    void finalize_finite() {
      std::vector<double> p;
      p.reserve(atoms.size());
      for (const auto& a : atoms) p.push_back(a.probability);
      alias = AliasTable(p);
    }
  };

  explicit JumpLaw(std::shared_ptr<State> st) : state_(std::move(st)) {}

  static void check_dim(int dim) {
    if (dim < 1 || dim > kMaxDim) throw ConfigError("dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  }

  static std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
  }

  static double polynomial_weight(std::int64_t x, std::int64_t y, double alpha) noexcept {
    const double r2 = static_cast<double>(x) * static_cast<double>(x) + static_cast<double>(y) * static_cast<double>(y);
    return 1.0 / (1.0 + std::pow(r2, 0.5 * (2.0 + alpha)));
  }

  double log_log_tail(double t) const noexcept {
    if (t <= std::numbers::e) return 1.0;
    const double ll = std::log(std::log(t));
    return std::min(1.0, scale() / ll);
  }

  Jump sample_log_log(Stream& rng) const {
    const double u = rng.uniform_open_closed();
    const double ll = scale() / u;
    const auto dir = rng.bounded(static_cast<std::uint32_t>(2 * dim()));
    Jump j{LatticePoint(dim()), false, ll};
    if (ll > saturation_loglog()) {
      j.saturated = true;
      return j;
    }
    const double r = std::ceil(std::exp(std::exp(ll)));
    if (r > static_cast<double>(kMaxCoordinate)) {
      j.saturated = true;
      return j;
    }
    const auto m = static_cast<std::int64_t>(r);
    j.increment[static_cast<int>(dir / 2)] = (dir % 2 == 0) ? m : -m;
    return j;
  }

  // Devroye's rejection sampler for the Zipf law with exponent s = 1 + alpha.
  Jump sample_reg_varying(Stream& rng) const {
    const double sexp = 1.0 + alpha();
    const double b = std::exp2(sexp - 1.0);
    for (;;) {
      const double u = rng.uniform_open();
      const double v = rng.uniform_open_closed();
      const double x_real = std::floor(std::pow(u, -1.0 / (sexp - 1.0)));
      const bool positive = rng.uniform() < c_plus();
      if (x_real > static_cast<double>(kMaxCoordinate)) {
        return Jump{LatticePoint(1), true, std::log(std::log(x_real))};
      }
      const double t = std::pow(1.0 + 1.0 / x_real, sexp - 1.0);
      if (v * x_real * (t - 1.0) / (b - 1.0) <= t / b) {
        const auto n = static_cast<std::int64_t>(x_real);
        return Jump{LatticePoint{positive ? n : -n}, false, n > 1 ? std::log(std::log(x_real)) : 0.0};
      }
    }
  }

  static LatticePoint shell_point(std::int64_t r, std::uint64_t index) noexcept {
    const auto side = static_cast<std::int64_t>(index / static_cast<std::uint64_t>(2 * r));
    const auto off = static_cast<std::int64_t>(index % static_cast<std::uint64_t>(2 * r));
    switch (side) {
      case 0: return LatticePoint{r, -r + 1 + off};
      case 1: return LatticePoint{r - 1 - off, r};
      case 2: return LatticePoint{-r, r - 1 - off};
      default: return LatticePoint{-r + 1 + off, -r};
    }
  }

  Jump sample_polynomial(Stream& rng) const {
    const State& s = *state_;
    const std::int64_t w = window();
    const std::int64_t side = 2 * w + 1;
    const double p_window = s.window_mass / (s.window_mass + s.tail_bound);
    for (;;) {
      if (rng.uniform() < p_window) {
        const auto i = static_cast<std::int64_t>(s.window_alias.sample(rng));
        return Jump{LatticePoint{i % side - w, i / side - w}, false, 0.0};
      }
      // Sup-norm radius from a discretized Pareto(alpha) above the window.
      const double u = rng.uniform_open();
      const double radius = static_cast<double>(w) * std::pow(u, -1.0 / alpha());
      const double rr = std::ceil(radius);
      if (rr > static_cast<double>(kMaxCoordinate) / 2) {
        return Jump{LatticePoint(2), true, std::log(std::log(rr))};
      }
      const auto r = static_cast<std::int64_t>(rr);
      const LatticePoint x = shell_point(r, rng.bounded64(static_cast<std::uint64_t>(8 * r)));
      const double rd = static_cast<double>(r);
      const double q = std::pow(static_cast<double>(w) / rd, alpha()) * std::expm1(-alpha() * std::log1p(-1.0 / rd));
      const double accept = polynomial_weight(x[0], x[1], alpha()) * 8.0 * rd / (q * s.tail_bound);
      if (rng.uniform() < accept) return Jump{x, false, 0.0};
    }
  }

  // Remainder bounds for sum_{sup|x| > m} 1/(1+|x|^(2+alpha)).
  double remainder_upper(std::int64_t m) const noexcept {
    return 8.0 * std::pow(static_cast<double>(m), -alpha()) / alpha();
  }
  double remainder_lower(std::int64_t m) const noexcept {
    return 8.0 * std::pow(static_cast<double>(m + 1), -alpha()) /
           (alpha() * (1.0 + std::exp2(1.0 + 0.5 * alpha())));
  }

  const TailValue& normalizer() const {
    const State& s = *state_;
    std::call_once(s.normalizer_once, [&] {
      const std::int64_t rmax = kPolynomialSumRadius;
      s.shell_sums.assign(static_cast<std::size_t>(rmax + 1), 0.0);
      for (std::int64_t y = -rmax; y <= rmax; ++y) {
        for (std::int64_t x = -rmax; x <= rmax; ++x) {
          const auto r = std::max(std::abs(x), std::abs(y));
          s.shell_sums[static_cast<std::size_t>(r)] += polynomial_weight(x, y, alpha());
        }
      }
      double core = 0.0;
      for (double v : s.shell_sums) core += v;
      s.normalizer = {core + remainder_lower(rmax), core + remainder_upper(rmax)};
      // Remainder ~ integral of |x|^(-2-alpha) outside the square of half-side
      // rmax + 1/2: (8 / alpha) L^(-alpha) * int_0^(pi/4) cos^alpha.
      const int panels = 256;
      const double h = std::numbers::pi / 4.0 / panels;
      double simpson = 0.0;
      for (int i = 0; i <= panels; ++i) {
        const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        simpson += w * std::pow(std::cos(i * h), alpha());
      }
      simpson *= h / 3.0;
      const double estimate =
          core + 8.0 / alpha() * std::pow(static_cast<double>(rmax) + 0.5, -alpha()) * simpson;
      s.normalizer_estimate = std::clamp(estimate, s.normalizer.lower, s.normalizer.upper);
    });
    return s.normalizer;
  }

  TailValue sup_tail_bracket(double t) const {
    const auto& nb = normalizer();
    const auto m = static_cast<std::int64_t>(std::floor(t));
    if (m < kPolynomialSumRadius) {
      double inside = 0.0;
      for (std::int64_t r = 0; r <= m; ++r) inside += state_->shell_sums[static_cast<std::size_t>(r)];
      return {std::max(0.0, 1.0 - inside / nb.lower), std::max(0.0, 1.0 - inside / nb.upper)};
    }
    return {remainder_lower(m) / nb.upper, remainder_upper(m) / nb.lower};
  }

  TailValue polynomial_tail_bracket(double t, Norm which) const {
    if (which == Norm::Sup) return sup_tail_bracket(t);
    const auto& nb = normalizer();
    const auto m = static_cast<std::int64_t>(std::floor(t));
    if (m < kPolynomialSumRadius) {
      double inside = 0.0;
      for (std::int64_t y = -m; y <= m; ++y) {
        for (std::int64_t x = -m; x <= m; ++x) {
          const double r2 = static_cast<double>(x * x + y * y);
          if (r2 <= t * t) inside += polynomial_weight(x, y, alpha());
        }
      }
      return {std::max(0.0, 1.0 - inside / nb.lower), std::max(0.0, 1.0 - inside / nb.upper)};
    }
    // euclid > t implies sup > t / sqrt(2); sup > t implies euclid > t.
    return {sup_tail_bracket(t).lower, sup_tail_bracket(t / std::numbers::sqrt2).upper};
  }

  std::shared_ptr<const State> state_;
};

// Finite map from perturbed points to their kick laws.
class Membrane {
 public:
  Membrane() = default;

  void add(const LatticePoint& point, JumpLaw law) {
    if (law.dim() != point.dim()) throw ConfigError("membrane kick law dimension must match its point");
    if (!points_.empty() && points_.front().dim() != point.dim()) {
      throw ConfigError("membrane points must share one dimension");
    }
    if (find(point)) throw ConfigError("membrane points must be distinct: " + point.to_string());
    points_.push_back(point);
    laws_.push_back(std::move(law));
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  std::optional<std::size_t> find(const LatticePoint& x) const noexcept {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (points_[i] == x) return i;
    }
    return std::nullopt;
  }

  bool contains(const LatticePoint& x) const noexcept { return find(x).has_value(); }

  // nullptr when x is not a membrane point.
  const JumpLaw* lookup(const LatticePoint& x) const noexcept {
    const auto i = find(x);
    return i ? &laws_[*i] : nullptr;
  }

  const LatticePoint& point(std::size_t i) const { return points_.at(i); }
  const JumpLaw& law(std::size_t i) const { return laws_.at(i); }
  const std::vector<LatticePoint>& points() const noexcept { return points_; }

 private:
  std::vector<LatticePoint> points_;
  std::vector<JumpLaw> laws_;
};

}  // namespace lpwalk
