#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "lpwalk/error.hpp"
#include "lpwalk/jump_law.hpp"
#include "lpwalk/lattice.hpp"
#include "lpwalk/rng.hpp"

namespace lpwalk {

enum class SaturationPolicy {
  Stop,   // record the event and end the run
  Abort,  // throw SaturationError
};

// Largest number of path points a run may record.
inline constexpr std::uint64_t kMaxRecordedPath = 10'000'000;

struct WalkConfig {
  LatticePoint start;
  JumpLaw base = JumpLaw::simple_neighbor(1);
  Membrane membrane;
  std::uint64_t horizon = 1;
  std::vector<LatticePoint> hit_set;          // B; empty means no hitting rule
  bool stop_on_hit = true;                    // end the run at tau_B
  std::optional<std::int64_t> stop_radius;    // end the run once sup_norm(X(k)) > r, k >= 1
  std::vector<std::uint64_t> checkpoints;     // sorted, each <= horizon
  bool record_full_path = false;
  SaturationPolicy on_saturation = SaturationPolicy::Stop;

  int dim() const noexcept { return start.dim(); }

  void validate() const {
    if (start.empty()) throw ConfigError("walk start point is missing");
    if (base.dim() != dim()) throw ConfigError("base law dimension differs from start point dimension");
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    for (const auto& p : membrane.points()) {
      if (p.dim() != dim()) throw ConfigError("membrane point dimension differs from walk dimension");
    }
    for (const auto& b : hit_set) {
      if (b.dim() != dim()) throw ConfigError("hitting set dimension differs from walk dimension");
    }
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end())) throw ConfigError("checkpoints must be sorted");
    if (!checkpoints.empty() && checkpoints.back() > horizon) throw ConfigError("checkpoint beyond horizon");
    if (stop_radius && *stop_radius < 0) throw ConfigError("stop radius must be nonnegative");
    if (record_full_path && horizon + 1 > kMaxRecordedPath) {
      throw MemoryGuardError("full path recording limited to 1e7 points");
    }
  }
};

// T^(x)(n): visits to x at times 0..n-1; total T(n) is their sum.
struct OccupationCounters {
  std::vector<std::uint64_t> per_point;  // aligned with Membrane order
  std::uint64_t total = 0;
};

struct Checkpoint {
  std::uint64_t time = 0;
  LatticePoint position;
  std::uint64_t occupation = 0;  // T(time)
};

struct SaturationEvent {
  std::uint64_t time = 0;  // step index k of the offending transition X(k) -> X(k+1)
  LatticePoint from;
  double loglog_radius = 0.0;
};

enum StopReason : unsigned {
  kStopHorizon = 1u,
  kStopRadius = 2u,
  kStopHitSet = 4u,
  kStopSaturation = 8u,
};

struct TrajectorySummary {
  LatticePoint final_position;
  std::vector<Checkpoint> checkpoints;
  OccupationCounters occupation;
  std::optional<std::uint64_t> first_hit;    // tau_B, first k >= 1 with X(k) in B
  std::optional<std::uint64_t> first_entry;  // sigma_B, first k >= 0 with X(k) in B
  std::int64_t running_max = 0;              // max sup_norm(X(k)) over executed k
  bool max_unbounded = false;                // a saturated jump occurred
  std::vector<SaturationEvent> saturations;
  std::uint64_t steps = 0;
  unsigned stop_reasons = 0;
  std::vector<LatticePoint> path;            // X(0..steps) when recorded
};

// Increments in consumption order, per family, plus the path.
struct CoupledLedger {
  std::vector<LatticePoint> base_increments;
  std::vector<std::vector<LatticePoint>> kick_increments;
  std::vector<LatticePoint> path;
};

// Independent random streams for one replicate: one for xi, one per membrane point.
class WalkStreams {
 public:
  WalkStreams(const StreamKey& key, std::size_t membrane_size) : base_(key.with_family(0)) {
    kicks_.reserve(membrane_size);
    for (std::size_t i = 0; i < membrane_size; ++i) {
      kicks_.emplace_back(key.with_family(static_cast<std::uint32_t>(1 + i)));
    }
  }
  Stream& base() noexcept { return base_; }
  Stream& kick(std::size_t i) { return kicks_.at(i); }

 private:
  Stream base_;
  std::vector<Stream> kicks_;
};

// One transition of the perturbed chain.
inline Jump draw_increment(const LatticePoint& position, const Membrane& membrane, const JumpLaw& base,
                           WalkStreams& streams) {
  if (const auto i = membrane.find(position)) return membrane.law(*i).sample(streams.kick(*i));
  return base.sample(streams.base());
}

// Returns the next state; throws SaturationError if it is not representable.
inline LatticePoint step(const LatticePoint& position, const Membrane& membrane, const JumpLaw& base,
                         WalkStreams& streams) {
  const Jump j = draw_increment(position, membrane, base, streams);
  if (j.saturated) throw SaturationError("jump magnitude beyond representable range from " + position.to_string());
  auto next = checked_add(position, j.increment);
  if (!next) throw SaturationError("coordinate overflow stepping from " + position.to_string());
  return *next;
}

namespace detail {

struct NoObserver {
  static constexpr bool active = false;
  void on_base(const LatticePoint&) {}
  void on_kick(std::size_t, const LatticePoint&) {}
  void on_position(const LatticePoint&) {}
};

struct LedgerObserver {
  static constexpr bool active = true;
  CoupledLedger* ledger;
  void on_base(const LatticePoint& inc) { ledger->base_increments.push_back(inc); }
  void on_kick(std::size_t i, const LatticePoint& inc) { ledger->kick_increments[i].push_back(inc); }
  void on_position(const LatticePoint& p) { ledger->path.push_back(p); }
};

// Kick policy: the perturbed chain samples eta^(x); the auxiliary chain jumps to v.
struct KickFromLaw {
  Jump operator()(std::size_t i, const LatticePoint&, const Membrane& m, WalkStreams& s) const {
    return m.law(i).sample(s.kick(i));
  }
};

struct JumpToTarget {
  LatticePoint target;
  Jump operator()(std::size_t, const LatticePoint& pos, const Membrane&, WalkStreams&) const {
    return Jump{target - pos, false, 0.0};
  }
};

// Fixed-size coordinates for the hot loop; unused trailing entries stay zero.
template <int D>
using Vec = std::array<std::int64_t, D>;

template <int D>
Vec<D> to_vec(const LatticePoint& p) noexcept {
  Vec<D> v{};
  for (int i = 0; i < p.dim(); ++i) v[static_cast<std::size_t>(i)] = p[i];
  return v;
}

template <int D>
LatticePoint to_point(const Vec<D>& v, int dim) {
  LatticePoint p(dim);
  for (int i = 0; i < dim; ++i) p[i] = v[static_cast<std::size_t>(i)];
  return p;
}

template <int D>
std::int64_t vec_sup(const Vec<D>& v) noexcept {
  std::int64_t m = 0;
  for (auto c : v) m = std::max(m, c < 0 ? -c : c);
  return m;
}

// False if any coordinate would leave [-kMaxCoordinate, kMaxCoordinate].
template <int D>
bool vec_add(Vec<D>& p, const Vec<D>& inc) noexcept {
  Vec<D> r;
  for (std::size_t i = 0; i < static_cast<std::size_t>(D); ++i) {
    if (__builtin_add_overflow(p[i], inc[i], &r[i]) || !within_range(r[i])) return false;
  }
  p = r;
  return true;
}

template <int D>
bool vec_in(const std::vector<Vec<D>>& set, const Vec<D>& p) noexcept {
  for (const auto& b : set) {
    if (b == p) return true;
  }
  return false;
}

template <int D, class KickPolicy, class Observer>
TrajectorySummary run_fixed(const WalkConfig& cfg, WalkStreams& streams, const KickPolicy& kick, Observer& obs) {
  const int dim = cfg.dim();
  TrajectorySummary out;
  out.occupation.per_point.assign(cfg.membrane.size(), 0);
  out.checkpoints.reserve(cfg.checkpoints.size());

  std::vector<Vec<D>> members;
  for (const auto& p : cfg.membrane.points()) members.push_back(to_vec<D>(p));
  std::vector<Vec<D>> hits;
  for (const auto& p : cfg.hit_set) hits.push_back(to_vec<D>(p));
  const bool finite_base = cfg.base.finite_support();
  std::vector<Vec<D>> base_incs;
  std::int64_t base_reach = 0;
  if (finite_base) {
    for (const auto& a : cfg.base.atoms()) base_incs.push_back(to_vec<D>(a.point));
    base_reach = cfg.base.max_support_norm();
  }
  // Below this sup-norm a base step cannot leave the representable range.
  const std::int64_t safe_radius = kMaxCoordinate - base_reach;
  // First-coordinate range of A rejects most positions with two compares.
  std::int64_t lo0 = std::numeric_limits<std::int64_t>::max(), hi0 = std::numeric_limits<std::int64_t>::min();
  for (const auto& m : members) {
    lo0 = std::min(lo0, m[0]);
    hi0 = std::max(hi0, m[0]);
  }
  auto find_member = [&](const Vec<D>& p) -> std::ptrdiff_t {
    if (p[0] < lo0 || p[0] > hi0) return -1;
    for (std::size_t i = 0; i < members.size(); ++i) {
      bool eq = true;
      for (std::size_t c = 0; c < static_cast<std::size_t>(D); ++c) eq = eq && members[i][c] == p[c];
      if (eq) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
  };

  Vec<D> pos = to_vec<D>(cfg.start);
  out.running_max = vec_sup<D>(pos);
  if (cfg.record_full_path) out.path.push_back(cfg.start);
  if constexpr (Observer::active) obs.on_position(cfg.start);
  const bool has_hit_set = !hits.empty();
  if (has_hit_set && vec_in<D>(hits, pos)) out.first_entry = 0;

  std::size_t next_cp = 0;
  const auto& cps = cfg.checkpoints;
  const std::uint64_t no_cp = ~std::uint64_t{0};
  std::uint64_t next_cp_time = cps.empty() ? no_cp : cps[0];
  auto record_checkpoints = [&](std::uint64_t t) {
    while (next_cp < cps.size() && cps[next_cp] == t) {
      out.checkpoints.push_back({t, to_point<D>(pos, dim), out.occupation.total});
      ++next_cp;
    }
    next_cp_time = next_cp < cps.size() ? cps[next_cp] : no_cp;
  };
  if (next_cp_time == 0) record_checkpoints(0);
  const std::int64_t radius = cfg.stop_radius ? *cfg.stop_radius : std::numeric_limits<std::int64_t>::max();
  Stream& base_stream = streams.base();

  std::int64_t r_now = out.running_max;
  const std::uint64_t horizon = cfg.horizon;
  for (std::uint64_t k = 0; k < horizon; ++k) {
    const std::ptrdiff_t mi = find_member(pos);
    Vec<D> inc;
    bool ok;
    if (mi >= 0) {
      const auto i = static_cast<std::size_t>(mi);
      ++out.occupation.per_point[i];
      ++out.occupation.total;
      const Jump j = kick(i, to_point<D>(pos, dim), cfg.membrane, streams);
      ok = !j.saturated;
      if (ok) {
        inc = to_vec<D>(j.increment);
        ok = vec_add<D>(pos, inc);
      }
      if (!ok) {
        if (cfg.on_saturation == SaturationPolicy::Abort) {
          throw SaturationError("saturated jump at step " + std::to_string(k) + " from " + to_point<D>(pos, dim).to_string());
        }
        out.saturations.push_back({k, to_point<D>(pos, dim), j.loglog_radius});
      } else if constexpr (Observer::active) {
        obs.on_kick(i, j.increment);
      }
    } else if (finite_base) {
      inc = base_incs[cfg.base.sample_index(base_stream)];
      if (r_now <= safe_radius) {
        for (std::size_t c = 0; c < static_cast<std::size_t>(D); ++c) pos[c] += inc[c];
        ok = true;
      } else {
        ok = vec_add<D>(pos, inc);
      }
      if (!ok) {
        if (cfg.on_saturation == SaturationPolicy::Abort) {
          throw SaturationError("coordinate overflow at step " + std::to_string(k));
        }
        out.saturations.push_back({k, to_point<D>(pos, dim), 0.0});
      } else if constexpr (Observer::active) {
        obs.on_base(to_point<D>(inc, dim));
      }
    } else {
      const Jump j = cfg.base.sample(base_stream);
      ok = !j.saturated;
      if (ok) {
        inc = to_vec<D>(j.increment);
        ok = vec_add<D>(pos, inc);
      }
      if (!ok) {
        if (cfg.on_saturation == SaturationPolicy::Abort) {
          throw SaturationError("saturated jump at step " + std::to_string(k) + " from " + to_point<D>(pos, dim).to_string());
        }
        out.saturations.push_back({k, to_point<D>(pos, dim), j.loglog_radius});
      } else if constexpr (Observer::active) {
        obs.on_base(j.increment);
      }
    }
    if (!ok) {
      out.max_unbounded = true;
      out.steps = k + 1;
      out.stop_reasons |= kStopSaturation;
      if (cfg.stop_radius) out.stop_reasons |= kStopRadius;
      out.final_position = to_point<D>(pos, dim);
      return out;
    }

    const std::uint64_t t = k + 1;
    const std::int64_t r = vec_sup<D>(pos);
    r_now = r;
    if (r > out.running_max) out.running_max = r;
    if (cfg.record_full_path) out.path.push_back(to_point<D>(pos, dim));
    if constexpr (Observer::active) obs.on_position(to_point<D>(pos, dim));
    if (t == next_cp_time) record_checkpoints(t);

    unsigned reasons = 0;
    if (t == horizon) reasons |= kStopHorizon;
    if (r > radius) reasons |= kStopRadius;
    if (has_hit_set && vec_in<D>(hits, pos)) {
      if (!out.first_hit) out.first_hit = t;
      if (!out.first_entry) out.first_entry = t;
      if (cfg.stop_on_hit) reasons |= kStopHitSet;
    }
    if (reasons) {
      out.steps = t;
      out.stop_reasons = reasons;
      break;
    }
  }
  out.final_position = to_point<D>(pos, dim);
  return out;
}

template <class KickPolicy, class Observer>
TrajectorySummary run_impl(const WalkConfig& cfg, WalkStreams& streams, const KickPolicy& kick, Observer& obs) {
  cfg.validate();
  switch (cfg.dim()) {
    case 1: return run_fixed<1>(cfg, streams, kick, obs);
    case 2: return run_fixed<2>(cfg, streams, kick, obs);
    case 3: return run_fixed<3>(cfg, streams, kick, obs);
    default: return run_fixed<kMaxDim>(cfg, streams, kick, obs);
  }
}

}  // namespace detail

// Simulates the perturbed chain: xi off the membrane, eta^(x) at x in A.
inline TrajectorySummary run(const WalkConfig& cfg, const StreamKey& key) {
  WalkStreams streams(key, cfg.membrane.size());
  detail::NoObserver obs;
  return detail::run_impl(cfg, streams, detail::KickFromLaw{}, obs);
}

// Same chain and streams as run(); additionally records every increment by
// family so that X(n) = X(0) + S_xi(n - T(n)) + sum_x S_eta^(x)(T^(x)(n)) can be replayed.
inline std::pair<TrajectorySummary, CoupledLedger> coupled_run(const WalkConfig& cfg, const StreamKey& key) {
  WalkStreams streams(key, cfg.membrane.size());
  CoupledLedger ledger;
  ledger.kick_increments.resize(cfg.membrane.size());
  detail::LedgerObserver obs{&ledger};
  auto summary = detail::run_impl(cfg, streams, detail::KickFromLaw{}, obs);
  return {std::move(summary), std::move(ledger)};
}

// Auxiliary chain: moves by xi off A and jumps deterministically to v from any point of A.
inline TrajectorySummary run_auxiliary(const WalkConfig& cfg, const LatticePoint& v, const StreamKey& key) {
  if (v.dim() != cfg.dim()) throw ConfigError("auxiliary target dimension differs from walk dimension");
  if (cfg.membrane.contains(v)) throw ConfigError("auxiliary target must lie outside the membrane");
  WalkStreams streams(key, cfg.membrane.size());
  detail::NoObserver obs;
  return detail::run_impl(cfg, streams, detail::JumpToTarget{v}, obs);
}

inline std::pair<TrajectorySummary, CoupledLedger> coupled_run_auxiliary(const WalkConfig& cfg, const LatticePoint& v,
                                                                         const StreamKey& key) {
  if (cfg.membrane.contains(v)) throw ConfigError("auxiliary target must lie outside the membrane");
  WalkStreams streams(key, cfg.membrane.size());
  CoupledLedger ledger;
  ledger.kick_increments.resize(cfg.membrane.size());
  detail::LedgerObserver obs{&ledger};
  auto summary = detail::run_impl(cfg, streams, detail::JumpToTarget{v}, obs);
  return {std::move(summary), std::move(ledger)};
}

}  // namespace lpwalk
