#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "lpwalk/error.hpp"
#include "lpwalk/jump_law.hpp"
#include "lpwalk/lattice.hpp"

namespace lpwalk {

// Index [Z^d : <generators>] via integer row reduction to Hermite form.
// nullopt means the generated subgroup has rank < d (infinite index).
inline std::optional<std::uint64_t> subgroup_index(std::span<const LatticePoint> generators, int dim) {
  using Int = __int128;
  std::vector<std::vector<Int>> rows;
  for (const auto& g : generators) {
    if (g.dim() != dim) throw ConfigError("subgroup generators must share the lattice dimension");
    if (g.is_zero()) continue;
    std::vector<Int> r(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) r[static_cast<std::size_t>(i)] = g[i];
    rows.push_back(std::move(r));
  }
  const Int limit = Int{1} << 100;
  auto check = [&](Int v) {
    if (v > limit || v < -limit) throw Error("subgroup index computation overflowed");
  };
  std::size_t pivot_row = 0;
  Int index = 1;
  for (int col = 0; col < dim; ++col) {
    const auto c = static_cast<std::size_t>(col);
    // Euclid on column col across rows pivot_row..end.
    for (;;) {
      std::size_t best = rows.size();
      for (std::size_t r = pivot_row; r < rows.size(); ++r) {
        if (rows[r][c] != 0 && (best == rows.size() || (rows[r][c] < 0 ? -rows[r][c] : rows[r][c]) <
                                                          (rows[best][c] < 0 ? -rows[best][c] : rows[best][c]))) {
          best = r;
        }
      }
      if (best == rows.size()) return std::nullopt;  // no pivot: rank deficient
      std::swap(rows[pivot_row], rows[best]);
      bool reduced = true;
      for (std::size_t r = pivot_row + 1; r < rows.size(); ++r) {
        if (rows[r][c] == 0) continue;
        const Int q = rows[r][c] / rows[pivot_row][c];
        for (std::size_t k = c; k < static_cast<std::size_t>(dim); ++k) {
          rows[r][k] -= q * rows[pivot_row][k];
          check(rows[r][k]);
        }
        if (rows[r][c] != 0) reduced = false;
      }
      if (reduced) break;
    }
    const Int p = rows[pivot_row][c];
    index *= (p < 0 ? -p : p);
    check(index);
    ++pivot_row;
  }
  if (index > static_cast<Int>(UINT64_MAX)) throw Error("subgroup index exceeds 64 bits");
  return static_cast<std::uint64_t>(index);
}

struct ConditionBReport {
  bool aperiodic = false;           // support generates Z^d
  bool strongly_aperiodic = false;  // support differences generate Z^d
  std::optional<std::uint64_t> generated_subgroup_index;     // nullopt = infinite
  std::optional<std::uint64_t> difference_subgroup_index;    // nullopt = infinite
  bool support_truncated = false;
  bool accessibility_ok = false;
  std::vector<LatticePoint> unreached;                  // window points outside A never reached
  std::vector<std::vector<LatticePoint>> witness_paths;  // one per membrane point: A -> first state outside A
  std::int64_t search_radius = 0;

  bool holds() const noexcept { return aperiodic && accessibility_ok; }
};

namespace detail {

inline std::vector<LatticePoint> support_points(const JumpLaw& law, std::int64_t radius, bool& truncated) {
  auto e = law.support_within(radius);
  truncated = truncated || e.truncated;
  std::vector<LatticePoint> pts;
  pts.reserve(e.atoms.size());
  for (auto& a : e.atoms) pts.push_back(a.point);
  return pts;
}

}  // namespace detail

// Aperiodicity of the base law plus accessibility of every window point
// outside A from every point of A, by breadth-first search over the combined
// transition graph restricted to sup-norm <= search_radius.
inline ConditionBReport condition_b_check(const JumpLaw& base, const Membrane& membrane, std::int64_t search_radius) {
  if (search_radius < 1) throw ConfigError("search radius must be positive");
  const int dim = base.dim();
  for (const auto& p : membrane.points()) {
    if (p.dim() != dim) throw ConfigError("membrane dimension differs from base law dimension");
    if (sup_norm(p) > search_radius) throw ConfigError("membrane point " + p.to_string() + " lies outside the search window");
  }
  if (dim > 3 || std::pow(2.0 * static_cast<double>(search_radius) + 1.0, dim) > 2e7) {
    throw MemoryGuardError("condition B search window too large");
  }

  ConditionBReport rep;
  rep.search_radius = search_radius;
  bool truncated = false;
  const auto support = detail::support_points(base, search_radius, truncated);
  rep.support_truncated = truncated;

  rep.generated_subgroup_index = subgroup_index(support, dim);
  std::vector<LatticePoint> diffs;
  if (!support.empty()) {
    for (const auto& s : support) diffs.push_back(s - support.front());
  }
  rep.difference_subgroup_index = subgroup_index(diffs, dim);
  rep.aperiodic = rep.generated_subgroup_index == std::optional<std::uint64_t>{1};
  rep.strongly_aperiodic = rep.difference_subgroup_index == std::optional<std::uint64_t>{1};
  if (truncated && !rep.aperiodic) {
    throw InconclusiveError("support enumeration truncated at radius " + std::to_string(search_radius) +
                            " and the generated subgroup is still proper");
  }

  // Accessibility.
  std::vector<std::vector<LatticePoint>> kick_support;
  for (std::size_t i = 0; i < membrane.size(); ++i) {
    kick_support.push_back(detail::support_points(membrane.law(i), search_radius, truncated));
  }
  const std::int64_t side = 2 * search_radius + 1;
  auto encode = [&](const LatticePoint& p) {
    std::int64_t code = 0;
    for (int i = dim - 1; i >= 0; --i) code = code * side + (p[i] + search_radius);
    return static_cast<std::size_t>(code);
  };
  std::size_t cells = 1;
  for (int i = 0; i < dim; ++i) cells *= static_cast<std::size_t>(side);
  rep.accessibility_ok = true;

  for (std::size_t m = 0; m < membrane.size(); ++m) {
    std::vector<char> seen(cells, 0);
    std::vector<std::size_t> parent(cells, SIZE_MAX);
    std::vector<LatticePoint> by_code(cells);
    std::deque<LatticePoint> queue;
    const auto& origin = membrane.point(m);
    seen[encode(origin)] = 1;
    by_code[encode(origin)] = origin;
    queue.push_back(origin);
    std::optional<std::size_t> exit_code;
    while (!queue.empty()) {
      const LatticePoint cur = queue.front();
      queue.pop_front();
      const auto mi = membrane.find(cur);
      const auto& moves = mi ? kick_support[*mi] : support;
      for (const auto& step : moves) {
        const LatticePoint nxt = cur + step;
        if (sup_norm(nxt) > search_radius) continue;
        const auto code = encode(nxt);
        if (seen[code]) continue;
        seen[code] = 1;
        parent[code] = encode(cur);
        by_code[code] = nxt;
        if (!exit_code && !membrane.contains(nxt)) exit_code = code;
        queue.push_back(nxt);
      }
    }
    std::vector<LatticePoint> path;
    if (exit_code) {
      for (std::size_t c = *exit_code; c != SIZE_MAX; c = parent[c]) path.push_back(by_code[c]);
      std::reverse(path.begin(), path.end());
    }
    rep.witness_paths.push_back(std::move(path));
    // Every window point outside A must be reachable from this membrane point.
    LatticePoint p(dim);
    for (std::size_t c = 0; c < cells; ++c) {
      std::size_t code = c;
      for (int i = 0; i < dim; ++i) {
        p[i] = static_cast<std::int64_t>(code % static_cast<std::size_t>(side)) - search_radius;
        code /= static_cast<std::size_t>(side);
      }
      if (!seen[c] && !membrane.contains(p)) {
        rep.accessibility_ok = false;
        if (rep.unreached.size() < 64 &&
            std::find(rep.unreached.begin(), rep.unreached.end(), p) == rep.unreached.end()) {
          rep.unreached.push_back(p);
        }
      }
    }
  }
  if (membrane.empty()) rep.accessibility_ok = true;
  rep.support_truncated = truncated;
  if (!rep.accessibility_ok && truncated) {
    throw InconclusiveError("window points unreached within radius " + std::to_string(search_radius) +
                            " while some jump support extends beyond it; enlarge search_radius");
  }
  return rep;
}

}  // namespace lpwalk
