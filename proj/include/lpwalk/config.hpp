#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "lpwalk/error.hpp"
#include "lpwalk/experiments.hpp"
#include "lpwalk/format.hpp"
#include "lpwalk/jump_law.hpp"
#include "lpwalk/lattice.hpp"

namespace lpwalk {

using Json = nlohmann::json;

namespace detail {

// Object view that remembers which keys were read, so leftovers can be
// rejected with their full path.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  const std::string& path() const noexcept { return path_; }
  std::string sub(const std::string& key) const { return path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(sub(key) + ": required field is missing");
    return j_.at(key);
  }

  const Json* find(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(sub(it.key()) + ": unknown field");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Decimal strings are parsed exactly as written; plain JSON numbers are accepted too.
inline double to_real(const Json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw ConfigError(path + ": '" + s + "' is not a decimal number");
    return v;
  }
  throw ConfigError(path + ": expected a number or decimal string");
}

inline std::uint64_t to_count(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v >= 0 && v == std::floor(v) && v < 1.8e19) return static_cast<std::uint64_t>(v);
  }
  throw ConfigError(path + ": expected a nonnegative integer");
}

inline std::int64_t to_int(const Json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v == std::floor(v) && std::abs(v) < 9.2e18) return static_cast<std::int64_t>(v);
  }
  throw ConfigError(path + ": expected an integer");
}

inline LatticePoint to_point(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty() || j.size() > static_cast<std::size_t>(kMaxDim)) {
    throw ConfigError(path + ": expected an integer array of length 1.." + std::to_string(kMaxDim));
  }
  LatticePoint p(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) p[static_cast<int>(i)] = to_int(j[i], path + "[" + std::to_string(i) + "]");
  return p;
}

inline int to_dim(const Json& j, const std::string& path) {
  const auto d = to_int(j, path);
  if (d < 1 || d > kMaxDim) throw ConfigError(path + ": dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  return static_cast<int>(d);
}

}  // namespace detail

// Law spec, e.g. {"kind": "LazySimpleNeighbor", "dim": 2, "p0": "0.5"}.
inline JumpLaw parse_law(const Json& j, const std::string& path) {
  detail::StrictObject o(j, path);
  const auto& kj = o.at("kind");
  if (!kj.is_string()) throw ConfigError(o.sub("kind") + ": expected a string");
  const auto kind = kj.get<std::string>();
  auto wrap = [&](auto&& make) -> JumpLaw {
    try {
      return make();
    } catch (const ConfigError& e) {
      throw ConfigError(path + " (" + kind + "): " + e.what());
    }
  };
  JumpLaw law = JumpLaw::simple_neighbor(1);
  if (kind == "SimpleNeighbor") {
    const int d = detail::to_dim(o.at("dim"), o.sub("dim"));
    law = wrap([&] { return JumpLaw::simple_neighbor(d); });
  } else if (kind == "LazySimpleNeighbor") {
    const int d = detail::to_dim(o.at("dim"), o.sub("dim"));
    const double p0 = detail::to_real(o.at("p0"), o.sub("p0"));
    law = wrap([&] { return JumpLaw::lazy_simple_neighbor(d, p0); });
  } else if (kind == "Categorical") {
    const auto& sj = o.at("support");
    if (!sj.is_array()) throw ConfigError(o.sub("support") + ": expected an array");
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < sj.size(); ++i) {
      detail::StrictObject a(sj[i], o.sub("support") + "[" + std::to_string(i) + "]");
      Atom atom{detail::to_point(a.at("point"), a.sub("point")), detail::to_real(a.at("p"), a.sub("p"))};
      a.finish();
      atoms.push_back(atom);
    }
    law = wrap([&] { return JumpLaw::categorical(atoms); });
  } else if (kind == "PolynomialTail") {
    const double alpha = detail::to_real(o.at("alpha"), o.sub("alpha"));
    std::int64_t window = 64;
    if (const auto* w = o.find("window")) window = detail::to_int(*w, o.sub("window"));
    law = wrap([&] { return JumpLaw::polynomial_tail(alpha, window); });
  } else if (kind == "RegVaryingRadial") {
    const double alpha = detail::to_real(o.at("alpha"), o.sub("alpha"));
    const double cp = detail::to_real(o.at("c_plus"), o.sub("c_plus"));
    const double cm = detail::to_real(o.at("c_minus"), o.sub("c_minus"));
    law = wrap([&] { return JumpLaw::reg_varying_radial(alpha, cp, cm); });
  } else if (kind == "LogLogRadial") {
    const int d = detail::to_dim(o.at("dim"), o.sub("dim"));
    const double a = detail::to_real(o.at("a"), o.sub("a"));
    law = wrap([&] { return JumpLaw::log_log_radial(d, a); });
  } else if (kind == "DiagonalEmbedding") {
    const JumpLaw b = parse_law(o.at("base"), o.sub("base"));
    law = wrap([&] { return JumpLaw::diagonal_embedding(b); });
  } else {
    throw ConfigError(o.sub("kind") + ": unknown law kind '" + kind + "'");
  }
  o.finish();
  return law;
}

inline JumpLaw parse_law_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("law spec is not valid JSON: ") + e.what());
  }
  return parse_law(j, "law");
}

namespace detail {

inline ExperimentParams parse_params(const Json& j, const std::string& path) {
  ExperimentParams p;
  StrictObject o(j, path);
  auto real = [&](const char* key, double& out) {
    if (const auto* v = o.find(key)) out = to_real(*v, o.sub(key));
  };
  auto count = [&](const char* key, auto& out) {
    if (const auto* v = o.find(key)) {
      const auto c = to_count(*v, o.sub(key));
      using T = std::remove_reference_t<decltype(out)>;
      if (c > std::numeric_limits<T>::max()) throw ConfigError(o.sub(key) + ": value too large");
      out = static_cast<T>(c);
    }
  };
  real("quantile_factor", p.quantile_factor);
  real("qq_threshold", p.qq_threshold);
  if (const auto* v = o.find("auxiliary_target")) p.auxiliary_target = to_point(*v, o.sub("auxiliary_target"));
  if (const auto* v = o.find("times")) {
    if (!v->is_array() || v->empty()) throw ConfigError(o.sub("times") + ": expected a nonempty array");
    p.times.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const double t = to_real((*v)[i], o.sub("times") + "[" + std::to_string(i) + "]");
      if (!(t > 0.0 && t <= 1.0)) throw ConfigError(o.sub("times") + ": times must lie in (0, 1]");
      p.times.push_back(t);
    }
  }
  real("alpha", p.alpha);
  real("covariance_tolerance", p.covariance_tolerance);
  real("pass_fraction", p.pass_fraction);
  count("seed_repetitions", p.seed_repetitions);
  count("baseline_replicates", p.baseline_replicates);
  count("ks_horizon", p.ks_horizon);
  real("stabilization_tolerance", p.stabilization_tolerance);
  real("probability_tolerance", p.probability_tolerance);
  real("ks_max", p.ks_max);
  real("confidence", p.confidence);
  real("probability_floor", p.probability_floor);
  count("mc_max_k", p.mc_max_k);
  real("sd_tolerance", p.sd_tolerance);
  count("exact_nmax", p.exact_nmax);
  real("decade_tolerance", p.decade_tolerance);
  real("llt_tolerance", p.llt_tolerance);
  if (const auto* v = o.find("target_y")) p.target_y = to_point(*v, o.sub("target_y"));
  if (const auto* v = o.find("search_radius")) p.search_radius = to_int(*v, o.sub("search_radius"));
  o.finish();
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw ConfigError(path + ".alpha: significance level must lie in (0, 1)");
  if (!(p.confidence > 0.0 && p.confidence < 1.0)) throw ConfigError(path + ".confidence: must lie in (0, 1)");
  return p;
}

inline bool safe_name(const std::string& s) {
  if (s.empty() || s.size() > 100) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

}  // namespace detail

struct ParsedConfig {
  std::uint64_t seed = 0;
  std::vector<ExperimentSpec> experiments;
  std::string config_hash;  // FNV-1a 64 of the canonical (sorted-key, compact) document
};

// Strict parse: unknown fields anywhere are errors naming their path.
inline ParsedConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override = {}) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ParsedConfig cfg;
  cfg.config_hash = hex64(fnv1a64(doc.dump()));
  detail::StrictObject root(doc, "$");
  if (const auto* s = root.find("seed")) cfg.seed = detail::to_count(*s, root.sub("seed"));
  if (seed_override) cfg.seed = *seed_override;
  const auto& ex = root.at("experiments");
  if (!ex.is_array()) throw ConfigError("$.experiments: expected an array");
  root.finish();
  std::set<std::string> names;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const std::string path = "$.experiments[" + std::to_string(i) + "]";
    detail::StrictObject o(ex[i], path);
    ExperimentSpec s;
    const auto& nj = o.at("name");
    if (!nj.is_string() || !detail::safe_name(nj.get<std::string>())) {
      throw ConfigError(o.sub("name") + ": expected a name of letters, digits, '_' or '-'");
    }
    s.name = nj.get<std::string>();
    if (!names.insert(s.name).second) throw ConfigError(o.sub("name") + ": duplicate experiment name '" + s.name + "'");
    const auto& kj = o.at("kind");
    const auto kind = kj.is_string() ? experiment_kind_from_string(kj.get<std::string>()) : std::nullopt;
    if (!kind) throw ConfigError(o.sub("kind") + ": unknown experiment kind");
    s.kind = *kind;
    s.index = static_cast<std::uint32_t>(i);
    s.seed = cfg.seed;
    if (const auto* sj = o.find("seed")) {
      if (!seed_override) s.seed = detail::to_count(*sj, o.sub("seed"));
    }
    s.replicates = detail::to_count(o.at("replicates"), o.sub("replicates"));
    const auto& hj = o.at("horizons");
    if (!hj.is_array()) throw ConfigError(o.sub("horizons") + ": expected an array");
    for (std::size_t k = 0; k < hj.size(); ++k) s.horizons.push_back(detail::to_count(hj[k], o.sub("horizons") + "[" + std::to_string(k) + "]"));

    detail::StrictObject w(o.at("walk"), o.sub("walk"));
    s.start = detail::to_point(w.at("start"), w.sub("start"));
    s.base = parse_law(w.at("base"), w.sub("base"));
    w.finish();

    if (const auto* mj = o.find("membrane")) {
      if (!mj->is_array()) throw ConfigError(o.sub("membrane") + ": expected an array");
      for (std::size_t k = 0; k < mj->size(); ++k) {
        const std::string mp = o.sub("membrane") + "[" + std::to_string(k) + "]";
        detail::StrictObject m((*mj)[k], mp);
        const auto point = detail::to_point(m.at("point"), m.sub("point"));
        auto law = parse_law(m.at("law"), m.sub("law"));
        m.finish();
        try {
          s.membrane.add(point, std::move(law));
        } catch (const ConfigError& e) {
          throw ConfigError(mp + ": " + e.what());
        }
      }
    }
    if (const auto* nj2 = o.find("norm")) {
      const auto n = nj2->is_string() ? nj2->get<std::string>() : "";
      if (n == "sup") {
        s.norm = Norm::Sup;
      } else if (n == "euclidean") {
        s.norm = Norm::Euclidean;
      } else {
        throw ConfigError(o.sub("norm") + ": expected \"sup\" or \"euclidean\"");
      }
    }
    if (const auto* pj = o.find("params")) s.params = detail::parse_params(*pj, o.sub("params"));
    o.finish();
    try {
      s.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
    cfg.experiments.push_back(std::move(s));
  }
  return cfg;
}

}  // namespace lpwalk
