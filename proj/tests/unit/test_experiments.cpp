#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "lpwalk/config.hpp"
#include "lpwalk/experiments.hpp"

using namespace lpwalk;

namespace {

ExperimentSpec spec(const std::string& body) {
  return parse_config(R"({"seed": 2026, "experiments": [)" + body + "]}").experiments.at(0);
}

const std::string kSimple2 = R"({"kind": "SimpleNeighbor", "dim": 2})";
const std::string kKick3 = R"({"kind": "Categorical", "support": [{"point": [3, 0], "p": "0.25"}, {"point": [-3, 0], "p": "0.25"},
                                {"point": [0, 3], "p": "0.25"}, {"point": [0, -3], "p": "0.25"}]})";

ExperimentSpec occupation(bool with_membrane) {
  std::string body = R"({"name": "occ", "kind": "occupation_growth", "replicates": 300, "horizons": [100, 1000, 4000],
    "walk": {"start": [0, 0], "base": {"kind": "LazySimpleNeighbor", "dim": 2, "p0": "0.5"}},
    "params": {"auxiliary_target": [1, 0]})";
  if (with_membrane) body += R"(, "membrane": [{"point": [0, 0], "law": )" + kKick3 + "}]";
  return spec(body + "}");
}

bool same_statistics(const ExperimentResult& a, const ExperimentResult& b) {
  if (a.statistics.size() != b.statistics.size()) return false;
  for (std::size_t i = 0; i < a.statistics.size(); ++i) {
    if (a.statistics[i].name != b.statistics[i].name || a.statistics[i].value != b.statistics[i].value) return false;
  }
  return true;
}

}  // namespace

TEST(Experiments, OccupationGrowthRunsAndIsDeterministic) {
  const auto s = occupation(true);
  const auto a = run_experiment(s, 1);
  const auto b = run_experiment(s, 3);
  EXPECT_TRUE(same_statistics(a, b));
  EXPECT_GT(a.value("mean_T_over_log_n", 4000), 0.0);
  EXPECT_NO_THROW(a.flag("q99_stable_across_horizons"));
  EXPECT_NO_THROW(a.flag("auxiliary_exponential_qq"));
  EXPECT_GT(a.value("auxiliary_exponential_qq_correlation", 4000), 0.9);
  auto reseeded = s;
  reseeded.seed = 1;
  EXPECT_FALSE(same_statistics(a, run_experiment(reseeded, 1)));
}

TEST(Experiments, EmptyMembraneHasZeroOccupation) {
  auto s = occupation(false);
  s.params.auxiliary_target.reset();
  const auto r = run_experiment(s, 2);
  for (std::uint64_t n : {100u, 1000u, 4000u}) EXPECT_EQ(r.value("q99_T_over_log_n", n), 0.0);
  EXPECT_TRUE(r.passed());
}

TEST(Experiments, DonskerRejectsDegenerateCovariance) {
  const auto s = spec(R"({"name": "d", "kind": "donsker_preservation", "replicates": 100, "horizons": [100],
    "walk": {"start": [0, 0], "base": {"kind": "DiagonalEmbedding", "base": {"kind": "SimpleNeighbor", "dim": 1}}}})");
  EXPECT_THROW(run_experiment(s, 1), DomainError);
}

TEST(Experiments, DonskerSmallRun) {
  const auto s = spec(R"({"name": "d", "kind": "donsker_preservation", "replicates": 2000, "horizons": [2000],
    "walk": {"start": [0, 0], "base": )" + kSimple2 + R"(},
    "membrane": [{"point": [0, 0], "law": )" + kKick3 + R"(}],
    "params": {"seed_repetitions": 4, "pass_fraction": 0.5, "covariance_tolerance": 0.15}})");
  const auto r = run_experiment(s, 2);
  EXPECT_TRUE(r.passed()) << r.flags.size();
  EXPECT_NEAR(r.value("cov_xx_over_t", 2000), 0.5, 0.1);
}

TEST(Experiments, ReturnTailAgreesWithMonteCarlo) {
  const auto s = spec(R"({"name": "rt", "kind": "return_tail", "replicates": 5000, "horizons": [100, 1000, 10000],
    "walk": {"start": [0, 0], "base": )" + kSimple2 + R"(}, "params": {"mc_max_k": 30}})");
  const auto r = run_experiment(s, 2);
  EXPECT_TRUE(r.flag("renewal_identity").pass);
  EXPECT_TRUE(r.flag("monte_carlo_vs_exact").pass) << r.flag("monte_carlo_vs_exact").value;
  EXPECT_NEAR(r.value("R_n", 100), simple_walk_return_table(2, 100).R[100], 1e-15);
}

TEST(Experiments, LocalLimitLazyWalk) {
  const auto s = spec(R"({"name": "ll", "kind": "local_limit", "replicates": 100, "horizons": [100, 300],
    "walk": {"start": [0, 0], "base": {"kind": "LazySimpleNeighbor", "dim": 2, "p0": "0.5"}}})");
  const auto r = run_experiment(s, 1);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.value("period", 300), 1.0);
}

TEST(Experiments, SkewGammaAndAntisymmetry) {
  const auto s = spec(R"({"name": "sk", "kind": "skew_1d", "replicates": 400, "horizons": [400],
    "walk": {"start": [0, 0], "base": {"kind": "DiagonalEmbedding", "base": {"kind": "Categorical",
      "support": [{"point": [-1], "p": "0.5"}, {"point": [1], "p": "0.5"}]}}},
    "membrane": [{"point": [0, 0], "law": {"kind": "DiagonalEmbedding", "base": {"kind": "Categorical",
      "support": [{"point": [2], "p": "0.75"}, {"point": [-1], "p": "0.25"}]}}}],
    "params": {"probability_tolerance": 0.2, "ks_max": 0.3}})");
  const auto r = run_experiment(s, 2);
  EXPECT_NEAR(r.value("gamma", 400), 1.25 / 1.75, 1e-15);
  EXPECT_TRUE(r.flag("second_coordinate_is_minus_first").pass);
}

TEST(Experiments, TransientRequiresTransientBase) {
  const auto s = spec(R"({"name": "t", "kind": "transient_preservation", "replicates": 100, "horizons": [100],
    "walk": {"start": [0, 0], "base": )" + kSimple2 + "}}");
  EXPECT_THROW(run_experiment(s, 1), DomainError);
}

TEST(Experiments, GRatioOfSingletonIsOne) {
  const auto s = spec(R"({"name": "g", "kind": "g_ratio", "replicates": 4000, "horizons": [100, 1000],
    "walk": {"start": [0, 0], "base": )" + kSimple2 + R"(},
    "membrane": [{"point": [0, 0], "law": )" + kSimple2 + "}]}");
  const auto r = run_experiment(s, 2);
  for (std::uint64_t n : {100u, 1000u}) EXPECT_NEAR(r.value("g_ratio", n), 1.0, 0.1);
  EXPECT_TRUE(r.passed());
}

TEST(Experiments, CounterexampleRequiresLogLogKick) {
  const auto s = spec(R"({"name": "c", "kind": "counterexample", "replicates": 100, "horizons": [100],
    "walk": {"start": [0, 0], "base": )" + kSimple2 + R"(},
    "membrane": [{"point": [0, 0], "law": )" + kSimple2 + "}]}");
  EXPECT_THROW(run_experiment(s, 1), ConfigError);
}

TEST(Experiments, ConditionBFailureIsReported) {
  const auto s = spec(R"({"name": "cb", "kind": "occupation_growth", "replicates": 100, "horizons": [100],
    "walk": {"start": [0, 0], "base": )" + kSimple2 + R"(},
    "membrane": [{"point": [0, 0], "law": {"kind": "Categorical", "support": [{"point": [1, 0], "p": 1}]}},
                 {"point": [1, 0], "law": {"kind": "Categorical", "support": [{"point": [-1, 0], "p": 1}]}}]})");
  EXPECT_THROW(run_experiment(s, 1), DomainError);
}
