#include <gtest/gtest.h>

#include <string>

#include "lpwalk/config.hpp"

using namespace lpwalk;

namespace {

const char* kMinimal = R"({
  "seed": 11,
  "experiments": [{
    "name": "occ",
    "kind": "occupation_growth",
    "replicates": 100,
    "horizons": [100, 1000],
    "walk": {"start": [0, 0], "base": {"kind": "SimpleNeighbor", "dim": 2}},
    "membrane": [{"point": [0, 0], "law": {"kind": "Categorical",
                  "support": [{"point": [3, 0], "p": "0.5"}, {"point": [-3, 0], "p": "0.5"}]}}]
  }]
})";

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string with(const std::string& from, const std::string& to) {
  std::string s = kMinimal;
  const auto at = s.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return s.replace(at, from.size(), to);
}

}  // namespace

TEST(Config, MinimalConfigParses) {
  const auto cfg = parse_config(kMinimal);
  EXPECT_EQ(cfg.seed, 11u);
  ASSERT_EQ(cfg.experiments.size(), 1u);
  const auto& s = cfg.experiments[0];
  EXPECT_EQ(s.name, "occ");
  EXPECT_EQ(s.kind, ExperimentKind::OccupationGrowth);
  EXPECT_EQ(s.seed, 11u);
  EXPECT_EQ(s.horizons, (std::vector<std::uint64_t>{100, 1000}));
  EXPECT_EQ(s.start, (LatticePoint{0, 0}));
  EXPECT_EQ(s.membrane.size(), 1u);
  EXPECT_DOUBLE_EQ(s.membrane.law(0).pmf(LatticePoint{3, 0}), 0.5);
  EXPECT_EQ(s.params.quantile_factor, 1.5);
  EXPECT_EQ(cfg.config_hash.size(), 16u);
}

TEST(Config, EmptyExperimentListIsValid) {
  EXPECT_TRUE(parse_config(R"({"experiments": []})").experiments.empty());
}

TEST(Config, ProbabilitySumErrorNamesTheLaw) {
  const auto e = error_of(with(R"({"point": [-3, 0], "p": "0.5"})", R"({"point": [-3, 0], "p": "0.49"})"));
  EXPECT_NE(e.find("$.experiments[0].membrane[0].law (Categorical)"), std::string::npos) << e;
  EXPECT_NE(e.find("sum to 0.99"), std::string::npos) << e;
}

TEST(Config, DuplicateMembranePoint) {
  const std::string dup = R"("membrane": [{"point": [0, 0], "law": {"kind": "SimpleNeighbor", "dim": 2}},
                                          {"point": [0, 0], "law": {"kind": "SimpleNeighbor", "dim": 2}}])";
  std::string s = kMinimal;
  const auto a = s.find("\"membrane\"");
  const auto b = s.find("}]\n  }]");
  s.replace(a, b + 2 - a, dup);
  const auto e = error_of(s);
  EXPECT_NE(e.find("membrane points must be distinct"), std::string::npos) << e;
  EXPECT_NE(e.find("membrane[1]"), std::string::npos) << e;
}

TEST(Config, UnknownFieldsAreRejectedWithPath) {
  EXPECT_NE(error_of(with("\"seed\": 11", "\"seed\": 11, \"sede\": 1")).find("$.sede: unknown field"), std::string::npos);
  EXPECT_NE(error_of(with("\"dim\": 2}", "\"dim\": 2, \"p\": 1}")).find("$.experiments[0].walk.base.p: unknown field"),
            std::string::npos);
  EXPECT_NE(error_of(with("\"replicates\": 100", "\"replicates\": 100, \"params\": {\"qq\": 1}"))
                .find("$.experiments[0].params.qq: unknown field"),
            std::string::npos);
}

TEST(Config, ValidationOfCountsAndHorizons) {
  EXPECT_NE(error_of(with("\"replicates\": 100", "\"replicates\": 99")).find("at least 100"), std::string::npos);
  EXPECT_NE(error_of(with("[100, 1000]", "[1000, 100]")).find("strictly ascending"), std::string::npos);
  EXPECT_NE(error_of(with("[100, 1000]", "[100, 100]")).find("strictly ascending"), std::string::npos);
  EXPECT_NE(error_of(with("[100, 1000]", "[]")).find("horizons list is empty"), std::string::npos);
  EXPECT_NE(error_of(with("\"replicates\": 100", "\"replicates\": -5")).find("nonnegative integer"), std::string::npos);
  EXPECT_NE(error_of(with("\"kind\": \"occupation_growth\"", "\"kind\": \"nope\"")).find("unknown experiment kind"),
            std::string::npos);
  EXPECT_NE(error_of(with("\"name\": \"occ\"", "\"name\": \"../x\"")).find("$.experiments[0].name"), std::string::npos);
  EXPECT_NE(error_of("{not json").find("not valid JSON"), std::string::npos);
  EXPECT_NE(error_of(with("\"replicates\": 100", "\"replicates\": 100, \"params\": {\"alpha\": 1.5}")).find("alpha"),
            std::string::npos);
  EXPECT_NE(error_of(with("\"start\": [0, 0]", "\"start\": [0, 0, 0]")).find("dimension"), std::string::npos);
}

TEST(Config, DuplicateExperimentNames) {
  std::string two = R"({"experiments": [)";
  const std::string one = R"({"name": "a", "kind": "return_tail", "replicates": 100, "horizons": [10],
      "walk": {"start": [0, 0], "base": {"kind": "SimpleNeighbor", "dim": 2}}})";
  two += one + "," + one + "]}";
  EXPECT_NE(error_of(two).find("duplicate experiment name"), std::string::npos);
}

TEST(Config, DecimalStringsAreExact) {
  const auto law = parse_law_text(R"({"kind": "LazySimpleNeighbor", "dim": 2, "p0": "0.1"})");
  EXPECT_EQ(law.laziness(), 0.1);
  const auto cat = parse_law_text(
      R"({"kind": "Categorical", "support": [{"point": [1], "p": "0.1"}, {"point": [2], "p": "0.2"}, {"point": [3], "p": "0.7"}]})");
  EXPECT_EQ(cat.pmf(LatticePoint{2}), 0.2);
  EXPECT_THROW(parse_law_text(R"({"kind": "LazySimpleNeighbor", "dim": 2, "p0": "0.1x"})"), ConfigError);
  EXPECT_THROW(parse_law_text(R"({"kind": "Nope"})"), ConfigError);
  const auto diag = parse_law_text(R"({"kind": "DiagonalEmbedding", "base": {"kind": "Categorical",
      "support": [{"point": [2], "p": "0.75"}, {"point": [-1], "p": "0.25"}]}})");
  EXPECT_EQ(diag.pmf(LatticePoint{2, -2}), 0.75);
}

TEST(Config, HashIgnoresFormattingButNotContent) {
  const auto a = parse_config(kMinimal).config_hash;
  std::string compact;
  for (char c : std::string(kMinimal)) {
    if (c != '\n' && c != ' ') compact += c;
  }
  EXPECT_EQ(parse_config(compact).config_hash, a);
  EXPECT_EQ(parse_config(kMinimal).config_hash, a);
  EXPECT_NE(parse_config(with("\"seed\": 11", "\"seed\": 12")).config_hash, a);
  const std::string reordered = R"({"experiments": [], "seed": 3})", ordered = R"({"seed": 3, "experiments": []})";
  EXPECT_EQ(parse_config(reordered).config_hash, parse_config(ordered).config_hash);
}

TEST(Config, SeedOverrideReplacesEverySeed) {
  const auto cfg = parse_config(with("\"replicates\": 100", "\"replicates\": 100, \"seed\": 5"));
  EXPECT_EQ(cfg.experiments[0].seed, 5u);
  const auto over = parse_config(with("\"replicates\": 100", "\"replicates\": 100, \"seed\": 5"), 77);
  EXPECT_EQ(over.seed, 77u);
  EXPECT_EQ(over.experiments[0].seed, 77u);
}
