#include <gtest/gtest.h>

#include <fstream>

#include "forge/config.hpp"
#include "forge/util/error.hpp"
#include "test_support.hpp"

namespace forge::config {
namespace {

const std::filesystem::path kFixture = std::filesystem::path(FORGE_FIXTURE_DIR) / "mock_pipeline";

Overrides with_corpus() {
  Overrides o;
  o.corpus_root = kFixture / "corpus";
  return o;
}

std::vector<std::string> problems_of(const util::Json& doc, const Overrides& o = with_corpus()) {
  try {
    validate_config(doc, kFixture, o);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

bool has_problem(const std::vector<std::string>& problems, const std::string& text) {
  for (const auto& p : problems) {
    if (p.find(text) != std::string::npos) return true;
  }
  return false;
}

TEST(Config, EmptyConfigGetsDefaults) {
  const auto c = validate_config(util::Json::object(), kFixture, with_corpus());
  EXPECT_DOUBLE_EQ(c.tau_L, 0.5);
  EXPECT_DOUBLE_EQ(c.tau_K, 0.5);
  EXPECT_EQ(c.k, 10u);
  EXPECT_DOUBLE_EQ(c.temperature, 1.0);
  EXPECT_DOUBLE_EQ(c.beta, 0.3);
  EXPECT_EQ(c.steps, 300u);
  EXPECT_EQ(c.questions_per_document, 8u);
  EXPECT_EQ(c.chunk_tokens, 512u);
  EXPECT_NEAR(c.rc_fraction, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(c.train_per_topic, 100u);
  EXPECT_EQ(c.eval_per_topic, 10u);
  EXPECT_EQ(c.known_sample, 200u);
  EXPECT_EQ(c.sweep, (std::vector<double>{0.5, 0.6, 0.7, 0.8}));
  EXPECT_EQ(c.topics.size(), 3u);
  EXPECT_EQ(c.work_dir, kFixture / "forge-out");
  for (const auto& role : kGenerationRoles) EXPECT_EQ(c.backends.at(role).kind, "mock");
  EXPECT_EQ(c.scorer.kind, "lexical");
}

TEST(Config, OutOfRangeThresholdNamed) {
  const auto p = problems_of({{"filter", {{"tau_K", 1.5}}}});
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0], "filter.tau_K = 1.5 is out of range [0, 1]");
}

TEST(Config, ProblemsAreAggregated) {
  const auto p = problems_of({{"filter", {{"tau_K", 1.5}, {"tau_L", -1}}}, {"dpo", {{"beta", 0}}}, {"bogus", 1}});
  EXPECT_EQ(p.size(), 4u);
  EXPECT_TRUE(has_problem(p, "bogus: unknown setting"));
}

TEST(Config, CorpusRootRequired) {
  const auto p = problems_of(util::Json::object(), Overrides{});
  EXPECT_TRUE(has_problem(p, "corpus.root: required"));
}

TEST(Config, MissingRoleInBackendsBlock) {
  util::Json backends = util::Json::object();
  for (const auto& role : kGenerationRoles) backends[role] = {{"kind", "mock"}};
  const auto p = problems_of({{"backends", backends}});
  EXPECT_TRUE(has_problem(p, "backends.scorer: no backend bound for this role"));
  backends.erase("judge");
  backends["scorer"] = {{"kind", "lexical"}};
  EXPECT_TRUE(has_problem(problems_of({{"backends", backends}}), "backends.judge: no backend bound"));
}

TEST(Config, ChatBackendNeedsUrlAndModel) {
  const auto p = problems_of({{"backends",
                               {{"instruction_generator", {{"kind", "chat"}}},
                                {"target_model", {{"kind", "mock"}}},
                                {"rc_teacher", {{"kind", "mock"}}},
                                {"judge", {{"kind", "mock"}}},
                                {"scorer", {{"kind", "lexical"}}}}}});
  EXPECT_TRUE(has_problem(p, "backends.instruction_generator.base_url"));
  EXPECT_TRUE(has_problem(p, "backends.instruction_generator.model"));
}

TEST(Config, SftModelFallsBackToTarget) {
  const auto c = validate_config(
      util::Json{{"backends",
                  {{"instruction_generator", {{"kind", "mock"}}},
                   {"target_model", {{"kind", "chat"}, {"base_url", "http://h:1"}, {"model", "m"}}},
                   {"rc_teacher", {{"kind", "mock"}}},
                   {"judge", {{"kind", "mock"}}},
                   {"scorer", {{"kind", "lexical"}}}}}},
      kFixture, with_corpus());
  EXPECT_EQ(c.backends.at(kSftModelRole).kind, "chat");
  EXPECT_EQ(c.backends.at(kSftModelRole).model, "m");
}

TEST(Config, CliOverridesWin) {
  Overrides o = with_corpus();
  o.tau_K = 0.7;
  o.k = 4;
  o.seed = 99;
  o.backend["judge.max_parallel"] = "2";
  const auto c = validate_config(util::Json{{"filter", {{"tau_K", 0.2}}}}, kFixture, o);
  EXPECT_DOUBLE_EQ(c.tau_K, 0.7);
  EXPECT_EQ(c.k, 4u);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.backends.at("judge").max_parallel, 2u);
  Overrides bad = with_corpus();
  bad.backend["judge.max_parallel"] = "lots";
  EXPECT_FALSE(problems_of(util::Json::object(), bad).empty());
}

TEST(Config, ExtractBackendOverrides) {
  std::map<std::string, std::string> out;
  const auto rest = extract_backend_overrides(
      {"forge", "run-all", "--backend.judge.model=gpt", "--backend.scorer.kind", "nli", "-q"}, out);
  EXPECT_EQ(rest, (std::vector<std::string>{"forge", "run-all", "-q"}));
  EXPECT_EQ(out.at("judge.model"), "gpt");
  EXPECT_EQ(out.at("scorer.kind"), "nli");
}

TEST(Config, FileLoadingAndEmptyFile) {
  testing::TempDir dir;
  const auto path = dir / "empty.json";
  std::ofstream(path).close();
  const auto c = validate_config(path, with_corpus());
  EXPECT_EQ(c.base_dir, dir.path());
  EXPECT_THROW(validate_config(dir / "missing.json", with_corpus()), ConfigError);
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_THROW(validate_config(dir / "broken.json", with_corpus()), ConfigError);
}

TEST(Config, FingerprintChangesOnlyForAffectedStages) {
  const auto a = validate_config(util::Json::object(), kFixture, with_corpus());
  Overrides o = with_corpus();
  o.tau_K = 0.6;
  const auto b = validate_config(util::Json::object(), kFixture, o);
  EXPECT_EQ(a.section_fingerprint("ingest"), b.section_fingerprint("ingest"));
  EXPECT_EQ(a.section_fingerprint("build-preferences"), b.section_fingerprint("build-preferences"));
  EXPECT_NE(a.section_fingerprint("filter"), b.section_fingerprint("filter"));
}

}  // namespace
}  // namespace forge::config
