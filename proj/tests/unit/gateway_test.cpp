#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "forge/llm/gateway.hpp"
#include "forge/llm/mock_backend.hpp"
#include "forge/prompts.hpp"
#include "forge/util/io.hpp"
#include "test_support.hpp"

namespace forge::llm {
namespace {

using testing::LambdaBackend;

std::shared_ptr<LambdaBackend> echo_backend() {
  return std::make_shared<LambdaBackend>([](const GenerationRequest& r) {
    std::vector<std::string> out;
    for (int i = 0; i < r.n_samples; ++i) out.push_back(r.user_prompt + "#" + std::to_string(i));
    return out;
  });
}

TEST(Request, Validation) {
  auto r = GenerationRequest::sample("", "u", 0, 1.0, "t");
  EXPECT_THROW(validate(r), PreconditionError);
  r = GenerationRequest::greedy("", "u", "t");
  r.n_samples = 2;
  EXPECT_THROW(validate(r), PreconditionError);
  r = GenerationRequest::sample("", "u", 2, -0.5, "t");
  EXPECT_THROW(validate(r), PreconditionError);
  r = GenerationRequest::sample("", "u", 2, 1.0, "t", 0);
  EXPECT_THROW(validate(r), PreconditionError);
  EXPECT_NO_THROW(validate(GenerationRequest::sample("", "u", 10, 1.0, "t")));
}

TEST(Request, CacheKeyCoversDecodingParameters) {
  const auto a = GenerationRequest::sample("s", "u", 3, 1.0, "t");
  auto b = a;
  b.temperature = 0.7;
  auto c = a;
  c.request_tag = "other";
  auto d = a;
  d.n_samples = 4;
  EXPECT_NE(cache_key(a, "m"), cache_key(b, "m"));
  EXPECT_NE(cache_key(a, "m"), cache_key(c, "m"));
  EXPECT_NE(cache_key(a, "m"), cache_key(d, "m"));
  EXPECT_NE(cache_key(a, "m"), cache_key(a, "other-backend"));
  // greedy ignores temperature
  auto g1 = GenerationRequest::greedy("s", "u", "t");
  auto g2 = g1;
  g2.temperature = 0.2;
  EXPECT_EQ(cache_key(g1, "m"), cache_key(g2, "m"));
}

TEST(GatewayTest, SecondIdenticalCallIsCached) {
  auto backend = echo_backend();
  auto gw = testing::make_gateway(backend);
  const auto req = GenerationRequest::greedy("s", "hello", "t");
  const auto first = gw->generate(req);
  const auto second = gw->generate(req);
  EXPECT_FALSE(first.cached);
  EXPECT_TRUE(second.cached);
  EXPECT_EQ(first.texts, second.texts);
  EXPECT_EQ(backend->calls.load(), 1);
}

TEST(GatewayTest, SampleReturnsRequestedCount) {
  auto gw = testing::make_gateway(echo_backend());
  EXPECT_EQ(gw->generate(GenerationRequest::sample("", "q", 10, 1.0, "t")).texts.size(), 10u);
}

TEST(GatewayTest, RetriesTransientFailuresWithBackoff) {
  int failures = 2;
  auto backend = std::make_shared<LambdaBackend>([&](const GenerationRequest&) -> std::vector<std::string> {
    if (failures-- > 0) throw RetriableError("503");
    return {"ok"};
  });
  std::vector<std::chrono::milliseconds> slept;
  GatewayOptions opts;
  opts.sleep = [&](std::chrono::milliseconds d) { slept.push_back(d); };
  Gateway gw(backend, nullptr, opts);
  EXPECT_EQ(gw.generate(GenerationRequest::greedy("", "q", "t")).texts.front(), "ok");
  EXPECT_EQ(backend->calls.load(), 3);
  ASSERT_EQ(slept.size(), 2u);
  EXPECT_EQ(slept[0].count(), 250);
  EXPECT_EQ(slept[1].count(), 500);
}

TEST(GatewayTest, GivesUpAfterMaxAttempts) {
  auto backend = std::make_shared<LambdaBackend>(
      [](const GenerationRequest&) -> std::vector<std::string> { throw RetriableError("down"); });
  auto gw = testing::make_gateway(backend);
  EXPECT_THROW(gw->generate(GenerationRequest::greedy("", "q", "t")), RetriableError);
  EXPECT_EQ(backend->calls.load(), 5);
}

TEST(GatewayTest, ContentErrorsAreNotRetried) {
  auto backend = std::make_shared<LambdaBackend>(
      [](const GenerationRequest&) -> std::vector<std::string> { throw ContentError("refused", "raw"); });
  auto gw = testing::make_gateway(backend);
  EXPECT_THROW(gw->generate(GenerationRequest::greedy("", "q", "t")), ContentError);
  EXPECT_EQ(backend->calls.load(), 1);
}

TEST(GatewayTest, EmptyOrMissingTextsAreContentErrors) {
  auto empty = testing::make_gateway(
      std::make_shared<LambdaBackend>([](const GenerationRequest&) { return std::vector<std::string>{""}; }));
  EXPECT_THROW(empty->generate(GenerationRequest::greedy("", "q", "t")), ContentError);
  auto short_gw = testing::make_gateway(
      std::make_shared<LambdaBackend>([](const GenerationRequest&) { return std::vector<std::string>{"a"}; }));
  EXPECT_THROW(short_gw->generate(GenerationRequest::sample("", "q", 2, 1.0, "t")), ContentError);
}

TEST(GatewayTest, BoundsConcurrentBackendCalls) {
  std::atomic<int> in_flight{0}, peak{0};
  auto backend = std::make_shared<LambdaBackend>([&](const GenerationRequest& r) {
    const int now = ++in_flight;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    return std::vector<std::string>{r.user_prompt};
  });
  auto gw = testing::make_gateway(backend, 2);
  std::vector<std::jthread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 5; ++i) gw->generate(GenerationRequest::greedy("", std::to_string(t * 10 + i), "x"));
    });
  }
  threads.clear();
  EXPECT_LE(peak.load(), 2);
  EXPECT_EQ(backend->calls.load(), 40);
}

TEST(Cache, PersistsAcrossInstancesAndFirstCommitWins) {
  testing::TempDir dir;
  const auto path = dir / "cache.jsonl";
  {
    ResponseCache cache(path);
    EXPECT_EQ(cache.commit("k1", "b", {"one"}), std::vector<std::string>{"one"});
    EXPECT_EQ(cache.commit("k1", "b", {"two"}), std::vector<std::string>{"one"});
  }
  ResponseCache reopened(path);
  EXPECT_EQ(reopened.size(), 1u);
  EXPECT_EQ(reopened.lookup("k1"), std::vector<std::string>{"one"});
}

TEST(Cache, IgnoresTornFinalLine) {
  testing::TempDir dir;
  const auto path = dir / "cache.jsonl";
  {
    ResponseCache cache(path);
    cache.commit("k1", "b", {"one"});
  }
  std::ofstream(path, std::ios::app) << R"({"key":"k2","backend_id":"b","te)";
  ResponseCache reopened(path);
  EXPECT_EQ(reopened.size(), 1u);
  EXPECT_FALSE(reopened.lookup("k2").has_value());
}

TEST(Cache, GatewayServesFromFileAfterRestart) {
  testing::TempDir dir;
  const auto path = dir / "cache.jsonl";
  const auto req = GenerationRequest::sample("", "q", 3, 1.0, "t");
  std::vector<std::string> first;
  {
    Gateway gw(echo_backend(), std::make_shared<ResponseCache>(path), testing::no_sleep());
    first = gw.generate(req).texts;
  }
  auto backend = echo_backend();
  Gateway gw(backend, std::make_shared<ResponseCache>(path), testing::no_sleep());
  const auto again = gw.generate(req);
  EXPECT_TRUE(again.cached);
  EXPECT_EQ(again.texts, first);
  EXPECT_EQ(backend->calls.load(), 0);
}

TEST(Mock, ScriptedPromptReturnsScriptedOutputs) {
  MockScript script{{prompt_fingerprint("sys", "user"), {"x", "y"}}};
  MockBackend mock(script, [](const GenerationRequest&, int i) { return "fallback" + std::to_string(i); });
  const auto out = mock.complete(GenerationRequest::sample("sys", "user", 3, 1.0, "t"));
  EXPECT_EQ(out, (std::vector<std::string>{"x", "y", "x"}));
  const auto other = mock.complete(GenerationRequest::sample("sys", "other", 2, 1.0, "t"));
  EXPECT_EQ(other, (std::vector<std::string>{"fallback0", "fallback1"}));
}

TEST(Mock, LoadsScriptFile) {
  testing::TempDir dir;
  util::write_jsonl_atomic(dir / "script.jsonl", {{{"system", "s"}, {"user", "u"}, {"outputs", {"answer"}}}});
  const auto script = load_mock_script(dir / "script.jsonl");
  ASSERT_EQ(script.size(), 1u);
  EXPECT_EQ(script.begin()->first, prompt_fingerprint("s", "u"));
}

TEST(Mock, DemoModelIsDeterministicPerSampleIndex) {
  const auto fn = demo_model({{"The Veyra comet returns every 71 years."}});
  const auto p = prompts::closed_book_prompt("In astronomy, how often does the Veyra comet return?");
  const auto req = GenerationRequest::sample(p.system, p.user, 4, 1.0, "t");
  for (int i = 0; i < 4; ++i) EXPECT_EQ(fn(req, i), fn(req, i));
  EXPECT_FALSE(fn(req, 0).empty());
}

TEST(Mock, DemoJudgePrefersGroundedResponse) {
  const auto fn = demo_model();
  const auto p = prompts::judge_prompt("What colour is the lake?", "The crater lake is green before unrest.",
                                       "The crater lake is green.", "It is purple and made of glass.", false);
  EXPECT_EQ(fn(GenerationRequest::greedy(p.system, p.user, "t"), 0), "A");
}

}  // namespace
}  // namespace forge::llm
