#include <gtest/gtest.h>

#include <random>
#include <set>

#include "forge/instruction_gen.hpp"
#include "test_support.hpp"

namespace forge::instructions {
namespace {

using testing::LambdaBackend;

TEST(Validate, RejectsEmptyMultiQuestionAndSourceMentions) {
  EXPECT_FALSE(validate_instruction("   ", "art").accepted);
  EXPECT_FALSE(validate_instruction("In art, who? And when?", "art").accepted);
  EXPECT_FALSE(validate_instruction("According to the document, what is art?", "art").accepted);
  EXPECT_FALSE(validate_instruction("What does the passage say about art?", "art").accepted);
  const auto ok = validate_instruction("In art, who painted the Larch triptych?", "art");
  EXPECT_TRUE(ok.accepted);
  EXPECT_FALSE(ok.topic_missing);
}

TEST(Validate, MissingTopicIsOnlyAWarning) {
  const auto v = validate_instruction("Who painted the triptych?", "modern art");
  EXPECT_TRUE(v.accepted);
  EXPECT_TRUE(v.topic_missing);
}

TEST(Clean, StripsLabelQuotesAndTrailingLines) {
  EXPECT_EQ(clean_question("Proposed question: \"What is X?\"\nextra"), "What is X?");
}

TEST(Normalize, CaseWhitespaceAndTerminalPunctuation) {
  EXPECT_EQ(normalize_instruction("  What   IS this?? "), "what is this");
  EXPECT_EQ(normalize_instruction("What is this"), normalize_instruction("what is this?"));
}

TEST(Dedup, KeepsFirstOccurrencePerDocument) {
  std::vector<InstructionRecord> recs = {{"d1#q00", "d1", 0, "t", "What is X?", 1},
                                         {"d1#q01", "d1", 0, "t", "what is x", 1},
                                         {"d2#q00", "d2", 0, "t", "What is X?", 1}};
  const auto out = dedup_instructions(recs);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].instr_id, "d1#q00");
  EXPECT_EQ(out[1].instr_id, "d2#q00");
}

TEST(Dedup, IdempotenceProperty) {
  std::mt19937_64 gen(77);
  const std::vector<std::string> words = {"what", "What", "is", "IS", "x", "the", "  ", "lava", "?", "."};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<InstructionRecord> recs;
    const int n = static_cast<int>(gen() % 30);
    for (int i = 0; i < n; ++i) {
      std::string text;
      const int len = 1 + static_cast<int>(gen() % 4);
      for (int w = 0; w < len; ++w) text += words[gen() % words.size()] + (gen() % 2 ? " " : "");
      recs.push_back({"r" + std::to_string(i), "d" + std::to_string(gen() % 3), 0, "t", text, 1});
    }
    const auto once = dedup_instructions(recs);
    const auto twice = dedup_instructions(once);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) ASSERT_EQ(once[i].instr_id, twice[i].instr_id);
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& r : once) ASSERT_TRUE(keys.emplace(r.doc_id, normalize_instruction(r.text)).second);
  }
}

TEST(RenderPrompt, EmptyChunkIsRejected) {
  EXPECT_THROW(render_instruction_prompt({"d", 0, "  ", 0, 0}, "t", {}), PreconditionError);
}

DocumentChunks two_chunk_doc() {
  return {"doc1", "geology", {{"doc1", 0, "Basalt is volcanic.", 3, 0}, {"doc1", 1, "Granite is not.", 3, 20}}};
}

TEST(Generate, RoundRobinOverChunksWithIds) {
  int n = 0;
  auto backend = std::make_shared<LambdaBackend>([&](const llm::GenerationRequest&) {
    return std::vector<std::string>{"In geology, what is fact " + std::to_string(n++) + "?"};
  });
  auto gw = testing::make_gateway(backend);
  const std::vector<DocumentChunks> docs = {two_chunk_doc()};
  GenerationOptions opts;
  opts.per_document = 3;
  const auto out = generate_instructions(docs, *gw, opts);
  ASSERT_EQ(out.records.size(), 3u);
  EXPECT_EQ(out.records[0].instr_id, "doc1#q00");
  EXPECT_EQ(out.records[1].chunk_index, 1u);
  EXPECT_EQ(out.records[2].chunk_index, 0u);
  EXPECT_EQ(out.stats.accepted, 3u);
  EXPECT_DOUBLE_EQ(out.stats.yield_rate(), 1.0);
}

TEST(Generate, RetriesRejectedOutputsThenDropsSlot) {
  auto backend = std::make_shared<LambdaBackend>([](const llm::GenerationRequest& r) {
    if (r.request_tag.find("q00|3") != std::string::npos) return std::vector<std::string>{"In geology, why?"};
    return std::vector<std::string>{"What does the document say?"};
  });
  auto gw = testing::make_gateway(backend);
  const std::vector<DocumentChunks> docs = {two_chunk_doc()};
  GenerationOptions opts;
  opts.per_document = 2;
  const auto out = generate_instructions(docs, *gw, opts);
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.records[0].attempts_used, 3);
  EXPECT_EQ(out.stats.dropped_slots, 1u);
  EXPECT_EQ(out.stats.rejected, 5u);
  EXPECT_EQ(out.stats.attempted, 6u);
}

TEST(Generate, BackendFailureDropsSlotAndIsCounted) {
  auto backend = std::make_shared<LambdaBackend>(
      [](const llm::GenerationRequest&) -> std::vector<std::string> { throw ContentError("refused", "r"); });
  auto gw = testing::make_gateway(backend);
  const std::vector<DocumentChunks> docs = {two_chunk_doc()};
  GenerationOptions opts;
  opts.per_document = 2;
  const auto out = generate_instructions(docs, *gw, opts);
  EXPECT_TRUE(out.records.empty());
  EXPECT_EQ(out.stats.backend_failures, 2u);
  EXPECT_EQ(out.stats.failures.size(), 2u);
}

TEST(Generate, DuplicatesAreRemovedAndCounted) {
  auto backend = std::make_shared<LambdaBackend>(
      [](const llm::GenerationRequest&) { return std::vector<std::string>{"In geology, what is basalt?"}; });
  auto gw = testing::make_gateway(backend);
  const std::vector<DocumentChunks> docs = {two_chunk_doc()};
  GenerationOptions opts;
  opts.per_document = 4;
  const auto out = generate_instructions(docs, *gw, opts);
  EXPECT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.stats.duplicates_removed, 3u);
}

TEST(Generate, CountNeverExceedsSlots) {
  auto gw = testing::demo_gateway();
  std::vector<DocumentChunks> docs;
  for (int d = 0; d < 5; ++d) {
    docs.push_back({"doc" + std::to_string(d), "astronomy",
                    {{"doc" + std::to_string(d), 0, "Comets orbit the Sun on long elliptical paths. Tails point away.", 10, 0}}});
  }
  const auto out = generate_instructions(docs, *gw, {});
  EXPECT_GT(out.records.size(), 0u);
  EXPECT_LE(out.records.size(), 5u * 8u);
}

TEST(InstructionJson, RoundTrip) {
  const InstructionRecord r{"d#q01", "d", 2, "t", "Q?", 2};
  const auto back = instruction_from_json(to_json(r));
  EXPECT_EQ(back.instr_id, r.instr_id);
  EXPECT_EQ(back.chunk_index, 2u);
  EXPECT_EQ(back.attempts_used, 2);
}

}  // namespace
}  // namespace forge::instructions
