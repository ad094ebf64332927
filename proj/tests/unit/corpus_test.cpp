#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "forge/corpus.hpp"
#include "forge/util/error.hpp"
#include "forge/util/io.hpp"
#include "test_support.hpp"

namespace forge::corpus {
namespace {

void write_topic_jsonl(const std::filesystem::path& root, const std::string& topic, int n, int empty = 0) {
  std::vector<util::Json> recs;
  for (int i = 0; i < n; ++i) {
    recs.push_back({{"doc_id", topic + "-" + std::to_string(i)},
                    {"title", "T" + std::to_string(i)},
                    {"text", "Body of document " + std::to_string(i) + " about " + topic + "."}});
  }
  for (int i = 0; i < empty; ++i) {
    recs.push_back({{"doc_id", topic + "-empty" + std::to_string(i)}, {"title", ""}, {"text", "   \n"}});
  }
  util::write_jsonl_atomic(root / (topic + ".jsonl"), recs);
}

TEST(Ingest, SplitsTrainAndEvalPerTopic) {
  testing::TempDir dir;
  write_topic_jsonl(dir.path(), "physics", 15, 2);
  write_topic_jsonl(dir.path(), "history", 12);
  const auto r = ingest_corpus(dir.path(), {{"physics", "history"}, 10, 2, 5});
  ASSERT_EQ(r.documents.size(), 24u);
  EXPECT_EQ(r.skipped_empty, 2u);
  EXPECT_EQ(r.documents[0].topic, "physics");
  EXPECT_EQ(r.documents[12].topic, "history");
  std::size_t train = 0;
  for (const auto& d : r.documents) train += d.split == Split::kTrain;
  EXPECT_EQ(train, 20u);
  for (std::size_t i = 1; i < 10; ++i) EXPECT_LT(r.documents[i - 1].doc_id, r.documents[i].doc_id);
}

TEST(Ingest, SeededSelectionIsDeterministicAndSeedSensitive) {
  testing::TempDir dir;
  write_topic_jsonl(dir.path(), "art", 30);
  auto ids = [&](std::uint64_t seed) {
    std::vector<std::string> out;
    for (const auto& d : ingest_corpus(dir.path(), {{"art"}, 5, 1, seed}).documents) out.push_back(d.doc_id);
    return out;
  };
  EXPECT_EQ(ids(1), ids(1));
  EXPECT_NE(ids(1), ids(2));
}

TEST(Ingest, ShortfallNamesTopicAndCount) {
  testing::TempDir dir;
  write_topic_jsonl(dir.path(), "math", 7);
  try {
    ingest_corpus(dir.path(), {{"math"}, 8, 1, 0});
    FAIL() << "expected shortfall";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("math"), std::string::npos);
    EXPECT_NE(msg.find("short by 2"), std::string::npos);
  }
}

TEST(Ingest, RejectsNoTopicsAndDuplicates) {
  testing::TempDir dir;
  write_topic_jsonl(dir.path(), "a", 3);
  EXPECT_THROW(ingest_corpus(dir.path(), {{}, 1, 0, 0}), PreconditionError);
  EXPECT_THROW(ingest_corpus(dir.path(), {{"a", "a"}, 1, 0, 0}), PreconditionError);
  util::write_jsonl_atomic(dir / "b.jsonl", {{{"doc_id", "a-0"}, {"title", ""}, {"text", "x"}}});
  EXPECT_THROW(ingest_corpus(dir.path(), {{"a", "b"}, 1, 0, 0}), Error);
}

TEST(Ingest, ReadsPlainTextDirectory) {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "geo");
  std::ofstream(dir / "geo" / "g1.txt") << "Rivers flow downhill.";
  std::ofstream(dir / "geo" / "g2.txt") << "Mountains are tall.";
  const auto r = ingest_corpus(dir.path(), {{"geo"}, 2, 0, 0});
  ASSERT_EQ(r.documents.size(), 2u);
  EXPECT_EQ(r.documents[0].doc_id, "g1");
  EXPECT_EQ(r.documents[0].body, "Rivers flow downhill.");
}

SourceDocument doc_with(std::string body) { return {"d", "t", "", std::move(body), Split::kTrain}; }

TEST(Chunk, RespectsTokenLimitAndOffsets) {
  const auto chunks = chunk_document(doc_with("a b c d e f g"), 3);
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].text, "a b c ");
  EXPECT_EQ(chunks[1].text, "d e f ");
  EXPECT_EQ(chunks[2].text, "g");
  EXPECT_EQ(chunks[2].token_count, 1u);
  EXPECT_EQ(chunks[1].byte_offset, 6u);
}

TEST(Chunk, ShortDocumentIsOneChunk) {
  const auto chunks = chunk_document(doc_with("  one two  "), 512);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].text, "  one two  ");
}

TEST(Chunk, ZeroLengthIsRejected) { EXPECT_THROW(chunk_document(doc_with("x"), 0), PreconditionError); }

TEST(Chunk, CharacterTokenizerCountsCodePoints) {
  CharacterTokenizer tok;
  EXPECT_EQ(tok.tokenize("h\xC3\xA9llo").size(), 5u);
  const auto chunks = chunk_document(doc_with("h\xC3\xA9llo"), 2, tok);
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].text, "h\xC3\xA9");
}

TEST(Chunk, RoundTripProperty) {
  std::mt19937_64 gen(20240601);
  const std::vector<std::string> pieces = {"alpha", "b", "ccc", "\xC3\xA9t\xC3\xA9", "42", "x.y"};
  const std::vector<std::string> gaps = {" ", "  ", "\n", "\t", " \n "};
  WhitespaceTokenizer ws;
  CharacterTokenizer ch;
  for (int trial = 0; trial < 1000; ++trial) {
    std::string body;
    if (gen() % 3 == 0) body += gaps[gen() % gaps.size()];
    const int words = static_cast<int>(gen() % 60);
    for (int w = 0; w < words; ++w) {
      body += pieces[gen() % pieces.size()];
      if (w + 1 < words || gen() % 2) body += gaps[gen() % gaps.size()];
    }
    const std::size_t limit = 1 + gen() % 10;
    const Tokenizer& tok = trial % 2 ? static_cast<const Tokenizer&>(ws) : ch;
    const auto chunks = chunk_document(doc_with(body), limit, tok);
    std::size_t total = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      ASSERT_LE(chunks[i].token_count, limit);
      ASSERT_GE(chunks[i].token_count, 1u);
      ASSERT_EQ(chunks[i].chunk_index, i);
      total += chunks[i].token_count;
    }
    ASSERT_EQ(total, tok.tokenize(body).size());
    if (!chunks.empty()) ASSERT_EQ(reconstruct_body(chunks), body) << "trial " << trial;
  }
}

TEST(Chunk, JsonRoundTrip) {
  const DocumentChunk c{"d1", 3, "text here", 2, 17};
  const auto back = chunk_from_json(to_json(c));
  EXPECT_EQ(back.doc_id, "d1");
  EXPECT_EQ(back.chunk_index, 3u);
  EXPECT_EQ(back.byte_offset, 17u);
}

TEST(ChunkIndexTest, FindsByDocAndIndex) {
  std::vector<DocumentChunk> chunks = {{"a", 0, "x", 1, 0}, {"a", 1, "y", 1, 1}};
  const ChunkIndex idx(chunks);
  ASSERT_NE(idx.find("a", 1), nullptr);
  EXPECT_EQ(idx.find("a", 1)->text, "y");
  EXPECT_EQ(idx.find("b", 0), nullptr);
}

}  // namespace
}  // namespace forge::corpus
