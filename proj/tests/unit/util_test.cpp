#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "forge/util/hash.hpp"
#include "forge/util/io.hpp"
#include "forge/util/parallel.hpp"
#include "forge/util/rng.hpp"
#include "forge/util/text.hpp"
#include "test_support.hpp"

namespace forge {
namespace {

TEST(Hash, Sha256KnownVectors) {
  EXPECT_EQ(util::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(util::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Hash, Fnv1aKnownVector) {
  EXPECT_EQ(util::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(util::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Rng, SameSeedSameSequence) {
  util::DeterministicRng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Rng, BelowStaysInRange) {
  util::DeterministicRng rng(1);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(rng.below(7), 7u);
}

TEST(Rng, SampleIndicesAreSortedDistinctSubset) {
  util::DeterministicRng rng(3);
  for (std::size_t n = 0; n < 40; ++n) {
    for (std::size_t k = 0; k <= n + 2; ++k) {
      const auto s = rng.sample_indices(n, k);
      EXPECT_EQ(s.size(), std::min(n, k));
      EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
      EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), s.size());
      for (auto i : s) EXPECT_LT(i, n);
    }
  }
}

TEST(Rng, ShuffleIsPermutation) {
  util::DeterministicRng rng(9);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto w = v;
  rng.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Text, WordTokensLowercaseAlnumRuns) {
  EXPECT_EQ(util::word_tokens("Hello, World! 42x"), (std::vector<std::string>{"hello", "world", "42x"}));
  EXPECT_TRUE(util::word_tokens(" ... ").empty());
}

TEST(Text, SplitSentences) {
  const auto s = util::split_sentences("One two. Three? Four! Five 3.5 six");
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0], "One two.");
  EXPECT_EQ(s[3], "Five 3.5 six");
}

TEST(Text, TrimAndCollapse) {
  EXPECT_EQ(util::trim("  a b \n"), "a b");
  EXPECT_EQ(util::collapse_whitespace(" a \t\n b  "), "a b");
  EXPECT_TRUE(util::contains_icase("See THE Document here", "the document"));
  EXPECT_EQ(util::replace_all("aXbXc", "X", "--"), "a--b--c");
}

TEST(Io, AtomicWriteAndJsonlRoundTrip) {
  testing::TempDir dir;
  const auto p = dir / "sub.jsonl";
  std::vector<util::Json> records = {{{"a", 1}}, {{"b", "two\nlines"}}};
  util::write_jsonl_atomic(p, records);
  EXPECT_FALSE(std::filesystem::exists(p.string() + ".tmp"));
  EXPECT_EQ(util::read_jsonl(p), records);
}

TEST(Io, ReadMissingFileThrows) {
  EXPECT_THROW(util::read_text("/nonexistent/forge/file"), Error);
}

TEST(Parallel, RunsEveryIndexAndRethrows) {
  std::vector<int> hits(100, 0);
  util::parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 100);
  EXPECT_THROW(util::parallel_for(10, 3,
                                  [](std::size_t i) {
                                    if (i == 5) throw PreconditionError("boom");
                                  }),
               PreconditionError);
}

}  // namespace
}  // namespace forge
