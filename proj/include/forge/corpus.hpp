#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/util/io.hpp"

namespace forge::corpus {

enum class Split { kTrain, kEval };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct SourceDocument {
  std::string doc_id;
  std::string topic;
  std::string title;
  std::string body;
  Split split = Split::kTrain;
};

/// A contiguous slice of a document body. Chunk i covers the bytes from the
/// first token of chunk i up to the first token of chunk i+1 (the first chunk
/// also owns any leading whitespace, the last any trailing), so concatenating
/// chunk texts in index order reproduces the body byte for byte.
struct DocumentChunk {
  std::string doc_id;
  std::size_t chunk_index = 0;
  std::string text;
  std::size_t token_count = 0;
  std::size_t byte_offset = 0;
};

/// Half-open byte range of a token inside the source text.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Decides what one unit of the chunk length means.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<TokenSpan> tokenize(std::string_view text) const = 0;
  virtual std::string_view name() const = 0;
};

/// Maximal runs of non-whitespace bytes.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::vector<TokenSpan> tokenize(std::string_view text) const override;
  std::string_view name() const override { return "whitespace"; }
};

/// One token per UTF-8 code point, whitespace included.
class CharacterTokenizer final : public Tokenizer {
 public:
  std::vector<TokenSpan> tokenize(std::string_view text) const override;
  std::string_view name() const override { return "character"; }
};

/// "whitespace" or "character"; throws PreconditionError otherwise.
std::unique_ptr<Tokenizer> make_tokenizer(std::string_view name);

struct IngestOptions {
  std::vector<std::string> topics;
  std::size_t train_per_topic = 100;
  std::size_t eval_per_topic = 10;
  std::uint64_t seed = 0;
};

struct IngestResult {
  std::vector<SourceDocument> documents;
  std::size_t skipped_empty = 0;
};

/// Reads `<root>/<topic>.jsonl` (records {doc_id, title, text}) or, failing
/// that, `<root>/<topic>/<doc_id>.txt`, then draws a seeded train/eval sample
/// per topic. Documents are returned grouped by topic (configured order),
/// train before eval, each group sorted by doc_id.
IngestResult ingest_corpus(const std::filesystem::path& root, const IngestOptions& options);

/// Splits a document into non-overlapping chunks of at most max_tokens
/// tokens; every chunk but the last holds exactly max_tokens.
std::vector<DocumentChunk> chunk_document(const SourceDocument& doc, std::size_t max_tokens,
                                          const Tokenizer& tokenizer);
std::vector<DocumentChunk> chunk_document(const SourceDocument& doc, std::size_t max_tokens);

std::string reconstruct_body(std::span<const DocumentChunk> chunks);

util::Json to_json(const SourceDocument& doc);
SourceDocument document_from_json(const util::Json& j);
util::Json to_json(const DocumentChunk& chunk);
DocumentChunk chunk_from_json(const util::Json& j);

}  // namespace forge::corpus

namespace forge::corpus {

/// Lookup of chunk text by (doc_id, chunk_index).
class ChunkIndex {
 public:
  ChunkIndex() = default;
  explicit ChunkIndex(std::span<const DocumentChunk> chunks);

  void add(const DocumentChunk& chunk);
  const DocumentChunk* find(const std::string& doc_id, std::size_t chunk_index) const;
  std::size_t size() const noexcept { return chunks_.size(); }

 private:
  std::map<std::pair<std::string, std::size_t>, DocumentChunk> chunks_;
};

}  // namespace forge::corpus
