#include "forge/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "forge/util/error.hpp"
#include "forge/util/hash.hpp"
#include "forge/util/rng.hpp"
#include "forge/util/text.hpp"

namespace forge::corpus {

namespace fs = std::filesystem;
using util::Json;

std::string_view to_string(Split split) { return split == Split::kTrain ? "train" : "eval"; }

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "eval") return Split::kEval;
  throw Error("unknown split '" + std::string(text) + "'");
}

std::vector<TokenSpan> WhitespaceTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) break;
    const std::size_t begin = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    spans.push_back({begin, i});
  }
  return spans;
}

std::vector<TokenSpan> CharacterTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenSpan> spans;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto byte = static_cast<unsigned char>(text[i]);
    const bool continuation = (byte & 0xC0) == 0x80;
    if (continuation && !spans.empty()) {
      spans.back().end = i + 1;
    } else {
      spans.push_back({i, i + 1});
    }
  }
  return spans;
}

std::unique_ptr<Tokenizer> make_tokenizer(std::string_view name) {
  if (name == "whitespace") return std::make_unique<WhitespaceTokenizer>();
  if (name == "character") return std::make_unique<CharacterTokenizer>();
  throw PreconditionError("unknown tokenizer '" + std::string(name) + "'");
}

namespace {

struct RawDocument {
  std::string doc_id;
  std::string title;
  std::string body;
};

std::vector<RawDocument> read_topic(const fs::path& root, const std::string& topic) {
  std::vector<RawDocument> docs;
  const fs::path records = root / (topic + ".jsonl");
  const fs::path folder = root / topic;
  if (fs::is_regular_file(records)) {
    for (const auto& j : util::read_jsonl(records)) {
      docs.push_back({j.at("doc_id").get<std::string>(), j.value("title", std::string{}),
                      j.value("text", std::string{})});
    }
  } else if (fs::is_directory(folder)) {
    for (const auto& entry : fs::directory_iterator(folder)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
      const auto stem = entry.path().stem().string();
      docs.push_back({stem, stem, util::read_text(entry.path())});
    }
  }
  std::sort(docs.begin(), docs.end(),
            [](const RawDocument& a, const RawDocument& b) { return a.doc_id < b.doc_id; });
  return docs;
}

}  // namespace

IngestResult ingest_corpus(const fs::path& root, const IngestOptions& options) {
  if (options.topics.empty()) throw PreconditionError("no topics configured");
  if (!fs::is_directory(root)) {
    throw PreconditionError("corpus source '" + root.string() + "' is not a readable directory");
  }

  IngestResult result;
  std::set<std::string> seen_ids;
  std::set<std::string> seen_topics;
  for (const auto& topic : options.topics) {
    if (!seen_topics.insert(topic).second) {
      throw PreconditionError("topic '" + topic + "' configured twice");
    }
    std::vector<RawDocument> usable;
    for (auto& doc : read_topic(root, topic)) {
      if (!seen_ids.insert(doc.doc_id).second) {
        throw Error("duplicate doc_id '" + doc.doc_id + "' in corpus");
      }
      if (util::trim(doc.body).empty()) {
        ++result.skipped_empty;
        continue;
      }
      usable.push_back(std::move(doc));
    }

    const std::size_t wanted = options.train_per_topic + options.eval_per_topic;
    if (usable.size() < wanted) {
      throw Error("topic '" + topic + "' has " + std::to_string(usable.size()) +
                  " usable documents, needs " + std::to_string(wanted) + " (short by " +
                  std::to_string(wanted - usable.size()) + ")");
    }

    // Seeding per topic keeps a topic's sample independent of its position
    // in the topic list.
    util::DeterministicRng rng(util::mix64(options.seed ^ util::fnv1a64(topic)));
    rng.shuffle(usable);

    std::vector<SourceDocument> train;
    std::vector<SourceDocument> eval;
    for (std::size_t i = 0; i < wanted; ++i) {
      const Split split = i < options.train_per_topic ? Split::kTrain : Split::kEval;
      auto& bucket = split == Split::kTrain ? train : eval;
      bucket.push_back({std::move(usable[i].doc_id), topic, std::move(usable[i].title),
                        std::move(usable[i].body), split});
    }
    const auto by_id = [](const SourceDocument& a, const SourceDocument& b) {
      return a.doc_id < b.doc_id;
    };
    std::sort(train.begin(), train.end(), by_id);
    std::sort(eval.begin(), eval.end(), by_id);
    std::move(train.begin(), train.end(), std::back_inserter(result.documents));
    std::move(eval.begin(), eval.end(), std::back_inserter(result.documents));
  }
  return result;
}

std::vector<DocumentChunk> chunk_document(const SourceDocument& doc, std::size_t max_tokens,
                                          const Tokenizer& tokenizer) {
  if (max_tokens == 0) throw PreconditionError("chunk length must be at least 1");
  const auto spans = tokenizer.tokenize(doc.body);
  std::vector<DocumentChunk> chunks;
  for (std::size_t first = 0; first < spans.size(); first += max_tokens) {
    const std::size_t last = std::min(first + max_tokens, spans.size());
    const std::size_t begin = first == 0 ? 0 : spans[first].begin;
    const std::size_t end = last == spans.size() ? doc.body.size() : spans[last].begin;
    chunks.push_back({doc.doc_id, chunks.size(), doc.body.substr(begin, end - begin),
                      last - first, begin});
  }
  return chunks;
}

std::vector<DocumentChunk> chunk_document(const SourceDocument& doc, std::size_t max_tokens) {
  return chunk_document(doc, max_tokens, WhitespaceTokenizer{});
}

std::string reconstruct_body(std::span<const DocumentChunk> chunks) {
  std::string body;
  for (const auto& c : chunks) body += c.text;
  return body;
}

Json to_json(const SourceDocument& doc) {
  return Json{{"doc_id", doc.doc_id},
              {"topic", doc.topic},
              {"title", doc.title},
              {"text", doc.body},
              {"split", to_string(doc.split)}};
}

SourceDocument document_from_json(const Json& j) {
  return {j.at("doc_id").get<std::string>(), j.at("topic").get<std::string>(),
          j.value("title", std::string{}), j.at("text").get<std::string>(),
          parse_split(j.at("split").get<std::string>())};
}

Json to_json(const DocumentChunk& chunk) {
  return Json{{"doc_id", chunk.doc_id},
              {"chunk_index", chunk.chunk_index},
              {"text", chunk.text},
              {"token_count", chunk.token_count},
              {"byte_offset", chunk.byte_offset}};
}

DocumentChunk chunk_from_json(const Json& j) {
  return {j.at("doc_id").get<std::string>(), j.at("chunk_index").get<std::size_t>(),
          j.at("text").get<std::string>(), j.at("token_count").get<std::size_t>(),
          j.value("byte_offset", std::size_t{0})};
}

}  // namespace forge::corpus

namespace forge::corpus {

ChunkIndex::ChunkIndex(std::span<const DocumentChunk> chunks) {
  for (const auto& c : chunks) add(c);
}

void ChunkIndex::add(const DocumentChunk& chunk) {
  chunks_.insert_or_assign({chunk.doc_id, chunk.chunk_index}, chunk);
}

const DocumentChunk* ChunkIndex::find(const std::string& doc_id, std::size_t chunk_index) const {
  const auto it = chunks_.find({doc_id, chunk_index});
  return it == chunks_.end() ? nullptr : &it->second;
}

}  // namespace forge::corpus
