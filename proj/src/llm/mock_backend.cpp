#include "forge/llm/mock_backend.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "forge/prompts.hpp"
#include "forge/util/error.hpp"
#include "forge/util/hash.hpp"
#include "forge/util/io.hpp"
#include "forge/util/text.hpp"

namespace forge::llm {

std::string prompt_fingerprint(std::string_view system, std::string_view user) {
  std::string joined(system);
  joined += '\x1e';
  joined += user;
  return util::sha256_hex(joined);
}

MockScript load_mock_script(const std::filesystem::path& path) {
  MockScript script;
  for (const auto& j : util::read_jsonl(path)) {
    std::string fp = j.contains("fingerprint")
                         ? j.at("fingerprint").get<std::string>()
                         : prompt_fingerprint(j.value("system", std::string{}),
                                              j.at("user").get<std::string>());
    auto outputs = j.at("outputs").get<std::vector<std::string>>();
    if (outputs.empty()) throw Error("mock script entry " + fp + " has no outputs");
    script.emplace(std::move(fp), std::move(outputs));
  }
  return script;
}

MockBackend::MockBackend(MockScript script, FallbackFn fallback, std::string id)
    : script_(std::move(script)),
      fallback_(fallback ? std::move(fallback) : demo_model()),
      id_(std::move(id)) {}

std::vector<std::string> MockBackend::complete(const GenerationRequest& request) {
  std::vector<std::string> texts;
  texts.reserve(static_cast<std::size_t>(request.n_samples));
  const auto it = script_.find(prompt_fingerprint(request.system_prompt, request.user_prompt));
  for (int i = 0; i < request.n_samples; ++i) {
    if (it != script_.end()) {
      texts.push_back(it->second[static_cast<std::size_t>(i) % it->second.size()]);
    } else {
      texts.push_back(fallback_(request, i));
    }
  }
  return texts;
}

std::shared_ptr<MockBackend> mock_backend(MockScript script, FallbackFn fallback) {
  return std::make_shared<MockBackend>(std::move(script), std::move(fallback));
}

namespace {

constexpr std::array<std::string_view, 24> kFillerWords = {
    "reportedly", "century",  "festival", "northern", "society",  "invented",
    "orbit",      "painting", "treaty",   "protein",  "currency", "album",
    "volcano",    "theory",   "empire",   "harbor",   "symphony", "vaccine",
    "telescope",  "dynasty",  "glacier",  "novel",    "parliament", "molecule"};

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end());
  const std::set<std::string> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& w : sa) inter += sb.count(w);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

// Index of the sentence sharing the most words with `query`; lowest index on ties.
std::size_t best_sentence(const std::vector<std::string>& sentences, std::string_view query) {
  const auto q = util::word_tokens(query);
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const double s = jaccard(util::word_tokens(sentences[i]), q);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

std::vector<std::string> content_words(std::string_view text) {
  std::vector<std::string> out;
  for (auto& w : util::word_tokens(text)) {
    if (w.size() >= 4) out.push_back(std::move(w));
  }
  return out;
}

std::string join_words(const std::vector<std::string>& words, std::size_t from, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count && !words.empty(); ++i) {
    if (!out.empty()) out += ' ';
    out += words[(from + i) % words.size()];
  }
  return out;
}

std::string drop_word(std::string_view sentence, std::uint64_t h) {
  auto words = util::word_tokens(sentence);
  if (words.size() > 3) words.erase(words.begin() + static_cast<std::ptrdiff_t>(h % words.size()));
  std::string out = join_words(words, 0, words.size());
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out + ".";
}

std::string hallucinate(std::string_view question, std::uint64_t h) {
  const auto q = content_words(question);
  std::string out = "It is " + std::string(kFillerWords[h % kFillerWords.size()]);
  for (int i = 0; i < 5; ++i) {
    h = util::mix64(h);
    out += ' ';
    out += kFillerWords[h % kFillerWords.size()];
  }
  if (!q.empty()) out += " near " + q[h % q.size()];
  return out + ".";
}

class DemoModel {
 public:
  explicit DemoModel(DemoModelOptions options) {
    for (const auto& text : options.knowledge) {
      for (auto& s : util::split_sentences(text)) memory_.push_back(std::move(s));
    }
  }

  std::string operator()(const GenerationRequest& req, int sample_index) const {
    const bool greedy = req.decoding == Decoding::kGreedy;
    std::uint64_t h = util::fnv1a64(req.system_prompt);
    h = util::mix64(h ^ util::fnv1a64(req.user_prompt));
    h = util::mix64(h ^ util::fnv1a64(req.request_tag));
    h = util::mix64(h + static_cast<std::uint64_t>(sample_index) + (greedy ? 0x51ULL : 0x7bULL));

    const std::string_view user = req.user_prompt;
    if (user.find(prompts::kResponseALabel) != std::string_view::npos) return judge(user);
    if (user.ends_with(prompts::kProposedQuestionLabel)) return propose_question(user, h);
    const auto question = prompts::extract_field(user, prompts::kQuestionLabel);
    if (!question.empty()) {
      const auto document = prompts::extract_field(user, prompts::kDocumentLabel);
      return document.empty() ? closed_book(question, greedy, h)
                              : open_book(question, document, greedy, h);
    }
    return "Noted: " + join_words(util::word_tokens(user), h % 7, 8) + ".";
  }

 private:
  static std::string judge(std::string_view user) {
    const auto doc = util::word_tokens(prompts::extract_field(user, prompts::kDocumentLabel));
    const double a = jaccard(util::word_tokens(prompts::extract_field(user, prompts::kResponseALabel)), doc);
    const double b = jaccard(util::word_tokens(prompts::extract_field(user, prompts::kResponseBLabel)), doc);
    if (a > b) return "A";
    if (b > a) return "B";
    return "tie";
  }

  static std::string propose_question(std::string_view user, std::uint64_t h) {
    std::string topic;
    if (const auto at = user.find("topic of "); at != std::string_view::npos) {
      const auto start = at + 9;
      topic = std::string(user.substr(start, user.find(',', start) - start));
    }
    const auto sentences = util::split_sentences(prompts::extract_field(user, prompts::kDocumentLabel));
    if (sentences.empty()) return "In " + topic + ", what is the main subject?";
    const auto words = content_words(sentences[h % sentences.size()]);
    const auto offset = (h >> 8) % std::max<std::size_t>(1, words.size());
    switch ((h >> 20) % 10) {
      case 0:
        return "What does the document say about " + join_words(words, offset, 2) + "?";
      case 1:
        return "Who is " + join_words(words, offset, 1) + "? And what about " +
               join_words(words, offset + 1, 1) + "?";
      default:
        return "In " + topic + ", what is known about " + join_words(words, offset, 3) + "?";
    }
  }

  static std::string open_book(std::string_view question, std::string_view document, bool greedy,
                               std::uint64_t h) {
    const auto sentences = util::split_sentences(document);
    if (sentences.empty()) return "Unknown.";
    const auto best = best_sentence(sentences, question);
    if (greedy) return sentences[best];
    // Some questions leave the model unsure even with the document at hand.
    const bool unsure = util::fnv1a64(question) % 5 == 0;
    const auto roll = (h >> 12) % 10;
    if (unsure ? roll < 2 : roll < 7) return sentences[best];
    if (unsure ? roll < 3 : roll < 9) return drop_word(sentences[best], h >> 24);
    return unsure ? hallucinate(question, h) : sentences[(h >> 32) % sentences.size()];
  }

  std::string closed_book(std::string_view question, bool greedy, std::uint64_t h) const {
    if (!memory_.empty()) {
      const auto best = best_sentence(memory_, question);
      const auto overlap = jaccard(util::word_tokens(memory_[best]), content_words(question));
      if (overlap > 0.1) {
        const auto roll = (h >> 12) % 10;
        if (greedy || roll < 7) return memory_[best];
        if (roll < 9) return drop_word(memory_[best], h >> 24);
      }
    }
    return hallucinate(question, greedy ? util::fnv1a64(question) : h);
  }

  std::vector<std::string> memory_;
};

}  // namespace

FallbackFn demo_model(DemoModelOptions options) {
  return [model = std::make_shared<const DemoModel>(std::move(options))](
             const GenerationRequest& req, int i) { return (*model)(req, i); };
}

}  // namespace forge::llm
