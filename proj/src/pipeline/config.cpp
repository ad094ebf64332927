#include "forge/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "forge/util/error.hpp"

namespace forge::config {

namespace fs = std::filesystem;
using util::Json;

namespace {

const std::set<std::string> kTopLevel = {"work_dir", "seed",   "corpus", "instructions", "sft",
                                         "preferences", "filter", "dpo", "judge", "backends"};
const std::map<std::string, std::set<std::string>> kSectionKeys = {
    {"corpus", {"root", "topics", "train_per_topic", "eval_per_topic", "tokenizer"}},
    {"instructions", {"per_document", "chunk_tokens", "max_attempts", "examples"}},
    {"sft", {"rc_fraction", "examples"}},
    {"preferences", {"k", "temperature", "greedy_without_context", "ablation"}},
    {"filter", {"tau_L", "tau_K", "sweep", "k_sweep", "sentence_level", "known_sample"}},
    {"dpo", {"beta", "steps", "learning_rate"}},
    {"judge", {"responses_a", "responses_b"}},
};
const std::set<std::string> kBackendKeys = {"kind",        "base_url",     "model",  "api_key_env",
                                            "max_parallel", "max_retries", "script", "knowledge"};
const std::set<std::string> kScorerKeys = {"kind", "base_url", "model", "max_retries", "max_parallel"};

class Reader {
 public:
  Reader(const fs::path& base_dir, std::vector<std::string>& problems) : base_(base_dir), problems_(problems) {}

  void problem(std::string text) { problems_.push_back(std::move(text)); }

  const Json* field(const Json& obj, const std::string& key) const {
    if (!obj.is_object()) return nullptr;
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
  }

  void count(const Json& obj, const std::string& where, const std::string& key, std::size_t& out,
             std::size_t lo, std::size_t hi) {
    const auto* v = field(obj, key);
    if (!v) return;
    const auto name = where + key;
    if (!v->is_number_integer() && !v->is_number_unsigned()) {
      problem(fmt::format("{}: expected an integer", name));
      return;
    }
    const auto raw = v->get<long long>();
    if (raw < static_cast<long long>(lo) || static_cast<unsigned long long>(raw) > hi) {
      problem(fmt::format("{} = {} is out of range [{}, {}]", name, raw, lo, hi));
      return;
    }
    out = static_cast<std::size_t>(raw);
  }

  void integer(const Json& obj, const std::string& where, const std::string& key, int& out, int lo, int hi) {
    std::size_t tmp = static_cast<std::size_t>(std::max(out, 0));
    const auto before = problems_.size();
    count(obj, where, key, tmp, static_cast<std::size_t>(lo), static_cast<std::size_t>(hi));
    if (problems_.size() == before) out = static_cast<int>(tmp);
  }

  void real(const Json& obj, const std::string& where, const std::string& key, double& out, double lo,
            double hi, bool lo_open = false) {
    const auto* v = field(obj, key);
    if (!v) return;
    const auto name = where + key;
    if (!v->is_number()) {
      problem(fmt::format("{}: expected a number", name));
      return;
    }
    const double x = v->get<double>();
    const bool ok = std::isfinite(x) && (lo_open ? x > lo : x >= lo) && x <= hi;
    if (!ok) {
      problem(fmt::format("{} = {} is out of range {}{}, {}]", name, x, lo_open ? "(" : "[", lo, hi));
      return;
    }
    out = x;
  }

  void boolean(const Json& obj, const std::string& where, const std::string& key, bool& out) {
    const auto* v = field(obj, key);
    if (!v) return;
    if (!v->is_boolean()) {
      problem(fmt::format("{}{}: expected true or false", where, key));
      return;
    }
    out = v->get<bool>();
  }

  void string(const Json& obj, const std::string& where, const std::string& key, std::string& out) {
    const auto* v = field(obj, key);
    if (!v) return;
    if (!v->is_string()) {
      problem(fmt::format("{}{}: expected a string", where, key));
      return;
    }
    out = v->get<std::string>();
  }

  std::optional<fs::path> path(const Json& obj, const std::string& where, const std::string& key,
                               bool must_exist = true) {
    std::string raw;
    const auto before = problems_.size();
    string(obj, where, key, raw);
    if (problems_.size() != before || raw.empty()) return std::nullopt;
    auto p = resolve(raw);
    if (must_exist && !fs::exists(p)) {
      problem(fmt::format("{}{}: path '{}' does not exist", where, key, p.string()));
    }
    return p;
  }

  fs::path resolve(const fs::path& raw) const {
    return (raw.is_absolute() ? raw : base_ / raw).lexically_normal();
  }

  void unknown_keys(const Json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) {
      problem(fmt::format("{}: expected an object", where.empty() ? "config" : where.substr(0, where.size() - 1)));
      return;
    }
    for (const auto& [k, _] : obj.items()) {
      if (!allowed.count(k)) problem(fmt::format("{}{}: unknown setting", where, k));
    }
  }

 private:
  fs::path base_;
  std::vector<std::string>& problems_;
};

Json parse_override_value(const std::string& raw) {
  try {
    return Json::parse(raw);
  } catch (const Json::parse_error&) {
    return Json(raw);
  }
}

Json default_backends() {
  Json b = Json::object();
  for (const auto& role : kGenerationRoles) b[role] = {{"kind", "mock"}};
  b[kScorerRole] = {{"kind", "lexical"}};
  return b;
}

void apply_overrides(Json& doc, const Overrides& o) {
  if (!doc.is_object()) return;
  if (o.seed) doc["seed"] = *o.seed;
  if (o.tau_K) doc["filter"]["tau_K"] = *o.tau_K;
  if (o.k) doc["preferences"]["k"] = *o.k;
  if (o.corpus_root) doc["corpus"]["root"] = fs::absolute(*o.corpus_root).lexically_normal().string();
  if (o.work_dir) doc["work_dir"] = fs::absolute(*o.work_dir).lexically_normal().string();
  if (!o.backend.empty() && !doc.contains("backends")) doc["backends"] = default_backends();
  for (const auto& [dotted, raw] : o.backend) {
    const auto dot = dotted.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == dotted.size()) {
      doc["backends"]["--backend." + dotted] = raw;  // reported as an unknown role
      continue;
    }
    const auto role = dotted.substr(0, dot);
    const auto key = dotted.substr(dot + 1);
    Json value = parse_override_value(raw);
    if ((key == "script" || key == "knowledge") && value.is_string()) {
      value = fs::absolute(value.get<std::string>()).lexically_normal().string();
    }
    doc["backends"][role][key] = value;
  }
}

BackendBinding read_backend(Reader& r, const Json& obj, const std::string& role) {
  const auto where = "backends." + role + ".";
  BackendBinding b;
  r.unknown_keys(obj, where, kBackendKeys);
  r.string(obj, where, "kind", b.kind);
  r.string(obj, where, "base_url", b.base_url);
  r.string(obj, where, "model", b.model);
  r.string(obj, where, "api_key_env", b.api_key_env);
  r.count(obj, where, "max_parallel", b.max_parallel, 1, 256);
  r.integer(obj, where, "max_retries", b.max_retries, 1, 20);
  b.script = r.path(obj, where, "script");
  b.knowledge = r.path(obj, where, "knowledge");
  if (b.kind == "chat") {
    if (b.base_url.empty()) r.problem(where + "base_url: required for a chat backend");
    if (b.model.empty()) r.problem(where + "model: required for a chat backend");
  } else if (b.kind != "mock") {
    r.problem(fmt::format("{}kind: '{}' is not one of mock, chat", where, b.kind));
  }
  return b;
}

ScorerBinding read_scorer(Reader& r, const Json& obj) {
  const std::string where = "backends.scorer.";
  ScorerBinding s;
  r.unknown_keys(obj, where, kScorerKeys);
  r.string(obj, where, "kind", s.kind);
  r.string(obj, where, "base_url", s.base_url);
  r.string(obj, where, "model", s.model);
  r.integer(obj, where, "max_retries", s.max_retries, 1, 20);
  r.count(obj, where, "max_parallel", s.max_parallel, 1, 256);
  if (s.kind == "nli") {
    if (s.base_url.empty()) r.problem(where + "base_url: required for an nli scorer");
  } else if (s.kind != "lexical") {
    r.problem(fmt::format("{}kind: '{}' is not one of lexical, nli", where, s.kind));
  }
  return s;
}

std::vector<std::string> discover_topics(const fs::path& root) {
  std::set<std::string> topics;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      topics.insert(entry.path().stem().string());
    } else if (entry.is_directory()) {
      topics.insert(entry.path().filename().string());
    }
  }
  return {topics.begin(), topics.end()};
}

}  // namespace

PipelineConfig validate_config(const Json& input, const fs::path& base_dir, const Overrides& overrides) {
  std::vector<std::string> problems;
  Json doc = input.is_null() ? Json::object() : input;
  apply_overrides(doc, overrides);

  PipelineConfig c;
  c.base_dir = fs::absolute(base_dir).lexically_normal();
  Reader r(c.base_dir, problems);
  if (!doc.is_object()) throw ConfigError({"config: top level must be an object"});
  r.unknown_keys(doc, "", kTopLevel);

  if (const auto* seed = r.field(doc, "seed")) {
    if (seed->is_number_unsigned() || (seed->is_number_integer() && seed->get<long long>() >= 0)) {
      c.seed = seed->get<std::uint64_t>();
    } else {
      r.problem("seed: expected a non-negative integer");
    }
  }
  std::string work_dir;
  r.string(doc, "", "work_dir", work_dir);
  c.work_dir = r.resolve(work_dir.empty() ? "forge-out" : work_dir);

  const Json empty = Json::object();
  auto section = [&](const char* name) -> const Json& {
    const auto* s = r.field(doc, name);
    if (!s) return empty;
    r.unknown_keys(*s, std::string(name) + ".", kSectionKeys.at(name));
    return s->is_object() ? *s : empty;
  };

  const auto& corpus = section("corpus");
  if (auto root = r.path(corpus, "corpus.", "root")) {
    c.corpus_root = *root;
  } else if (!r.field(corpus, "root")) {
    r.problem("corpus.root: required (set it in the config or pass --corpus)");
  }
  if (const auto* topics = r.field(corpus, "topics")) {
    if (!topics->is_array() || !std::all_of(topics->begin(), topics->end(), [](const Json& t) {
          return t.is_string() && !t.get<std::string>().empty();
        })) {
      r.problem("corpus.topics: expected a list of non-empty strings");
    } else {
      c.topics = topics->get<std::vector<std::string>>();
    }
  }
  r.count(corpus, "corpus.", "train_per_topic", c.train_per_topic, 0, 1'000'000);
  r.count(corpus, "corpus.", "eval_per_topic", c.eval_per_topic, 0, 1'000'000);
  r.string(corpus, "corpus.", "tokenizer", c.tokenizer);
  if (c.tokenizer != "whitespace" && c.tokenizer != "character") {
    r.problem(fmt::format("corpus.tokenizer: '{}' is not one of whitespace, character", c.tokenizer));
  }
  if (c.topics.empty() && !c.corpus_root.empty() && fs::is_directory(c.corpus_root)) {
    c.topics = discover_topics(c.corpus_root);
    if (c.topics.empty()) r.problem("corpus.topics: none configured and none found under corpus.root");
  }

  const auto& instr = section("instructions");
  r.count(instr, "instructions.", "per_document", c.questions_per_document, 1, 1000);
  r.count(instr, "instructions.", "chunk_tokens", c.chunk_tokens, 1, 1'000'000);
  r.integer(instr, "instructions.", "max_attempts", c.max_attempts, 1, 100);
  c.question_examples = r.path(instr, "instructions.", "examples");

  const auto& sft = section("sft");
  r.real(sft, "sft.", "rc_fraction", c.rc_fraction, 0.0, 1.0);
  c.answer_examples = r.path(sft, "sft.", "examples");

  const auto& pref = section("preferences");
  r.count(pref, "preferences.", "k", c.k, 1, 1000);
  r.real(pref, "preferences.", "temperature", c.temperature, 0.0, 5.0);
  r.boolean(pref, "preferences.", "greedy_without_context", c.greedy_without_context);
  r.boolean(pref, "preferences.", "ablation", c.ablation);
  if (c.ablation && c.k < 2) r.problem("preferences.k: the ablation needs k >= 2");

  const auto& filt = section("filter");
  r.real(filt, "filter.", "tau_L", c.tau_L, 0.0, 1.0);
  r.real(filt, "filter.", "tau_K", c.tau_K, 0.0, 1.0);
  if (const auto* sweep = r.field(filt, "sweep")) {
    if (!sweep->is_array() || sweep->empty() ||
        !std::all_of(sweep->begin(), sweep->end(), [](const Json& v) {
          return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0;
        })) {
      r.problem("filter.sweep: expected a non-empty list of numbers in [0, 1]");
    } else {
      c.sweep = sweep->get<std::vector<double>>();
      if (!std::is_sorted(c.sweep.begin(), c.sweep.end())) r.problem("filter.sweep: values must be ascending");
    }
  }
  if (const auto* ks = r.field(filt, "k_sweep")) {
    if (!ks->is_array() || !std::all_of(ks->begin(), ks->end(), [](const Json& v) {
          return v.is_number_integer() && v.get<long long>() >= 1;
        })) {
      r.problem("filter.k_sweep: expected a list of positive integers");
    } else {
      c.k_sweep = ks->get<std::vector<std::size_t>>();
    }
  }
  r.boolean(filt, "filter.", "sentence_level", c.sentence_level);
  r.count(filt, "filter.", "known_sample", c.known_sample, 0, 1'000'000);

  const auto& dpo = section("dpo");
  r.real(dpo, "dpo.", "beta", c.beta, 0.0, 1e6, true);
  r.count(dpo, "dpo.", "steps", c.steps, 1, 1'000'000);
  r.real(dpo, "dpo.", "learning_rate", c.learning_rate, 0.0, 1e6);

  const auto& judge = section("judge");
  c.responses_a = r.path(judge, "judge.", "responses_a");
  c.responses_b = r.path(judge, "judge.", "responses_b");
  if (c.responses_a.has_value() != c.responses_b.has_value()) {
    r.problem("judge: responses_a and responses_b must be given together");
  }

  const Json backends = doc.contains("backends") ? doc["backends"] : default_backends();
  if (!backends.is_object()) {
    r.problem("backends: expected an object");
  } else {
    std::set<std::string> known(kGenerationRoles.begin(), kGenerationRoles.end());
    known.insert(kScorerRole);
    known.insert(kSftModelRole);
    for (const auto& [role, _] : backends.items()) {
      if (!known.count(role)) r.problem(fmt::format("backends.{}: unknown role", role));
    }
    for (const auto& role : kGenerationRoles) {
      if (const auto* b = r.field(backends, role)) {
        c.backends[role] = read_backend(r, *b, role);
      } else {
        r.problem(fmt::format("backends.{}: no backend bound for this role", role));
      }
    }
    if (const auto* b = r.field(backends, kSftModelRole)) {
      c.backends[kSftModelRole] = read_backend(r, *b, kSftModelRole);
    } else if (c.backends.count("target_model")) {
      c.backends[kSftModelRole] = c.backends["target_model"];
    }
    if (const auto* s = r.field(backends, kScorerRole)) {
      c.scorer = read_scorer(r, *s);
    } else {
      r.problem("backends.scorer: no backend bound for this role");
    }
  }

  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

PipelineConfig validate_config(const fs::path& path, const Overrides& overrides) {
  if (!fs::exists(path)) throw ConfigError({fmt::format("config file '{}' does not exist", path.string())});
  const auto text = util::read_text(path);
  Json doc = Json::object();
  if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
    try {
      doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ConfigError({fmt::format("{}: not valid JSON ({})", path.string(), e.what())});
    }
  }
  return validate_config(doc, fs::absolute(path).parent_path(), overrides);
}

std::vector<std::string> extract_backend_overrides(const std::vector<std::string>& args,
                                                   std::map<std::string, std::string>& out) {
  static const std::string kPrefix = "--backend.";
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a.rfind(kPrefix, 0) != 0) {
      rest.push_back(a);
      continue;
    }
    const auto body = a.substr(kPrefix.size());
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out[body.substr(0, eq)] = body.substr(eq + 1);
    } else if (i + 1 < args.size()) {
      out[body] = args[++i];
    } else {
      throw ConfigError({fmt::format("{}: missing value", a)});
    }
  }
  return rest;
}

Json PipelineConfig::section_fingerprint(const std::string& stage) const {
  auto rel = [&](const std::optional<fs::path>& p) -> Json {
    if (!p) return nullptr;
    return p->lexically_relative(base_dir).generic_string();
  };
  auto backend = [&](const std::string& role) {
    const auto& b = backends.at(role);
    Json j{{"kind", b.kind}, {"base_url", b.base_url}, {"model", b.model}};
    j["script"] = rel(b.script);
    j["knowledge"] = rel(b.knowledge);
    return j;
  };
  auto scorer_json = [&] {
    return Json{{"kind", scorer.kind}, {"base_url", scorer.base_url}, {"model", scorer.model},
                {"sentence_level", sentence_level}};
  };
  if (stage == "ingest") {
    return Json{{"seed", seed},
                {"root", rel(corpus_root)},
                {"topics", topics},
                {"train_per_topic", train_per_topic},
                {"eval_per_topic", eval_per_topic},
                {"tokenizer", tokenizer},
                {"chunk_tokens", chunk_tokens}};
  }
  if (stage == "gen-instructions") {
    return Json{{"per_document", questions_per_document},
                {"max_attempts", max_attempts},
                {"temperature", temperature},
                {"examples", rel(question_examples)},
                {"backend", backend("instruction_generator")}};
  }
  if (stage == "build-sft") {
    return Json{{"seed", seed},
                {"rc_fraction", rc_fraction},
                {"examples", rel(answer_examples)},
                {"target_model", backend("target_model")},
                {"rc_teacher", backend("rc_teacher")}};
  }
  if (stage == "build-preferences") {
    return Json{{"k", k},
                {"temperature", temperature},
                {"greedy_without_context", greedy_without_context},
                {"ablation", ablation},
                {"backend", backend(kSftModelRole)}};
  }
  if (stage == "filter") {
    return Json{{"seed", seed},       {"tau_L", tau_L},         {"tau_K", tau_K},
                {"ablation", ablation}, {"known_sample", known_sample}, {"scorer", scorer_json()}};
  }
  if (stage == "sweep") {
    return Json{{"tau_L", tau_L}, {"sweep", sweep}, {"k_sweep", k_sweep}, {"scorer", scorer_json()}};
  }
  if (stage == "dpo-verify") {
    return Json{{"beta", beta}, {"steps", steps}, {"learning_rate", learning_rate}};
  }
  if (stage == "judge") {
    return Json{{"responses_a", rel(responses_a)}, {"responses_b", rel(responses_b)}, {"backend", backend("judge")}};
  }
  throw PreconditionError("unknown stage '" + stage + "'");
}

}  // namespace forge::config
