#include "forge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <map>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "forge/corpus.hpp"
#include "forge/dpo.hpp"
#include "forge/filter.hpp"
#include "forge/instruction_gen.hpp"
#include "forge/judge.hpp"
#include "forge/llm/chat_backend.hpp"
#include "forge/llm/mock_backend.hpp"
#include "forge/preference_builder.hpp"
#include "forge/prompts.hpp"
#include "forge/sft_builder.hpp"
#include "forge/util/error.hpp"
#include "forge/util/hash.hpp"
#include "forge/util/text.hpp"

namespace forge::pipeline {

namespace fs = std::filesystem;
using util::Json;

namespace {

const std::vector<std::pair<Stage, std::string_view>> kStageNames = {
    {Stage::kIngest, "ingest"},
    {Stage::kGenInstructions, "gen-instructions"},
    {Stage::kBuildSft, "build-sft"},
    {Stage::kBuildPreferences, "build-preferences"},
    {Stage::kFilter, "filter"},
    {Stage::kSweep, "sweep"},
    {Stage::kDpoVerify, "dpo-verify"},
    {Stage::kJudge, "judge"},
};

std::string file_hash(const fs::path& p) { return util::sha256_hex(util::read_text(p)); }

void write_json(const fs::path& p, const Json& j) { util::write_text_atomic(p, j.dump(2) + "\n"); }

template <typename T, typename Fn>
std::vector<Json> to_records(const std::vector<T>& items, Fn&& fn) {
  std::vector<Json> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(fn(item));
  return out;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::vector<std::string> out;
  const auto text = util::read_text(p);
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const auto line = util::trim(std::string_view(text).substr(start, end - start));
    if (!line.empty()) out.emplace_back(line);
    start = end + 1;
  }
  return out;
}

std::vector<prompts::AnswerExample> default_answer_examples() {
  return {{"What is the boiling point of water at sea level in degrees Celsius?",
           "Water boils at 100 degrees Celsius at sea level."},
          {"Which planet in the solar system is closest to the Sun?", "Mercury is the planet closest to the Sun."}};
}

std::string timestamp_utc() {
  std::time_t t = std::time(nullptr);
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) {
    t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string template_hash(const prompts::PromptPair& p) { return util::sha256_hex(p.system + '\x1e' + p.user); }

}  // namespace

std::string_view to_string(Stage stage) {
  for (const auto& [s, name] : kStageNames) {
    if (s == stage) return name;
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (const auto& [s, n] : kStageNames) {
    if (n == name) return s;
  }
  throw PreconditionError("unknown stage '" + std::string(name) + "'");
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = [] {
    std::vector<Stage> v;
    for (const auto& [s, _] : kStageNames) v.push_back(s);
    return v;
  }();
  return stages;
}

Pipeline::Pipeline(config::PipelineConfig config, RunOptions options)
    : config_(std::move(config)), options_(options) {}

Pipeline::~Pipeline() = default;

fs::path Pipeline::artifact(std::string_view name) const { return config_.work_dir / std::string(name); }

fs::path Pipeline::require(std::string_view name, Stage producer) const {
  auto p = artifact(name);
  if (!fs::exists(p)) throw MissingArtifactError(std::string(name), std::string(to_string(producer)));
  return p;
}

llm::Gateway& Pipeline::gateway(const std::string& role) {
  if (auto it = gateways_.find(role); it != gateways_.end()) return *it->second;
  if (!cache_) {
    fs::create_directories(config_.work_dir / artifacts::kCacheDir);
    cache_ = std::make_shared<llm::ResponseCache>(config_.work_dir / artifacts::kCacheDir / "generations.jsonl");
  }
  const auto& b = config_.backends.at(role);
  std::shared_ptr<llm::Backend> backend;
  if (b.kind == "chat") {
    backend = std::make_shared<llm::ChatCompletionBackend>(llm::ChatBackendOptions{b.base_url, b.model, b.api_key_env});
  } else {
    llm::DemoModelOptions demo;
    if (b.knowledge) demo.knowledge = read_lines(*b.knowledge);
    auto script = b.script ? llm::load_mock_script(*b.script) : llm::MockScript{};
    backend = std::make_shared<llm::MockBackend>(std::move(script), llm::demo_model(std::move(demo)), "mock:" + role);
  }
  llm::GatewayOptions opts;
  opts.max_parallel = b.max_parallel;
  opts.retry.max_attempts = b.max_retries;
  auto [it, _] = gateways_.emplace(role, std::make_unique<llm::Gateway>(std::move(backend), cache_, std::move(opts)));
  return *it->second;
}

const filter::ContradictionScorer& Pipeline::scorer() {
  if (scorer_) return *scorer_;
  std::shared_ptr<const filter::ContradictionScorer> base;
  if (config_.scorer.kind == "nli") {
    filter::NliServiceOptions o;
    o.base_url = config_.scorer.base_url;
    o.model = config_.scorer.model;
    o.max_attempts = config_.scorer.max_retries;
    base = std::make_shared<filter::NliServiceScorer>(o);
  } else {
    base = std::make_shared<filter::LexicalScorer>();
  }
  if (config_.sentence_level) base = std::make_shared<filter::SentenceMaxScorer>(base);
  scorer_ = std::make_shared<filter::CachingScorer>(base);
  return *scorer_;
}

std::map<std::string, std::string> Pipeline::input_hashes(Stage stage) const {
  std::map<std::string, std::string> h;
  auto art = [&](std::string_view name, Stage producer) { h[std::string(name)] = file_hash(require(name, producer)); };
  auto external = [&](const std::optional<fs::path>& p) {
    if (p) h["config:" + p->lexically_relative(config_.base_dir).generic_string()] = file_hash(*p);
  };
  auto backend_files = [&](const std::string& role) {
    const auto& b = config_.backends.at(role);
    external(b.script);
    external(b.knowledge);
  };
  switch (stage) {
    case Stage::kIngest:
      for (const auto& topic : config_.topics) {
        const auto file = config_.corpus_root / (topic + ".jsonl");
        if (fs::is_regular_file(file)) {
          h["corpus:" + topic + ".jsonl"] = file_hash(file);
        } else if (fs::is_directory(config_.corpus_root / topic)) {
          std::vector<fs::path> files;
          for (const auto& e : fs::directory_iterator(config_.corpus_root / topic)) {
            if (e.is_regular_file()) files.push_back(e.path());
          }
          std::sort(files.begin(), files.end());
          for (const auto& f : files) h["corpus:" + topic + "/" + f.filename().string()] = file_hash(f);
        }
      }
      break;
    case Stage::kGenInstructions:
      art(artifacts::kDocuments, Stage::kIngest);
      art(artifacts::kChunks, Stage::kIngest);
      external(config_.question_examples);
      backend_files("instruction_generator");
      break;
    case Stage::kBuildSft:
      art(artifacts::kInstructions, Stage::kGenInstructions);
      art(artifacts::kChunks, Stage::kIngest);
      external(config_.answer_examples);
      backend_files("target_model");
      backend_files("rc_teacher");
      break;
    case Stage::kBuildPreferences:
      art(artifacts::kInstructions, Stage::kGenInstructions);
      art(artifacts::kChunks, Stage::kIngest);
      backend_files(config::kSftModelRole);
      break;
    case Stage::kFilter:
      art(artifacts::kPreferences, Stage::kBuildPreferences);
      if (config_.ablation) art(artifacts::kAblation, Stage::kBuildPreferences);
      break;
    case Stage::kSweep:
      art(artifacts::kPreferences, Stage::kBuildPreferences);
      break;
    case Stage::kDpoVerify:
      art(artifacts::kDStar, Stage::kFilter);
      break;
    case Stage::kJudge:
      if (config_.responses_a) {
        external(config_.responses_a);
        external(config_.responses_b);
        art(artifacts::kDocuments, Stage::kIngest);
        art(artifacts::kInstructions, Stage::kGenInstructions);
      } else {
        art(artifacts::kPreferences, Stage::kBuildPreferences);
      }
      backend_files("judge");
      break;
  }
  return h;
}

StageReport Pipeline::run_stage(Stage stage) {
  const std::string name(to_string(stage));
  fs::create_directories(config_.work_dir);
  const auto manifest_path = artifact(artifacts::kManifest);
  Json manifest = fs::exists(manifest_path) ? Json::parse(util::read_text(manifest_path)) : Json::object();
  if (!manifest.is_object() || manifest.value("format", "") != "forge-manifest") {
    manifest = Json{{"format", "forge-manifest"}, {"version", 1}, {"stages", Json::object()}};
  }

  const auto inputs = input_hashes(stage);
  const auto config_hash = util::sha256_hex(config_.section_fingerprint(name).dump());

  StageReport report;
  report.stage = stage;
  if (!options_.force && manifest["stages"].contains(name)) {
    const auto& prev = manifest["stages"][name];
    bool current = prev.value("config_hash", "") == config_hash && prev.value("inputs", Json::object()) == Json(inputs);
    if (current) {
      const auto recorded = prev.value("artifacts", Json::object());
      for (const auto& [file, hash] : recorded.items()) {
        const auto p = artifact(file);
        if (!fs::exists(p) || file_hash(p) != hash.get<std::string>()) {
          current = false;
          break;
        }
        report.artifacts.push_back(file);
      }
    }
    if (current) {
      report.skipped = true;
      report.summary = prev.value("summary", Json::object());
      spdlog::info("{}: up to date", name);
      return report;
    }
    report.artifacts.clear();
  }

  spdlog::info("{}: running", name);
  std::vector<std::string> written;
  report.summary = execute(stage, written);
  report.artifacts = written;

  Json outputs = Json::object();
  for (const auto& file : written) outputs[file] = file_hash(artifact(file));
  manifest["stages"][name] = Json{{"config_hash", config_hash}, {"inputs", inputs}, {"artifacts", outputs},
                                  {"summary", report.summary}};
  write_json(manifest_path, manifest);
  return report;
}

std::vector<StageReport> Pipeline::run_all() {
  std::vector<StageReport> reports;
  for (const auto stage : all_stages()) reports.push_back(run_stage(stage));
  return reports;
}

Json Pipeline::execute(Stage stage, std::vector<std::string>& written) {
  switch (stage) {
    case Stage::kIngest: return ingest(written);
    case Stage::kGenInstructions: return gen_instructions(written);
    case Stage::kBuildSft: return build_sft(written);
    case Stage::kBuildPreferences: return build_preferences(written);
    case Stage::kFilter: return run_filter(written);
    case Stage::kSweep: return run_sweep(written);
    case Stage::kDpoVerify: return dpo_verify(written);
    case Stage::kJudge: return run_judge(written);
  }
  throw PreconditionError("unknown stage");
}

namespace {

std::vector<corpus::SourceDocument> load_documents(const fs::path& p) {
  std::vector<corpus::SourceDocument> docs;
  for (const auto& j : util::read_jsonl(p)) docs.push_back(corpus::document_from_json(j));
  return docs;
}

std::vector<corpus::DocumentChunk> load_chunks(const fs::path& p) {
  std::vector<corpus::DocumentChunk> chunks;
  for (const auto& j : util::read_jsonl(p)) chunks.push_back(corpus::chunk_from_json(j));
  return chunks;
}

std::vector<instructions::InstructionRecord> load_instructions(const fs::path& p) {
  std::vector<instructions::InstructionRecord> out;
  for (const auto& j : util::read_jsonl(p)) out.push_back(instructions::instruction_from_json(j));
  return out;
}

std::vector<preference::PreferenceCandidate> load_candidates(const fs::path& p) {
  std::vector<preference::PreferenceCandidate> out;
  for (const auto& j : util::read_jsonl(p)) out.push_back(preference::candidate_from_json(j));
  return out;
}

}  // namespace

Json Pipeline::ingest(std::vector<std::string>& written) {
  corpus::IngestOptions opts{config_.topics, config_.train_per_topic, config_.eval_per_topic, config_.seed};
  const auto result = corpus::ingest_corpus(config_.corpus_root, opts);
  const auto tokenizer = corpus::make_tokenizer(config_.tokenizer);

  std::vector<Json> doc_records;
  std::vector<Json> chunk_records;
  std::size_t train = 0;
  for (const auto& doc : result.documents) {
    doc_records.push_back(corpus::to_json(doc));
    if (doc.split == corpus::Split::kTrain) ++train;
    for (const auto& chunk : corpus::chunk_document(doc, config_.chunk_tokens, *tokenizer)) {
      chunk_records.push_back(corpus::to_json(chunk));
    }
  }
  util::write_jsonl_atomic(artifact(artifacts::kDocuments), doc_records);
  util::write_jsonl_atomic(artifact(artifacts::kChunks), chunk_records);
  Json stats{{"documents", result.documents.size()},
             {"train", train},
             {"eval", result.documents.size() - train},
             {"chunks", chunk_records.size()},
             {"skipped_empty", result.skipped_empty},
             {"topics", config_.topics}};
  write_json(artifact(artifacts::kIngestStats), stats);
  written = {artifacts::kDocuments, artifacts::kChunks, artifacts::kIngestStats};
  return stats;
}

Json Pipeline::gen_instructions(std::vector<std::string>& written) {
  const auto docs = load_documents(require(artifacts::kDocuments, Stage::kIngest));
  const auto chunks = load_chunks(require(artifacts::kChunks, Stage::kIngest));
  std::map<std::string, std::vector<corpus::DocumentChunk>> by_doc;
  for (const auto& c : chunks) by_doc[c.doc_id].push_back(c);

  std::vector<instructions::DocumentChunks> inputs;
  for (const auto& d : docs) {
    if (d.split != corpus::Split::kTrain) continue;
    auto& cs = by_doc[d.doc_id];
    std::sort(cs.begin(), cs.end(), [](const auto& a, const auto& b) { return a.chunk_index < b.chunk_index; });
    inputs.push_back({d.doc_id, d.topic, cs});
  }

  instructions::GenerationOptions opts;
  opts.per_document = config_.questions_per_document;
  opts.max_attempts = config_.max_attempts;
  opts.temperature = config_.temperature;
  if (config_.question_examples) {
    for (const auto& j : util::read_jsonl(*config_.question_examples)) {
      opts.few_shot.push_back({j.at("chunk").get<std::string>(), j.at("question").get<std::string>()});
    }
  }
  const auto out = instructions::generate_instructions(inputs, gateway("instruction_generator"), opts);
  util::write_jsonl_atomic(artifact(artifacts::kInstructions),
                           to_records(out.records, [](const auto& r) { return instructions::to_json(r); }));
  auto stats = out.stats.to_json();
  stats["instructions"] = out.records.size();
  write_json(artifact(artifacts::kInstructionStats), stats);
  written = {artifacts::kInstructions, artifacts::kInstructionStats};
  return stats;
}

Json Pipeline::build_sft(std::vector<std::string>& written) {
  const auto instr = load_instructions(require(artifacts::kInstructions, Stage::kGenInstructions));
  const auto chunks = load_chunks(require(artifacts::kChunks, Stage::kIngest));
  const corpus::ChunkIndex index(chunks);

  std::vector<prompts::AnswerExample> examples;
  if (config_.answer_examples) {
    for (const auto& j : util::read_jsonl(*config_.answer_examples)) {
      examples.push_back({j.at("question").get<std::string>(), j.at("answer").get<std::string>()});
    }
  } else {
    examples = default_answer_examples();
  }

  const auto split = sft::split_for_rc(instr, config_.rc_fraction, config_.seed);
  auto& target = gateway("target_model");
  auto& teacher = gateway("rc_teacher");
  auto self = sft::self_annotate(split.sft_set, target, examples);
  auto rc = sft::teacher_rc_annotate(split.rc_set, teacher, index);
  const auto self_stats = self.stats.to_json();
  const auto rc_stats = rc.stats.to_json();
  const auto mixture = sft::merge_mixture(std::move(self.examples), std::move(rc.examples));
  util::write_jsonl_atomic(artifact(artifacts::kSft), to_records(mixture, [](const auto& e) { return sft::to_json(e); }));

  Json meta{{"created_at", timestamp_utc()},
            {"backend_ids", {{"target_model", target.backend_id()}, {"rc_teacher", teacher.backend_id()}}},
            {"template_hashes",
             {{"self_annotation", template_hash(prompts::self_annotation_prompt("{instruction}", examples))},
              {"reading_comprehension",
               template_hash(prompts::reading_comprehension_prompt("{instruction}", "{document}"))}}},
            {"rc_fraction", config_.rc_fraction},
            {"seed", config_.seed},
            {"counts", {{"total", mixture.size()}, {"self_annotated", self_stats}, {"teacher_rc", rc_stats}}},
            {"reference_hparams", sft::reference_hyperparameters()}};
  write_json(artifact(artifacts::kSftMeta), meta);
  written = {artifacts::kSft, artifacts::kSftMeta};
  return Json{{"examples", mixture.size()}, {"rc_set", split.rc_set.size()}, {"sft_set", split.sft_set.size()}};
}

Json Pipeline::build_preferences(std::vector<std::string>& written) {
  const auto instr = load_instructions(require(artifacts::kInstructions, Stage::kGenInstructions));
  const auto chunks = load_chunks(require(artifacts::kChunks, Stage::kIngest));
  const corpus::ChunkIndex index(chunks);
  auto& model = gateway(config::kSftModelRole);

  preference::CandidateOptions opts;
  opts.k = static_cast<int>(config_.k);
  opts.temperature = config_.temperature;
  opts.greedy_without_context = config_.greedy_without_context;
  const auto out = preference::build_candidates(instr, index, model, opts);
  util::write_jsonl_atomic(artifact(artifacts::kPreferences),
                           to_records(out.candidates, [](const auto& c) { return preference::to_json(c); }));
  Json stats{{"main", out.stats.to_json()}};
  written = {artifacts::kPreferences};
  if (config_.ablation) {
    const auto ab = preference::build_ablation_candidates(instr, model, opts.k, opts.temperature);
    util::write_jsonl_atomic(artifact(artifacts::kAblation),
                             to_records(ab.candidates, [](const auto& c) { return preference::to_json(c); }));
    stats["ablation"] = ab.stats.to_json();
    written.push_back(artifacts::kAblation);
  }
  write_json(artifact(artifacts::kPreferenceStats), stats);
  written.push_back(artifacts::kPreferenceStats);
  return stats;
}

Json Pipeline::run_filter(std::vector<std::string>& written) {
  const auto cands = load_candidates(require(artifacts::kPreferences, Stage::kBuildPreferences));
  const auto& sc = scorer();
  const filter::FilterThresholds th{config_.tau_L, config_.tau_K};
  th.validate();
  const auto scored = filter::score_candidates(cands, sc, th.tau_L, config_.scorer.max_parallel);
  const auto result = filter::apply_thresholds(cands, scored, th);
  const auto known = filter::extract_known_split(cands, scored, th, config_.known_sample, config_.seed);

  util::write_jsonl_atomic(artifact(artifacts::kDStar),
                           to_records(result.d_star, [](const auto& p) { return filter::to_json(p); }));
  util::write_jsonl_atomic(artifact(artifacts::kDecisions),
                           to_records(result.decisions, [](const auto& d) { return filter::to_json(d); }));
  util::write_jsonl_atomic(artifact(artifacts::kKnown), to_records(known, [](const auto& k) {
                             return Json{{"instr_id", k.instr_id}, {"instruction", k.instruction}};
                           }));
  Json stats{{"counts", result.stats.to_json()},
             {"tau_L", th.tau_L},
             {"tau_K", th.tau_K},
             {"scorer_id", sc.scorer_id()},
             {"known_sampled", known.size()}};
  written = {artifacts::kDStar, artifacts::kDecisions, artifacts::kKnown};
  if (config_.ablation) {
    std::vector<preference::AblationCandidate> ab;
    for (const auto& j : util::read_jsonl(require(artifacts::kAblation, Stage::kBuildPreferences))) {
      ab.push_back(preference::ablation_candidate_from_json(j));
    }
    const auto ar = filter::ablation_filter(ab, sc, config_.scorer.max_parallel);
    util::write_jsonl_atomic(artifact(artifacts::kDStarAblation),
                             to_records(ar.pairs, [](const auto& p) { return filter::to_json(p); }));
    stats["ablation"] = Json{{"pairs", ar.pairs.size()}, {"dropped", ar.drop_reasons}};
    written.push_back(artifacts::kDStarAblation);
  }
  write_json(artifact(artifacts::kFilterStats), stats);
  written.push_back(artifacts::kFilterStats);
  return stats;
}

Json Pipeline::run_sweep(std::vector<std::string>& written) {
  const auto cands = load_candidates(require(artifacts::kPreferences, Stage::kBuildPreferences));
  const auto& sc = scorer();
  const auto points = filter::sweep_tau_K(cands, sc, config_.tau_L, config_.sweep, config_.scorer.max_parallel);

  std::string table = "tau_K\tsize\tknown_excluded\tinconsistent_excluded\tunscored\tidentical_pair_dropped\n";
  Json rows = Json::array();
  for (const auto& p : points) {
    const auto& s = p.result.stats;
    table += fmt::format("{:.2f}\t{}\t{}\t{}\t{}\t{}\n", p.tau_K, p.size(), s.known_excluded,
                         s.inconsistent_excluded, s.unscored, s.identical_dropped);
    rows.push_back(Json{{"tau_K", p.tau_K}, {"size", p.size()}, {"counts", s.to_json()}});
  }

  Json k_rows = Json::array();
  for (const auto k : config_.k_sweep) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cands) {
      if (k > c.y_r.size()) continue;
      try {
        sum += filter::knowledge_score_at_k(c, sc, k).mean;
        ++n;
      } catch (const ScorerError&) {
      }
    }
    if (n > 0) k_rows.push_back(Json{{"k", k}, {"mean_S_K", sum / static_cast<double>(n)}, {"items", n}});
  }
  util::write_text_atomic(artifact(artifacts::kSweepTable), table);
  Json report{{"tau_L", config_.tau_L}, {"scorer_id", sc.scorer_id()}, {"tau_K_sweep", rows}, {"k_sweep", k_rows}};
  write_json(artifact(artifacts::kSweepReport), report);
  written = {artifacts::kSweepTable, artifacts::kSweepReport};
  return Json{{"points", rows.size()}};
}

Json Pipeline::dpo_verify(std::vector<std::string>& written) {
  std::vector<filter::FilteredPreferencePair> pairs;
  for (const auto& j : util::read_jsonl(require(artifacts::kDStar, Stage::kFilter))) {
    pairs.push_back(filter::pair_from_json(j));
  }
  if (pairs.empty()) throw PreconditionError("the filtered preference set is empty; nothing to train on");

  dpo::CharVocabulary vocab;
  for (const auto& p : pairs) {
    vocab.observe(p.instruction);
    vocab.observe(p.y_w);
    vocab.observe(p.y_l);
  }
  vocab.freeze();
  std::vector<dpo::DpoBatchItem> data;
  for (const auto& p : pairs) data.emplace_back(vocab.encode(p.instruction), vocab.encode(p.y_w), vocab.encode(p.y_l));

  const dpo::ToyPolicy ref(vocab.size(), vocab.size() + 1);
  const dpo::DpoConfig cfg{config_.beta, config_.steps, config_.learning_rate};
  const auto trained = dpo::train_toy(ref, ref, data, cfg);
  const double accuracy = dpo::implicit_preference_accuracy(trained.policy, ref, data, cfg.beta);

  std::string table = "step\tloss\tmean_margin\n";
  for (std::size_t i = 0; i < trained.losses.size(); ++i) {
    table += fmt::format("{}\t{:.10f}\t{:.10f}\n", i, trained.losses[i], trained.mean_margins[i]);
  }
  util::write_text_atomic(artifact(artifacts::kDpoTrajectory), table);
  Json report{{"pairs", data.size()},
              {"vocab_size", vocab.size()},
              {"parameters", trained.policy.parameter_count()},
              {"beta", cfg.beta},
              {"steps", cfg.steps},
              {"learning_rate", cfg.learning_rate},
              {"initial_loss", trained.losses.front()},
              {"final_loss", trained.losses.back()},
              {"initial_mean_margin", trained.mean_margins.front()},
              {"final_mean_margin", trained.mean_margins.back()},
              {"implicit_preference_accuracy", accuracy}};
  write_json(artifact(artifacts::kDpoReport), report);
  written = {artifacts::kDpoTrajectory, artifacts::kDpoReport};
  return report;
}

Json Pipeline::run_judge(std::vector<std::string>& written) {
  std::vector<judge::JudgeItem> items;
  if (config_.responses_a) {
    const auto docs = load_documents(require(artifacts::kDocuments, Stage::kIngest));
    const auto instr = load_instructions(require(artifacts::kInstructions, Stage::kGenInstructions));
    std::map<std::string, const corpus::SourceDocument*> doc_by_id;
    for (const auto& d : docs) doc_by_id[d.doc_id] = &d;
    std::map<std::string, const instructions::InstructionRecord*> instr_by_id;
    for (const auto& r : instr) instr_by_id[r.instr_id] = &r;

    auto load = [](const fs::path& p) {
      std::map<std::string, Json> m;
      for (auto& j : util::read_jsonl(p)) {
        auto id = j.at("instr_id").get<std::string>();
        if (!m.emplace(id, std::move(j)).second) throw ReferenceError(p.string() + ": duplicate instr_id " + id);
      }
      return m;
    };
    const auto a = load(*config_.responses_a);
    const auto b = load(*config_.responses_b);
    for (const auto& [id, ra] : a) {
      const auto it = b.find(id);
      if (it == b.end()) throw ReferenceError("instr_id " + id + " has no response in " + config_.responses_b->string());
      const auto& rb = it->second;
      std::string instruction = ra.value("instruction", "");
      std::string doc_id = ra.value("doc_id", "");
      if (const auto ir = instr_by_id.find(id); ir != instr_by_id.end()) {
        if (instruction.empty()) instruction = ir->second->text;
        if (doc_id.empty()) doc_id = ir->second->doc_id;
      }
      const auto d = doc_by_id.find(doc_id);
      if (instruction.empty() || d == doc_by_id.end()) {
        throw ReferenceError("instr_id " + id + " cannot be matched to an instruction and document");
      }
      items.push_back({id, instruction, d->second->body, ra.at("response").get<std::string>(),
                       rb.at("response").get<std::string>()});
    }
    for (const auto& [id, _] : b) {
      if (!a.count(id)) throw ReferenceError("instr_id " + id + " has no response in " + config_.responses_a->string());
    }
  } else {
    for (const auto& c : load_candidates(require(artifacts::kPreferences, Stage::kBuildPreferences))) {
      items.push_back({c.instr_id, c.instruction, c.chunk, c.y_c_star, c.y_r.front()});
    }
  }
  if (items.empty()) throw PreconditionError("nothing to judge");

  const auto run = judge::judge_all(items, gateway("judge"));
  util::write_jsonl_atomic(artifact(artifacts::kVerdicts),
                           to_records(run.verdicts, [](const auto& v) { return judge::to_json(v); }));
  util::write_text_atomic(artifact(artifacts::kJudgeSummary), judge::summary_table(run.summary));
  const auto summary = run.summary.to_json();
  write_json(artifact(artifacts::kJudgeReport), summary);
  written = {artifacts::kVerdicts, artifacts::kJudgeSummary, artifacts::kJudgeReport};
  return summary;
}

}  // namespace forge::pipeline
