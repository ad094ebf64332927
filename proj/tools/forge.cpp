// forge: stage-by-stage driver for the preference data pipeline.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "forge/util/io.hpp"
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "forge/config.hpp"
#include "forge/pipeline.hpp"
#include "forge/util/error.hpp"

namespace {

using forge::util::Json;

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kMissingArtifact = 3,
  kBadData = 4,
  kBackend = 5,
};

int report_error(const std::string& kind, const std::string& message, const std::string& stage, int code,
                 const std::vector<std::string>& problems = {}) {
  Json err{{"status", "error"}, {"kind", kind}, {"message", message}, {"exit_code", code}};
  if (!stage.empty()) err["stage"] = stage;
  if (!problems.empty()) err["problems"] = problems;
  std::cerr << err.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  forge::config::Overrides overrides;
  try {
    args = forge::config::extract_backend_overrides(args, overrides.backend);
  } catch (const forge::ConfigError& e) {
    return report_error("config", e.what(), "", kConfig, e.problems());
  }

  CLI::App app{"forge: build filtered preference datasets from a document corpus"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau_k;
  std::optional<std::size_t> k;
  std::string corpus;
  std::string out;
  bool force = false;
  bool verbose = false;
  bool quiet = false;
  app.add_option("--config,-c", config_path, "Pipeline config file (JSON)");
  app.add_option("--seed", seed, "Override the random seed");
  app.add_option("--tau-k", tau_k, "Override the knowledge threshold");
  app.add_option("--k", k, "Override the number of samples per response set");
  app.add_option("--corpus", corpus, "Override the corpus root directory");
  app.add_option("--out", out, "Override the work directory");
  app.add_flag("--force", force, "Rerun stages even if they are up to date");
  app.add_flag("--verbose,-v", verbose, "Debug logging");
  app.add_flag("--quiet,-q", quiet, "Only log warnings and errors");
  app.footer("Backend settings: --backend.<role>.<key>=<value>, role one of instruction_generator, target_model,\n"
             "rc_teacher, sft_model, scorer, judge. The API key is read from the variable named by\n"
             "--backend.<role>.api_key_env (default FORGE_API_KEY).");

  std::string selected;
  for (const auto stage : forge::pipeline::all_stages()) {
    const std::string name(forge::pipeline::to_string(stage));
    app.add_subcommand(name, "Run the " + name + " stage")->callback([&selected, name] { selected = name; });
  }
  app.add_subcommand("run-all", "Run every stage in order")->callback([&selected] { selected = "run-all"; });
  app.add_subcommand("validate", "Check the config and print the resolved settings")->callback([&selected] {
    selected = "validate";
  });

  std::vector<std::string> cli_args(args.rbegin(), args.rend());
  try {
    app.parse(cli_args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), "", kConfig);
  }

  auto logger = spdlog::stderr_color_mt("forge");
  spdlog::set_default_logger(logger);
  spdlog::set_level(quiet ? spdlog::level::warn : verbose ? spdlog::level::debug : spdlog::level::info);

  overrides.seed = seed;
  overrides.tau_K = tau_k;
  overrides.k = k;
  if (!corpus.empty()) overrides.corpus_root = corpus;
  if (!out.empty()) overrides.work_dir = out;

  std::string current_stage;
  try {
    auto cfg = config_path.empty()
                   ? forge::config::validate_config(Json::object(), std::filesystem::current_path(), overrides)
                   : forge::config::validate_config(std::filesystem::path(config_path), overrides);
    if (selected == "validate") {
      std::cout << Json{{"status", "ok"}, {"work_dir", cfg.work_dir.string()}, {"topics", cfg.topics}}.dump(2)
                << std::endl;
      return kOk;
    }
    forge::pipeline::Pipeline pipeline(std::move(cfg), {force});
    std::vector<forge::pipeline::Stage> stages;
    if (selected == "run-all") {
      stages = forge::pipeline::all_stages();
    } else {
      stages.push_back(forge::pipeline::parse_stage(selected));
    }
    Json summary = Json::array();
    for (const auto stage : stages) {
      current_stage = std::string(forge::pipeline::to_string(stage));
      const auto report = pipeline.run_stage(stage);
      summary.push_back(Json{{"stage", current_stage},
                             {"skipped", report.skipped},
                             {"artifacts", report.artifacts},
                             {"summary", report.summary}});
    }
    std::cout << Json{{"status", "ok"}, {"stages", summary}}.dump(2) << std::endl;
    return kOk;
  } catch (const forge::ConfigError& e) {
    return report_error("config", e.what(), current_stage, kConfig, e.problems());
  } catch (const forge::MissingArtifactError& e) {
    return report_error("missing_artifact", e.what(), current_stage, kMissingArtifact);
  } catch (const forge::PreconditionError& e) {
    return report_error("precondition", e.what(), current_stage, kBadData);
  } catch (const forge::ReferenceError& e) {
    return report_error("reference", e.what(), current_stage, kBadData);
  } catch (const forge::RetriableError& e) {
    return report_error("backend_unavailable", e.what(), current_stage, kBackend);
  } catch (const forge::ContentError& e) {
    return report_error("backend_content", e.what(), current_stage, kBackend);
  } catch (const forge::ScorerError& e) {
    return report_error("scorer", e.what(), current_stage, kBackend);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), current_stage, kInternal);
  }
}
