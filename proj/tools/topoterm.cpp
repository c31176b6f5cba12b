// Command-line driver for the term-extraction pipeline.

#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "oracle_check.hpp"
#include "topoterm/error.hpp"
#include "topoterm/pipeline/pipeline.hpp"

using namespace topoterm;

int main(int argc, char** argv) {
  CLI::App app{"Term extraction from dialogue corpora with topological word features"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<std::size_t> jobs;
  bool force = false;
  bool verbose = false;
  std::string output_dir;
  app.add_option("--config", config_path, "Pipeline config file (TOML-style)");
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_flag("--deterministic", deterministic, "Byte-reproducible artifacts (no timings in stamps)");
  app.add_option("--jobs", jobs, "Worker threads for stage-internal parallelism")->check(CLI::PositiveNumber);
  app.add_flag("--stage-force", force, "Rerun the stage even if its stamp is current");
  app.add_option("--output-dir", output_dir, "Override paths.output_dir");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::vector<std::pair<CLI::App*, std::optional<Stage>>> commands;
  commands.emplace_back(app.add_subcommand("ingest", "Validate corpora, split validation, list words"), Stage::kIngest);
  commands.emplace_back(app.add_subcommand("features", "Persistence diagrams, TDA features and MLM scores"),
                        Stage::kFeatures);
  commands.emplace_back(app.add_subcommand("train", "Train one tagger per configured feature kind"), Stage::kTrain);
  commands.emplace_back(app.add_subcommand("tag", "Tag the evaluation corpus with every model"), Stage::kTag);
  commands.emplace_back(app.add_subcommand("eval", "Score predictions and unions against gold terms"), Stage::kEval);
  commands.emplace_back(app.add_subcommand("report", "Print the evaluation report"), Stage::kReport);
  auto* all = app.add_subcommand("run", "Run ingest through eval in order");
  auto* oracle = app.add_subcommand("oracle-check", "Brute-force verification batteries");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");

  try {
    std::optional<PipelineConfig> cfg;
    if (!config_path.empty()) {
      cfg = load_pipeline_config(config_path);
      if (seed) cfg->seed = *seed;
      if (jobs) cfg->jobs = *jobs;
      if (deterministic) cfg->deterministic = true;
      if (!output_dir.empty()) cfg->paths.output_dir = output_dir;
    }

    if (oracle->parsed()) {
      const int failures = oracle_check(cfg ? &*cfg : nullptr, seed.value_or(cfg ? cfg->seed : 0), std::cout);
      std::cout << (failures == 0 ? "all oracle checks passed" : std::to_string(failures) + " oracle checks failed")
                << "\n";
      return failures == 0 ? 0 : 1;
    }

    if (!cfg) {
      std::cerr << "error: --config is required for pipeline stages\n";
      return 2;
    }
    Pipeline pipeline(*cfg);
    if (all->parsed()) {
      for (Stage s : {Stage::kIngest, Stage::kFeatures, Stage::kTrain, Stage::kTag, Stage::kEval}) {
        pipeline.run(s, force, std::cout);
      }
      return 0;
    }
    for (const auto& [cmd, stage] : commands) {
      if (cmd->parsed()) pipeline.run(*stage, force, std::cout);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
