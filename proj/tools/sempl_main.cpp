// sempl: staged pipeline over JSONL artifacts.
//
//   sempl ingest   --config pipeline.json
//   sempl augment  --config pipeline.json --augment-seed 7 --augment-pool pool.jsonl
//   sempl enrich   --config pipeline.json --providers fixture
//   sempl render   --config pipeline.json --mode evt_ent
//   sempl train    --config pipeline.json --mode evt_ent
//   sempl evaluate --config pipeline.json --run <manifest.json> --test <prompts.jsonl>
//   sempl analyze  --dataset <events.jsonl> --split train --top-k 30
//
// Exit codes: 0 success, 2 usage, 3 data, 4 environment/provider.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "sempl/errors.hpp"
#include "sempl/pipeline.hpp"

using namespace sempl;

int main(int argc, char** argv) {
  CLI::App app{"event plausibility pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string providers;
  app.add_option("--config", config_path, "pipeline config JSON");
  app.add_option("--seed", seed, "seed for augmentation and training");
  app.add_option("--providers", providers, "provider selection: live|fixture|stub");

  std::optional<std::uint64_t> augment_seed;
  std::string augment_pool, mode, run_manifest, test_prompts, dataset_path, split = "train";
  std::size_t top_k = 30;
  std::string workdir;

  auto* ingest = app.add_subcommand("ingest", "load, validate and merge raw datasets");
  auto* augment = app.add_subcommand("augment", "balance train labels from a pool");
  augment->add_option("--augment-seed", augment_seed, "sampling seed");
  augment->add_option("--augment-pool", augment_pool, "canonical events JSONL pool");
  auto* enrich = app.add_subcommand("enrich", "attach entity/event types and definitions");
  auto* render = app.add_subcommand("render", "render prompts for a knowledge mode");
  render->add_option("--mode", mode, "evt_ent|evt|ent|baseline");
  auto* train = app.add_subcommand("train", "fine-tune the classifier on rendered prompts");
  train->add_option("--mode", mode, "evt_ent|evt|ent|baseline");
  auto* evaluate = app.add_subcommand("evaluate", "score a run on a prompts file");
  evaluate->add_option("--run", run_manifest, "run manifest.json");
  evaluate->add_option("--test", test_prompts, "prompts JSONL to evaluate");
  auto* analyze = app.add_subcommand("analyze", "top-word frequencies and similarity");
  analyze->add_option("--dataset", dataset_path, "canonical events JSONL");
  analyze->add_option("--split", split, "split to analyze (train|dev|test)");
  analyze->add_option("--top-k", top_k, "words per label");
  for (auto* sub : {ingest, augment, enrich, render, train, evaluate, analyze}) {
    sub->add_option("--workdir", workdir, "artifact directory (overrides config)");
    sub->fallthrough();  // let --config/--seed/--providers follow the subcommand
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    PipelineConfig config;
    if (!config_path.empty()) config = PipelineConfig::from_file(config_path);
    if (!workdir.empty()) config.workdir = workdir;
    if (seed) {
      config.augment_seed = *seed;
      config.train.seed = *seed;
    }
    if (!providers.empty()) config.providers = provider_kind_from_string(providers);
    if (augment_seed) config.augment_seed = *augment_seed;
    if (!augment_pool.empty()) config.pool_events = augment_pool;
    if (!mode.empty()) config.mode = mode_from_string(mode);
    if (!run_manifest.empty()) config.eval_run_manifest = run_manifest;
    if (!test_prompts.empty()) config.eval_test_prompts = test_prompts;
    if (!dataset_path.empty()) config.analyze_events = dataset_path;
    if (analyze->parsed()) {
      config.analyze.split = split_from_string(split);
      config.analyze.top_k = top_k;
    }

    Stage stage = stage_from_string(app.get_subcommands().front()->get_name());
    StageResult result = run_stage(stage, config);
    std::cout << to_string(stage) << " done\n";
    for (const auto& artifact : result.artifacts) std::cout << "  wrote " << artifact << "\n";
    if (!result.summary.is_null()) std::cout << result.summary.dump(2) << "\n";
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const EnvError& e) {
    std::cerr << "environment error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
