#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sempl/augmentation.hpp"
#include "sempl/classifier.hpp"
#include "sempl/corpus.hpp"
#include "sempl/jsonl.hpp"
#include "sempl/knowledge.hpp"
#include "sempl/templating.hpp"

namespace sempl {

enum class Stage { ingest, augment, enrich, render, train, evaluate, analyze };

Stage stage_from_string(const std::string& s);
std::string to_string(Stage s);

enum class ProviderKind { live, fixture, stub };
ProviderKind provider_kind_from_string(const std::string& s);

struct SourceSpec {
  std::string path;
  DatasetId dataset = DatasetId::OTHER;
  Split split = Split::train;
  ColumnMapping columns;
};

struct AnalyzeConfig {
  std::size_t top_k = 30;
  std::vector<std::string> stop_list;
  std::string vectors;  // word-vector file; similarity skipped when empty
  Split split = Split::train;
  bool render_svg = false;
};

struct PipelineConfig {
  std::string workdir = "out";
  std::vector<SourceSpec> sources;
  std::vector<SourceSpec> pool_sources;
  std::string pool_events;  // canonical JSONL pool; overrides pool_sources
  std::uint64_t augment_seed = 0;
  DatasetId pool_dataset = DatasetId::PAP;

  ProviderKind providers = ProviderKind::stub;
  std::string entity_fixture;
  std::string event_fixture;
  std::string entity_endpoint;
  std::string entity_endpoint_path = "/entity-types";
  std::string event_endpoint;
  std::string event_endpoint_path = "/event-types";
  KbClientConfig kb;
  bool use_kb = false;
  std::string cache_path;
  unsigned enrich_workers = 1;

  PromptMode mode = PromptMode::evt_ent;
  TrainConfig train;
  std::string run_root;  // defaults to <workdir>/runs

  // evaluate inputs; default to the last train run and the test prompts file
  std::string eval_run_manifest;
  std::string eval_test_prompts;

  AnalyzeConfig analyze;
  std::string analyze_events;  // defaults to the ingest/augment output

  // Derived artifact paths.
  std::string events_path() const;
  std::string augmented_path() const;
  std::string enriched_path() const;
  std::string prompts_path(Split split) const;
  std::string report_path() const;
  std::string pipeline_manifest_path() const;

  static PipelineConfig from_json(const json& j, const std::string& base_dir = "");
  static PipelineConfig from_file(const std::string& path);
};

struct StageResult {
  std::vector<std::string> artifacts;
  json summary;
};

// Runs one stage: validates inputs (UsageError naming any missing file),
// writes outputs atomically, updates the pipeline manifest.
StageResult run_stage(Stage stage, const PipelineConfig& config);

}  // namespace sempl
