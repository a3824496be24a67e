#include "sempl/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>

#include "sempl/analysis.hpp"
#include "sempl/errors.hpp"
#include "sempl/evaluation.hpp"
#include "sempl/util.hpp"

namespace sempl {

namespace fs = std::filesystem;

Stage stage_from_string(const std::string& s) {
  std::string v = to_lower(trim(s));
  if (v == "ingest") return Stage::ingest;
  if (v == "augment") return Stage::augment;
  if (v == "enrich") return Stage::enrich;
  if (v == "render") return Stage::render;
  if (v == "train") return Stage::train;
  if (v == "evaluate") return Stage::evaluate;
  if (v == "analyze") return Stage::analyze;
  throw UsageError("unknown stage: " + s);
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::augment: return "augment";
    case Stage::enrich: return "enrich";
    case Stage::render: return "render";
    case Stage::train: return "train";
    case Stage::evaluate: return "evaluate";
    case Stage::analyze: return "analyze";
  }
  return "?";
}

ProviderKind provider_kind_from_string(const std::string& s) {
  std::string v = to_lower(trim(s));
  if (v == "live") return ProviderKind::live;
  if (v == "fixture") return ProviderKind::fixture;
  if (v == "stub") return ProviderKind::stub;
  throw UsageError("unknown provider kind: " + s + " (expected live|fixture|stub)");
}

static std::string provider_kind_name(ProviderKind k) {
  switch (k) {
    case ProviderKind::live: return "live";
    case ProviderKind::fixture: return "fixture";
    case ProviderKind::stub: return "stub";
  }
  return "?";
}

std::string PipelineConfig::events_path() const {
  return (fs::path(workdir) / "events.jsonl").string();
}
std::string PipelineConfig::augmented_path() const {
  return (fs::path(workdir) / "events.augmented.jsonl").string();
}
std::string PipelineConfig::enriched_path() const {
  return (fs::path(workdir) / "enriched.jsonl").string();
}
std::string PipelineConfig::prompts_path(Split split) const {
  return (fs::path(workdir) /
          ("prompts." + sempl::to_string(mode) + "." + sempl::to_string(split) + ".jsonl"))
      .string();
}
std::string PipelineConfig::report_path() const {
  return (fs::path(workdir) / ("report." + sempl::to_string(mode) + ".json")).string();
}
std::string PipelineConfig::pipeline_manifest_path() const {
  return (fs::path(workdir) / "pipeline.json").string();
}

namespace {

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

SourceSpec source_from_json(const json& j, const std::string& base_dir) {
  SourceSpec s;
  if (!j.contains("path")) throw UsageError("source entry without 'path'");
  s.path = resolve_path(base_dir, j["path"].get<std::string>());
  s.dataset = dataset_from_string(j.value("dataset", "other"));
  s.split = split_from_string(j.value("split", "train"));
  if (j.contains("columns")) {
    const auto& c = j["columns"];
    s.columns.subject = c.value("subject", s.columns.subject);
    s.columns.verb = c.value("verb", s.columns.verb);
    s.columns.object = c.value("object", s.columns.object);
    s.columns.label = c.value("label", s.columns.label);
  }
  std::string delim = j.value("delimiter", "");
  if (delim == "tab" || delim == "\\t" || delim == "\t") s.columns.delimiter = '\t';
  else if (delim == "comma" || delim == ",") s.columns.delimiter = ',';
  return s;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const std::string& base_dir) {
  PipelineConfig c;
  c.workdir = resolve_path(base_dir, j.value("workdir", c.workdir));
  for (const auto& s : j.value("sources", json::array()))
    c.sources.push_back(source_from_json(s, base_dir));
  for (const auto& s : j.value("pool_sources", json::array()))
    c.pool_sources.push_back(source_from_json(s, base_dir));
  c.pool_events = resolve_path(base_dir, j.value("pool_events", ""));
  c.augment_seed = j.value("augment_seed", c.augment_seed);
  if (j.contains("pool_dataset"))
    c.pool_dataset = dataset_from_string(j["pool_dataset"].get<std::string>());

  if (j.contains("providers"))
    c.providers = provider_kind_from_string(j["providers"].get<std::string>());
  c.entity_fixture = resolve_path(base_dir, j.value("entity_fixture", ""));
  c.event_fixture = resolve_path(base_dir, j.value("event_fixture", ""));
  c.entity_endpoint = j.value("entity_endpoint", "");
  c.entity_endpoint_path = j.value("entity_endpoint_path", c.entity_endpoint_path);
  c.event_endpoint = j.value("event_endpoint", "");
  c.event_endpoint_path = j.value("event_endpoint_path", c.event_endpoint_path);
  c.kb.base_url = j.value("kb_base_url", c.kb.base_url);
  c.kb.user_agent = j.value("kb_user_agent", c.kb.user_agent);
  c.kb.language = j.value("kb_language", c.kb.language);
  c.use_kb = j.value("use_kb", c.providers == ProviderKind::live);
  c.cache_path = resolve_path(base_dir, j.value("cache", ""));
  c.enrich_workers = j.value("enrich_workers", c.enrich_workers);

  if (j.contains("mode")) c.mode = mode_from_string(j["mode"].get<std::string>());
  if (j.contains("train")) c.train = train_config_from_json(j["train"]);
  c.run_root = resolve_path(base_dir, j.value("run_root", ""));
  c.eval_run_manifest = resolve_path(base_dir, j.value("eval_run_manifest", ""));
  c.eval_test_prompts = resolve_path(base_dir, j.value("eval_test_prompts", ""));

  if (j.contains("analyze")) {
    const auto& a = j["analyze"];
    c.analyze.top_k = a.value("top_k", c.analyze.top_k);
    for (const auto& w : a.value("stop_list", json::array()))
      c.analyze.stop_list.push_back(w.get<std::string>());
    c.analyze.vectors = resolve_path(base_dir, a.value("vectors", ""));
    if (a.contains("split")) c.analyze.split = split_from_string(a["split"].get<std::string>());
    c.analyze.render_svg = a.value("render_svg", false);
  }
  c.analyze_events = resolve_path(base_dir, j.value("analyze_events", ""));
  return c;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw UsageError("config file is not a JSON object: " + path);
  return from_json(j, fs::path(path).parent_path().string());
}

namespace {

void require_input(const std::string& stage, const std::string& path) {
  if (path.empty())
    throw UsageError(stage + ": required input path not configured");
  if (!fs::exists(path))
    throw UsageError(stage + ": missing input artifact: " + path);
}

// Pipeline manifest: per-stage input/output hashes, updated after each stage.
void update_manifest(const PipelineConfig& config, const std::string& stage,
                     const std::vector<std::string>& inputs,
                     const std::vector<std::string>& outputs, const json& summary) {
  json manifest = json::object();
  std::string path = config.pipeline_manifest_path();
  if (fs::exists(path)) {
    manifest = json::parse(read_file(path), nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object()) manifest = json::object();
  }
  json entry;
  entry["inputs"] = json::object();
  for (const auto& p : inputs)
    if (fs::exists(p)) entry["inputs"][p] = sha256_file_hex(p);
  entry["outputs"] = json::object();
  for (const auto& p : outputs)
    if (fs::exists(p)) entry["outputs"][p] = sha256_file_hex(p);
  entry["summary"] = summary;
  manifest[stage] = entry;
  atomic_write_file(path, manifest.dump(2) + "\n");
}

DatasetBundle ingest_sources(const std::vector<SourceSpec>& sources, const char* stage,
                             json* summary) {
  if (sources.empty()) throw UsageError(std::string(stage) + ": no sources configured");
  std::map<Split, std::vector<DatasetBundle>> by_split;
  MergeStats load_stats;
  for (const auto& src : sources) {
    require_input(stage, src.path);
    by_split[src.split].push_back(
        load_events(src.path, src.dataset, src.split, src.columns, &load_stats));
  }
  DatasetBundle all;
  MergeStats merge_stats;
  json split_counts = json::object();
  for (auto& [split, bundles] : by_split) {
    DatasetBundle merged = merge_splits(bundles, split, &merge_stats);
    auto c = merged.counts();
    split_counts[to_string(split)] = {{"events", c.total()},
                                      {"plausible", c.plausible},
                                      {"implausible", c.implausible}};
    all.events.insert(all.events.end(), merged.events.begin(), merged.events.end());
  }
  if (summary) {
    (*summary)["splits"] = split_counts;
    (*summary)["duplicates_dropped"] =
        load_stats.duplicates_dropped + merge_stats.duplicates_dropped;
    (*summary)["label_conflicts"] = load_stats.conflicts + merge_stats.conflicts;
  }
  return all;
}

StageResult do_ingest(const PipelineConfig& config) {
  StageResult result;
  result.summary = json::object();
  DatasetBundle all = ingest_sources(config.sources, "ingest", &result.summary);
  write_events(config.events_path(), all);
  result.artifacts.push_back(config.events_path());
  std::vector<std::string> inputs;
  for (const auto& s : config.sources) inputs.push_back(s.path);
  update_manifest(config, "ingest", inputs, result.artifacts, result.summary);
  return result;
}

bool augmentation_configured(const PipelineConfig& config) {
  return !config.pool_events.empty() || !config.pool_sources.empty();
}

StageResult do_augment(const PipelineConfig& config) {
  require_input("augment", config.events_path());
  DatasetBundle base = read_events(config.events_path());

  DatasetBundle pool;
  std::vector<std::string> inputs{config.events_path()};
  if (!config.pool_events.empty()) {
    require_input("augment", config.pool_events);
    pool = read_events(config.pool_events);
    inputs.push_back(config.pool_events);
  } else if (!config.pool_sources.empty()) {
    pool = ingest_sources(config.pool_sources, "augment", nullptr);
    for (const auto& s : config.pool_sources) inputs.push_back(s.path);
  } else {
    throw UsageError("augment: no pool configured (pool_events or pool_sources)");
  }

  // Balancing applies to the train split only; dev/test pass through.
  DatasetBundle train_part, rest;
  for (const auto& e : base.events)
    (e.split == Split::train ? train_part : rest).events.push_back(e);

  AugmentationPlan plan;
  plan.seed = config.augment_seed;
  plan.pool_id = config.pool_dataset;
  AugmentationStats stats;
  DatasetBundle balanced = augment_balance(train_part, pool, plan, &stats);

  DatasetBundle out;
  out.events = base.events;
  out.events.insert(out.events.end(), balanced.events.begin() + train_part.events.size(),
                    balanced.events.end());
  write_events(config.augmented_path(), out);

  StageResult result;
  result.artifacts.push_back(config.augmented_path());
  result.summary = {{"train_before",
                     {{"plausible", stats.before.plausible},
                      {"implausible", stats.before.implausible}}},
                    {"train_after",
                     {{"plausible", stats.after.plausible},
                      {"implausible", stats.after.implausible}}},
                    {"sampled", stats.sampled},
                    {"noop", stats.noop},
                    {"seed", plan.seed}};
  update_manifest(config, "augment", inputs, result.artifacts, result.summary);
  return result;
}

std::string enrich_input_path(const PipelineConfig& config) {
  return augmentation_configured(config) ? config.augmented_path() : config.events_path();
}

StageResult do_enrich(const PipelineConfig& config) {
  std::string input = enrich_input_path(config);
  require_input("enrich", input);
  DatasetBundle events = read_events(input);

  std::unique_ptr<EntityTypingProvider> entity;
  std::unique_ptr<EventDetectionProvider> event;
  std::unique_ptr<KbClient> kb;
  std::unique_ptr<DefinitionCache> cache;
  std::vector<std::string> inputs{input};

  if (!config.cache_path.empty())
    cache = std::make_unique<DefinitionCache>(config.cache_path);

  switch (config.providers) {
    case ProviderKind::stub:
      entity = std::make_unique<StubEntityTypingProvider>();
      event = std::make_unique<StubEventDetectionProvider>();
      break;
    case ProviderKind::fixture: {
      require_input("enrich", config.entity_fixture);
      require_input("enrich", config.event_fixture);
      entity = std::make_unique<FixtureEntityTypingProvider>(config.entity_fixture);
      event = std::make_unique<FixtureEventDetectionProvider>(config.event_fixture);
      inputs.push_back(config.entity_fixture);
      inputs.push_back(config.event_fixture);
      // Definition resolution stays offline: cache hits only.
      if (cache) kb = std::make_unique<StaticKbClient>(std::map<std::string, std::string>{});
      break;
    }
    case ProviderKind::live: {
      if (config.entity_endpoint.empty() || config.event_endpoint.empty())
        throw UsageError("enrich: live providers need entity_endpoint and event_endpoint");
      entity = std::make_unique<HttpEntityTypingProvider>(config.entity_endpoint,
                                                          config.entity_endpoint_path);
      event = std::make_unique<HttpEventDetectionProvider>(config.event_endpoint,
                                                           config.event_endpoint_path);
      if (config.use_kb) {
        if (!cache)
          throw UsageError("enrich: live KB lookups require a cache path");
        KbClientConfig kb_config = config.kb;
        if (const char* override_url = std::getenv("SEMPL_KB_ENDPOINT"))
          kb_config.base_url = override_url;
        kb = std::make_unique<HttpKbClient>(kb_config);
      }
      break;
    }
  }

  ProviderSet providers;
  providers.entity_typing = entity.get();
  providers.event_detection = event.get();
  providers.kb = kb.get();
  providers.cache = cache.get();

  auto enriched = enrich_bundle(events, providers, {}, config.enrich_workers);
  write_enriched(config.enriched_path(), enriched);

  std::size_t with_subject = 0, with_object = 0, with_verb = 0;
  for (const auto& e : enriched) {
    if (!e.subject_types.empty()) ++with_subject;
    if (!e.object_types.empty()) ++with_object;
    if (e.verb_type) ++with_verb;
  }
  StageResult result;
  result.artifacts.push_back(config.enriched_path());
  result.summary = {{"events", enriched.size()},
                    {"with_subject_types", with_subject},
                    {"with_object_types", with_object},
                    {"with_verb_type", with_verb},
                    {"providers", provider_kind_name(config.providers)}};
  update_manifest(config, "enrich", inputs, result.artifacts, result.summary);
  return result;
}

StageResult do_render(const PipelineConfig& config) {
  require_input("render", config.enriched_path());
  auto enriched = read_enriched(config.enriched_path());

  std::map<Split, std::vector<PromptRecord>> by_split;
  for (const auto& e : enriched)
    by_split[e.event.split].push_back(render_prompt(e, config.mode));

  StageResult result;
  json split_summary = json::object();
  for (const auto& [split, records] : by_split) {
    std::string path = config.prompts_path(split);
    write_prompts(path, records);
    result.artifacts.push_back(path);
    std::size_t verb_unknown = 0, trivial = 0;
    for (const auto& r : records) {
      if (r.flags.verb_unknown) ++verb_unknown;
      if (r.flags.has_trivial_entity_type) ++trivial;
    }
    split_summary[to_string(split)] = {{"prompts", records.size()},
                                       {"verb_unknown", verb_unknown},
                                       {"trivial_entity_type", trivial}};
  }
  result.summary = {{"mode", to_string(config.mode)}, {"splits", split_summary}};
  update_manifest(config, "render", {config.enriched_path()}, result.artifacts,
                  result.summary);
  return result;
}

StageResult do_train(const PipelineConfig& config) {
  std::string train_path = config.prompts_path(Split::train);
  require_input("train", train_path);
  auto train_records = read_prompts(train_path);

  std::string dev_path = config.prompts_path(Split::dev);
  std::vector<PromptRecord> dev_records;
  std::vector<DataFingerprint> fingerprints;
  fingerprints.push_back({train_path, sha256_file_hex(train_path), train_records.size()});
  if (fs::exists(dev_path)) {
    dev_records = read_prompts(dev_path);
    fingerprints.push_back({dev_path, sha256_file_hex(dev_path), dev_records.size()});
  }

  auto tuned = fine_tune(train_records, dev_records, config.train);

  std::string run_root =
      config.run_root.empty() ? (fs::path(config.workdir) / "runs").string() : config.run_root;
  std::string run_dir = write_run(run_root, tuned.model, tuned.log, config.train,
                                  config.mode, fingerprints);

  StageResult result;
  result.artifacts.push_back((fs::path(run_dir) / "manifest.json").string());
  result.artifacts.push_back((fs::path(run_dir) / "model.bin").string());
  json last = tuned.log.epochs.empty() ? json(nullptr)
                                       : json{{"train_loss", tuned.log.epochs.back().train_loss},
                                              {"train_accuracy",
                                               tuned.log.epochs.back().train_accuracy}};
  result.summary = {{"run_dir", run_dir},
                    {"epochs", config.train.epochs},
                    {"final", last},
                    {"truncated_train", tuned.log.truncated_train},
                    {"truncated_dev", tuned.log.truncated_dev}};
  std::vector<std::string> inputs{train_path};
  if (fs::exists(dev_path)) inputs.push_back(dev_path);
  update_manifest(config, "train", inputs, result.artifacts, result.summary);
  return result;
}

std::string last_run_manifest(const PipelineConfig& config) {
  std::string path = config.pipeline_manifest_path();
  if (!fs::exists(path)) return "";
  json manifest = json::parse(read_file(path), nullptr, false);
  if (manifest.is_discarded() || !manifest.contains("train")) return "";
  return manifest["train"]["summary"].value("run_dir", "") + "/manifest.json";
}

StageResult do_evaluate(const PipelineConfig& config) {
  std::string manifest_path = config.eval_run_manifest;
  if (manifest_path.empty()) manifest_path = last_run_manifest(config);
  require_input("evaluate", manifest_path);

  std::string test_path = config.eval_test_prompts;
  if (test_path.empty()) test_path = config.prompts_path(Split::test);
  require_input("evaluate", test_path);

  LoadedRun run = load_run(manifest_path);
  auto records = read_prompts(test_path);
  if (records.empty()) throw DataError("evaluate: no prompt records in " + test_path);
  auto predictions = run.model.predict(records);

  auto report_for = [&](const std::vector<std::size_t>& idx) {
    std::vector<Prediction> preds;
    std::vector<int> golds;
    std::vector<ScoredRecord> scored;
    for (auto i : idx) {
      preds.push_back(predictions[i]);
      golds.push_back(records[i].label);
      scored.push_back({records[i], predictions[i], records[i].label});
    }
    json j;
    j["metrics"] = metrics_to_json(compute_metrics(preds, golds));
    j["error_analysis"] = error_analysis_to_json(error_analysis(scored));
    j["n"] = idx.size();
    return j;
  };

  std::vector<std::size_t> all_idx(records.size());
  std::map<DatasetId, std::vector<std::size_t>> by_dataset;
  for (std::size_t i = 0; i < records.size(); ++i) {
    all_idx[i] = i;
    by_dataset[records[i].dataset].push_back(i);
  }

  json report;
  report["mode"] = to_string(run.mode);
  report["encoder_id"] = run.config.encoder_id;
  report["run_manifest"] = manifest_path;
  report["test_prompts"] = test_path;
  report["overall"] = report_for(all_idx);
  report["by_dataset"] = json::object();
  for (const auto& [dataset, idx] : by_dataset)
    report["by_dataset"][to_string(dataset)] = report_for(idx);

  std::size_t truncated = 0;
  for (const auto& p : predictions)
    if (p.truncated) ++truncated;
  report["truncated"] = truncated;

  // Persist per-record predictions so any metric is recomputable offline.
  std::vector<json> pred_records;
  pred_records.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    pred_records.push_back({{"score", predictions[i].score},
                            {"label", predictions[i].label},
                            {"gold", records[i].label},
                            {"dataset", to_string(records[i].dataset)},
                            {"truncated", predictions[i].truncated},
                            {"flags",
                             {{"verb_unknown", records[i].flags.verb_unknown},
                              {"subject_unknown", records[i].flags.subject_unknown},
                              {"object_unknown", records[i].flags.object_unknown},
                              {"has_trivial_entity_type",
                               records[i].flags.has_trivial_entity_type}}}});
  }
  std::string predictions_path =
      (fs::path(config.workdir) / ("predictions." + to_string(run.mode) + ".jsonl")).string();
  write_jsonl(predictions_path, pred_records);
  atomic_write_file(config.report_path(), report.dump(2) + "\n");

  StageResult result;
  result.artifacts.push_back(config.report_path());
  result.artifacts.push_back(predictions_path);
  result.summary = report["overall"];
  update_manifest(config, "evaluate", {manifest_path, test_path}, result.artifacts,
                  result.summary);
  return result;
}

StageResult do_analyze(const PipelineConfig& config) {
  std::string input = config.analyze_events;
  if (input.empty())
    input = fs::exists(config.augmented_path()) ? config.augmented_path()
                                                : config.events_path();
  require_input("analyze", input);
  DatasetBundle all = read_events(input);
  DatasetBundle selected;
  for (const auto& e : all.events)
    if (e.split == config.analyze.split) selected.events.push_back(e);

  std::set<std::string> stop_list(config.analyze.stop_list.begin(),
                                  config.analyze.stop_list.end());
  FrequencyTable plausible = top_words(selected, 1, config.analyze.top_k, stop_list);
  FrequencyTable implausible = top_words(selected, 0, config.analyze.top_k, stop_list);

  json out;
  out["split"] = to_string(config.analyze.split);
  out["top_k"] = config.analyze.top_k;
  out["plausible"] = frequency_to_json(plausible);
  out["implausible"] = frequency_to_json(implausible);

  StageResult result;
  std::string tag = to_string(config.analyze.split);
  std::vector<std::string> inputs{input};

  if (!config.analyze.vectors.empty()) {
    require_input("analyze", config.analyze.vectors);
    inputs.push_back(config.analyze.vectors);
    FixtureWordVectors vectors(config.analyze.vectors);
    SimilarityMatrix matrix = label_similarity(plausible, implausible, vectors);
    out["mean_cross_similarity"] = matrix.mean_cross_similarity();
    out["skipped_words"] = matrix.skipped;
    std::string csv_path =
        (fs::path(config.workdir) / ("similarity." + tag + ".csv")).string();
    atomic_write_file(csv_path, matrix.to_csv());
    result.artifacts.push_back(csv_path);
  } else {
    std::cerr << "warning: analyze: no word-vector file configured, similarity skipped\n";
  }

  if (config.analyze.render_svg) {
    for (const auto* table : {&plausible, &implausible}) {
      std::string svg_path =
          (fs::path(config.workdir) /
           ("wordcloud." + tag + (table->label == 1 ? ".plausible" : ".implausible") + ".svg"))
              .string();
      atomic_write_file(svg_path, frequency_to_svg(*table));
      result.artifacts.push_back(svg_path);
    }
  }

  std::string json_path = (fs::path(config.workdir) / ("analysis." + tag + ".json")).string();
  atomic_write_file(json_path, out.dump(2) + "\n");
  result.artifacts.insert(result.artifacts.begin(), json_path);
  result.summary = {{"plausible_words", plausible.entries.size()},
                    {"implausible_words", implausible.entries.size()}};
  if (out.contains("mean_cross_similarity"))
    result.summary["mean_cross_similarity"] = out["mean_cross_similarity"];
  update_manifest(config, "analyze", inputs, result.artifacts, result.summary);
  return result;
}

}  // namespace

StageResult run_stage(Stage stage, const PipelineConfig& config) {
  fs::create_directories(config.workdir);
  switch (stage) {
    case Stage::ingest: return do_ingest(config);
    case Stage::augment: return do_augment(config);
    case Stage::enrich: return do_enrich(config);
    case Stage::render: return do_render(config);
    case Stage::train: return do_train(config);
    case Stage::evaluate: return do_evaluate(config);
    case Stage::analyze: return do_analyze(config);
  }
  throw UsageError("unhandled stage");
}

}  // namespace sempl
