#include <doctest.h>

#include <filesystem>
#include <map>

#include "sempl/errors.hpp"
#include "sempl/pipeline.hpp"
#include "sempl/util.hpp"

using namespace sempl;
namespace fs = std::filesystem;

namespace {

const std::string kData = SEMPL_TEST_DATA_DIR;

struct Workspace {
  fs::path root;

  Workspace() {
    root = fs::temp_directory_path() / "sempl_pipeline_test";
    fs::remove_all(root);
    fs::create_directories(root / "raw");

    atomic_write_file((root / "raw" / "base.csv").string(),
                      "subject,verb,object,label\n"
                      "man,eat,apple,1\n"
                      "man,eat,bread,1\n"
                      "dog,chases,cat,1\n"
                      "bird,builds,nest,1\n"
                      "cook,bakes,bread,1\n"
                      "stone,eat,dog,0\n"
                      "man,eat,stone,0\n");
    atomic_write_file((root / "raw" / "pool.csv").string(),
                      "subject,verb,object,label\n"
                      "cloud,signs,contract,0\n"
                      "idea,paints,fence,0\n"
                      "spoon,argues,theorem,0\n"
                      "stone,drinks,tea,0\n"
                      "lamp,sings,song,0\n");
    atomic_write_file((root / "raw" / "test.csv").string(),
                      "subject,verb,object,label\n"
                      "trader,ensures,strategy,1\n"
                      "hook,wins,role,0\n"
                      "option,robs,accusation,0\n");
  }

  PipelineConfig config() const {
    PipelineConfig c;
    c.workdir = (root / "out").string();
    SourceSpec train{(root / "raw" / "base.csv").string(), DatasetId::PEP3K, Split::train, {}};
    SourceSpec test{(root / "raw" / "test.csv").string(), DatasetId::PAP, Split::test, {}};
    c.sources = {train, test};
    SourceSpec pool{(root / "raw" / "pool.csv").string(), DatasetId::PAP, Split::train, {}};
    c.pool_sources = {pool};
    c.augment_seed = 5;
    c.providers = ProviderKind::fixture;
    c.entity_fixture = kData + "/entity_types.jsonl";
    c.event_fixture = kData + "/event_types.jsonl";
    c.mode = PromptMode::evt_ent;
    c.train.encoder_id = "compact-16x1";
    c.train.epochs = 2;
    c.train.batch_size = 4;
    c.train.learning_rate = 3e-3;
    c.train.warmup_steps = 4;
    c.train.max_sequence_length = 128;
    c.train.seed = 12;
    c.analyze.top_k = 5;
    c.analyze.vectors = kData + "/vectors_small.txt";
    c.analyze.split = Split::train;
    return c;
  }
};

std::map<std::string, std::string> artifact_bytes(const PipelineConfig& c) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(c.workdir)) {
    if (!entry.is_regular_file()) continue;
    out[entry.path().string()] = read_file(entry.path().string());
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("stages run end to end on the fixture workspace") {
  Workspace ws;
  PipelineConfig config = ws.config();

  auto ingest = run_stage(Stage::ingest, config);
  REQUIRE(fs::exists(config.events_path()));
  CHECK(ingest.summary["splits"]["train"]["events"] == 7);
  CHECK(ingest.summary["splits"]["test"]["events"] == 3);

  auto augment = run_stage(Stage::augment, config);
  CHECK(augment.summary["train_after"]["plausible"] == 5);
  CHECK(augment.summary["train_after"]["implausible"] == 5);
  DatasetBundle augmented = read_events(config.augmented_path());
  CHECK(augmented.counts(Split::test).total() == 3);  // test split untouched

  auto enrich = run_stage(Stage::enrich, config);
  CHECK(enrich.summary["events"] == 13);
  CHECK(enrich.summary["with_subject_types"] == 2);  // trader and hook
  CHECK(enrich.summary["with_verb_type"] == 1);      // robs

  run_stage(Stage::render, config);
  REQUIRE(fs::exists(config.prompts_path(Split::train)));
  REQUIRE(fs::exists(config.prompts_path(Split::test)));

  // The first test prompt is the trader golden.
  auto test_prompts = read_prompts(config.prompts_path(Split::test));
  REQUIRE(test_prompts.size() == 3);
  std::string golden = read_file(kData + "/golden/trader_evt_ent.txt");
  if (!golden.empty() && golden.back() == '\n') golden.pop_back();
  CHECK(test_prompts[0].prompt == golden);
  CHECK(test_prompts[0].flags.verb_unknown);
  CHECK(test_prompts[1].flags.has_trivial_entity_type);

  auto train = run_stage(Stage::train, config);
  std::string run_dir = train.summary["run_dir"].get<std::string>();
  REQUIRE(fs::exists(fs::path(run_dir) / "manifest.json"));

  auto evaluate = run_stage(Stage::evaluate, config);
  REQUIRE(fs::exists(config.report_path()));
  json report = json::parse(read_file(config.report_path()));
  CHECK(report["overall"]["n"] == 3);
  CHECK(report["by_dataset"].contains("pap"));
  CHECK(report["overall"]["metrics"].contains("auc"));
  CHECK(report["overall"]["error_analysis"].contains("wrong_total"));

  auto analyze = run_stage(Stage::analyze, config);
  CHECK(fs::exists((fs::path(config.workdir) / "analysis.train.json").string()));
  CHECK(fs::exists((fs::path(config.workdir) / "similarity.train.csv").string()));
  CHECK(analyze.summary.contains("mean_cross_similarity"));

  // pipeline manifest has an entry per stage
  json manifest = json::parse(read_file(config.pipeline_manifest_path()));
  for (const char* stage : {"ingest", "augment", "enrich", "render", "train", "evaluate",
                            "analyze"})
    CHECK(manifest.contains(stage));
}

TEST_CASE("stages are idempotent: reruns produce byte-identical artifacts") {
  Workspace ws;
  PipelineConfig config = ws.config();
  for (Stage s : {Stage::ingest, Stage::augment, Stage::enrich, Stage::render,
                  Stage::train, Stage::evaluate})
    run_stage(s, config);
  auto first = artifact_bytes(config);
  REQUIRE(first.size() > 5);

  for (Stage s : {Stage::ingest, Stage::augment, Stage::enrich, Stage::render,
                  Stage::train, Stage::evaluate})
    run_stage(s, config);
  auto second = artifact_bytes(config);

  REQUIRE(first.size() == second.size());
  for (const auto& [path, bytes] : first) {
    INFO("artifact: " << path);
    CHECK(second.at(path) == bytes);
  }
}

TEST_CASE("missing inputs are usage errors naming the file") {
  Workspace ws;
  PipelineConfig config = ws.config();

  SUBCASE("ingest with a missing source") {
    config.sources[0].path = (ws.root / "raw" / "nope.csv").string();
    CHECK_THROWS_WITH_AS(run_stage(Stage::ingest, config), doctest::Contains("nope.csv"),
                         UsageError);
  }
  SUBCASE("augment before ingest") {
    CHECK_THROWS_WITH_AS(run_stage(Stage::augment, config),
                         doctest::Contains("events.jsonl"), UsageError);
  }
  SUBCASE("evaluate before train") {
    CHECK_THROWS_AS(run_stage(Stage::evaluate, config), UsageError);
  }
  SUBCASE("enrich in fixture mode without fixtures") {
    run_stage(Stage::ingest, config);
    run_stage(Stage::augment, config);
    config.entity_fixture = (ws.root / "missing.jsonl").string();
    CHECK_THROWS_AS(run_stage(Stage::enrich, config), UsageError);
  }
}

TEST_CASE("config files parse with relative paths") {
  Workspace ws;
  json j;
  j["workdir"] = "out";
  j["sources"] = json::array({{{"path", "raw/base.csv"},
                               {"dataset", "pep3k"},
                               {"split", "train"},
                               {"delimiter", "comma"}}});
  j["providers"] = "stub";
  j["mode"] = "baseline";
  j["train"] = {{"epochs", 1}, {"encoder_id", "compact-16x1"}};
  std::string path = (ws.root / "config.json").string();
  atomic_write_file(path, j.dump(2));

  PipelineConfig config = PipelineConfig::from_file(path);
  CHECK(config.workdir == (ws.root / "out").lexically_normal().string());
  REQUIRE(config.sources.size() == 1);
  CHECK(config.sources[0].path == (ws.root / "raw" / "base.csv").lexically_normal().string());
  CHECK(config.mode == PromptMode::baseline);
  CHECK(config.train.epochs == 1);

  run_stage(Stage::ingest, config);
  CHECK(fs::exists(config.events_path()));
}

TEST_SUITE_END();
