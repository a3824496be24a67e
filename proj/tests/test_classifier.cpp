#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "generators.hpp"
#include "sempl/classifier.hpp"
#include "sempl/errors.hpp"

using namespace sempl;

namespace {

PromptRecord prompt_of(const std::string& text, int label) {
  PromptRecord r;
  r.prompt = text;
  r.label = label;
  r.mode = PromptMode::baseline;
  return r;
}

// Eight separable records; duplicated to taste by the callers.
std::vector<PromptRecord> separable_records() {
  return {
      prompt_of("Man eats apple.", 1),      prompt_of("Dog chases cat.", 1),
      prompt_of("Bird builds nest.", 1),    prompt_of("Cook bakes bread.", 1),
      prompt_of("Stone eats cloud.", 0),    prompt_of("Idea paints fence.", 0),
      prompt_of("Cloud signs contract.", 0), prompt_of("Spoon argues theorem.", 0),
  };
}

TrainConfig small_config() {
  TrainConfig c = compact_desk_config();
  c.encoder_id = "compact-16x1";
  c.max_sequence_length = 32;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_SUITE_BEGIN("classifier");

TEST_CASE("tokenizer keeps markers atomic and peels punctuation") {
  MarkerTokenizer tok(2048);
  auto tokens = tok.tokenize("type [STYPE]person[/STYPE], which means [DEF]a b[/DEF].");
  std::vector<std::string> expected{"type", "[STYPE]", "person", "[/STYPE]", ",",
                                    "which", "means", "[DEF]", "a", "b", "[/DEF]", "."};
  CHECK(tokens == expected);

  auto marked = tok.tokenize("<M> Trader </M> ensures strategy.");
  std::vector<std::string> expected2{"<M>", "Trader", "</M>", "ensures", "strategy", "."};
  CHECK(marked == expected2);
}

TEST_CASE("tokenizer encoding is stable and truncates") {
  MarkerTokenizer tok(2048);
  bool truncated = false;
  auto a = tok.encode("Man eats apple.", 32, &truncated);
  auto b = tok.encode("Man eats apple.", 32, &truncated);
  CHECK(a == b);
  CHECK(a[0] == MarkerTokenizer::kClsId);
  CHECK_FALSE(truncated);

  auto cut = tok.encode("one two three four five six seven eight nine ten", 4, &truncated);
  CHECK(cut.size() == 4);
  CHECK(truncated);

  CHECK_THROWS_AS(tok.encode("   ", 8, &truncated), DataError);
}

TEST_CASE("encoder registry") {
  CHECK(parse_encoder_id("compact").dim == 32);
  auto spec = parse_encoder_id("compact-64x2");
  CHECK(spec.dim == 64);
  CHECK(spec.layers == 2);
  CHECK(spec.heads == 8);
  CHECK_THROWS_AS(parse_encoder_id("compact-7x1"), UsageError);
  CHECK_THROWS_AS(parse_encoder_id("roberta-large"), EnvError);
}

TEST_CASE("analytic gradients match finite differences") {
  TrainConfig config = small_config();
  Model model = zero_shot_init(config);

  const std::string prompt =
      "[EVT] Man eats apple. [/EVT]\nThe verb \"eats\" has an unknown type.";
  const int gold = 1;

  double loss0 = 0.0;
  std::vector<double> analytic = detail::loss_gradients(model, prompt, gold, &loss0);
  auto& params = detail::model_params(model);
  REQUIRE(params.size() == analytic.size());

  // Check every parameter the example actually touches, plus a spread of
  // quiescent ones.
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    if (std::abs(analytic[i]) > 1e-12) indices.push_back(i);
  REQUIRE(indices.size() > 100);
  std::mt19937_64 rng(5);
  if (indices.size() > 400) {
    deterministic_shuffle(indices, rng);
    indices.resize(400);
  }
  for (int i = 0; i < 50; ++i) indices.push_back(bounded_rand(rng, analytic.size()));

  const double h = 1e-6;
  for (std::size_t idx : indices) {
    double saved = params[idx];
    params[idx] = saved + h;
    double loss_plus = 0.0;
    detail::loss_gradients(model, prompt, gold, &loss_plus);
    params[idx] = saved - h;
    double loss_minus = 0.0;
    detail::loss_gradients(model, prompt, gold, &loss_minus);
    params[idx] = saved;

    double fd = (loss_plus - loss_minus) / (2.0 * h);
    double denom = std::max({std::abs(fd), std::abs(analytic[idx]), 1e-6});
    CHECK(std::abs(fd - analytic[idx]) / denom < 1e-4);
  }
}

TEST_CASE("overfits a small separable set to accuracy 1.0") {
  std::vector<PromptRecord> train;
  for (int copy = 0; copy < 4; ++copy)
    for (const auto& r : separable_records()) train.push_back(r);

  TrainConfig config = compact_desk_config();
  config.seed = 13;
  auto result = fine_tune(train, {}, config);

  REQUIRE(result.log.epochs.size() == static_cast<std::size_t>(config.epochs));
  CHECK(result.log.epochs.back().train_accuracy == 1.0);

  auto preds = predict_batch(result.model, train);
  REQUIRE(preds.size() == train.size());
  for (std::size_t i = 0; i < preds.size(); ++i) CHECK(preds[i].label == train[i].label);
}

TEST_CASE("training loss is non-increasing over the first three epochs") {
  std::vector<PromptRecord> train;
  for (int copy = 0; copy < 4; ++copy)
    for (const auto& r : separable_records()) train.push_back(r);
  TrainConfig config = compact_desk_config();
  config.epochs = 3;
  config.seed = 21;
  auto result = fine_tune(train, {}, config);
  REQUIRE(result.log.epochs.size() == 3);
  CHECK(result.log.epochs[1].train_loss <= result.log.epochs[0].train_loss);
  CHECK(result.log.epochs[2].train_loss <= result.log.epochs[1].train_loss);
}

TEST_CASE("fine_tune is deterministic given the seed") {
  auto train = separable_records();
  TrainConfig config = small_config();
  config.epochs = 3;
  auto a = fine_tune(train, {}, config);
  auto b = fine_tune(train, {}, config);
  auto pa = predict_batch(a.model, train);
  auto pb = predict_batch(b.model, train);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].label == pb[i].label);
    CHECK(pa[i].score == pb[i].score);
  }
  CHECK(a.log.epochs.back().train_loss == b.log.epochs.back().train_loss);
}

TEST_CASE("dev metrics are logged per epoch") {
  auto train = separable_records();
  std::vector<PromptRecord> dev(train.begin(), train.begin() + 4);
  TrainConfig config = small_config();
  config.epochs = 2;
  auto result = fine_tune(train, dev, config);
  REQUIRE(result.log.epochs.size() == 2);
  REQUIRE(result.log.epochs[0].dev.has_value());
  CHECK(result.log.epochs[0].dev->n == 4);
}

TEST_CASE("fine_tune input validation") {
  TrainConfig config = small_config();
  SUBCASE("epochs below 1") {
    config.epochs = 0;
    CHECK_THROWS_AS(fine_tune(separable_records(), {}, config), UsageError);
  }
  SUBCASE("empty training set") {
    CHECK_THROWS_AS(fine_tune({}, {}, config), DataError);
  }
  SUBCASE("single-label training set") {
    std::vector<PromptRecord> one_sided{prompt_of("A b c.", 1), prompt_of("D e f.", 1)};
    CHECK_THROWS_AS(fine_tune(one_sided, {}, config), DataError);
  }
  SUBCASE("max sequence length too small") {
    config.max_sequence_length = 8;
    CHECK_THROWS_AS(fine_tune(separable_records(), {}, config), UsageError);
  }
}

TEST_CASE("predict_batch basics") {
  TrainConfig config = small_config();
  Model model = zero_shot_init(config);

  CHECK(predict_batch(model, {}).empty());

  std::mt19937_64 rng(3310);
  std::vector<PromptRecord> prompts;
  for (int i = 0; i < 40; ++i)
    prompts.push_back(render_prompt(gen::enriched_event(rng), PromptMode::evt_ent));
  auto preds = predict_batch(model, prompts);
  REQUIRE(preds.size() == prompts.size());
  for (const auto& p : preds) {
    CHECK(p.score >= 0.0);
    CHECK(p.score <= 1.0);
    CHECK(p.label == (p.score >= 0.5 ? 1 : 0));
  }

  Model uninitialized;
  CHECK_THROWS_AS(predict_batch(uninitialized, prompts), UsageError);
}

TEST_CASE("truncation is flagged, counted, and does not abort") {
  std::string longtext;
  for (int i = 0; i < 200; ++i) longtext += "word" + std::to_string(i) + " ";
  std::vector<PromptRecord> train{
      prompt_of(longtext + "end.", 1), prompt_of("Short one.", 0),
      prompt_of("Another short.", 1), prompt_of(longtext + "tail.", 0)};
  TrainConfig config = small_config();
  config.epochs = 1;
  config.max_sequence_length = 16;
  auto result = fine_tune(train, {}, config);
  CHECK(result.log.truncated_train == 2);
  auto preds = predict_batch(result.model, train);
  CHECK(preds[0].truncated);
  CHECK_FALSE(preds[1].truncated);
}

TEST_CASE("zero-shot head is seeded and untrained") {
  TrainConfig config = compact_desk_config();
  config.seed = 4242;

  std::mt19937_64 rng(2025);
  std::vector<PromptRecord> prompts;
  for (int i = 0; i < 50; ++i)
    prompts.push_back(render_prompt(gen::enriched_event(rng), PromptMode::evt_ent));

  Model a = zero_shot_init(config);
  Model b = zero_shot_init(config);
  auto pa = predict_batch(a, prompts);
  auto pb = predict_batch(b, prompts);
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].score == pb[i].score);

  config.seed = 4243;  // different seed may move predictions; must not crash
  Model c = zero_shot_init(config);
  predict_batch(c, prompts);
}

TEST_CASE("zero-shot accuracy sits in the chance band on a balanced set") {
  std::mt19937_64 rng(11011);
  std::vector<PromptRecord> prompts;
  for (int i = 0; i < 100; ++i) {
    EnrichedEvent e = gen::enriched_event(rng);
    e.event.label = i < 50 ? 1 : 0;
    prompts.push_back(render_prompt(e, PromptMode::evt_ent));
  }
  TrainConfig config = compact_desk_config();
  config.seed = 97;
  Model model = zero_shot_init(config);
  auto preds = predict_batch(model, prompts);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i].label == prompts[i].label) ++correct;
  double acc = static_cast<double>(correct) / preds.size();
  CHECK(acc >= 0.35);
  CHECK(acc <= 0.65);
}

TEST_CASE("model save/load round-trips predictions") {
  auto train = separable_records();
  TrainConfig config = small_config();
  config.epochs = 2;
  auto result = fine_tune(train, {}, config);

  namespace fs = std::filesystem;
  std::string path =
      (fs::temp_directory_path() / "sempl_classifier_test" / "model.bin").string();
  result.model.save(path);
  Model loaded = Model::load(path);
  CHECK(loaded.encoder_id() == config.encoder_id);

  auto before = predict_batch(result.model, train);
  auto after = predict_batch(loaded, train);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].score == after[i].score);
}

TEST_CASE("run directory carries manifest and reloads") {
  auto train = separable_records();
  TrainConfig config = small_config();
  config.epochs = 2;
  auto result = fine_tune(train, {}, config);

  namespace fs = std::filesystem;
  std::string root = (fs::temp_directory_path() / "sempl_run_test").string();
  fs::remove_all(root);
  std::string run_dir = write_run(root, result.model, result.log, config,
                                  PromptMode::baseline, {{"train.jsonl", "abc123", 8}});
  CHECK(fs::exists(fs::path(run_dir) / "manifest.json"));
  CHECK(fs::exists(fs::path(run_dir) / "model.bin"));

  LoadedRun run = load_run((fs::path(run_dir) / "manifest.json").string());
  CHECK(run.config.encoder_id == config.encoder_id);
  CHECK(run.mode == PromptMode::baseline);
  CHECK(run.manifest["markers_atomic"] == true);
  CHECK(run.manifest["epochs"].size() == 2);

  auto before = predict_batch(result.model, train);
  auto after = predict_batch(run.model, train);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].score == after[i].score);
}

TEST_CASE("mode presets carry the published hyperparameters") {
  TrainConfig evt_ent = default_config_for_mode(PromptMode::evt_ent);
  CHECK(evt_ent.epochs == 10);
  CHECK(evt_ent.batch_size == 16);
  CHECK(evt_ent.learning_rate == 1e-5);
  CHECK(evt_ent.weight_decay == 0.01);
  CHECK(evt_ent.warmup_steps == 10);

  CHECK(default_config_for_mode(PromptMode::ent).batch_size == 16);
  CHECK(default_config_for_mode(PromptMode::evt).warmup_steps == 100);
  CHECK(default_config_for_mode(PromptMode::baseline).batch_size == 8);
  CHECK(default_config_for_mode(PromptMode::baseline).warmup_steps == 10);
}

TEST_SUITE_END();
