#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sempl/evaluation.hpp"
#include "sempl/prediction.hpp"
#include "sempl/templating.hpp"

namespace sempl {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 1e-5;
  double weight_decay = 0.01;
  int warmup_steps = 10;
  std::uint64_t seed = 42;
  int max_sequence_length = 512;
  std::string encoder_id = "compact";

  void validate() const;  // UsageError on violated bounds
};

// Published per-mode presets: 10 epochs, lr 1e-5, weight decay 0.01
// throughout; batch 16 except the fine-tuned baseline (8); warmup 10 except
// the event-only configuration (100).
TrainConfig default_config_for_mode(PromptMode mode);

// Desk-scale preset for the compact encoder (higher learning rate, small
// warmup); used by smoke tests and the stub pipeline.
TrainConfig compact_desk_config();

// ---------------------------------------------------------------------------
// Encoder registry. "compact" (optionally "compact-<dim>x<layers>") is the
// self-contained trainable encoder; any other id is treated as an external
// checkpoint this build cannot provide and raises EnvError.

struct CompactEncoderSpec {
  int dim = 32;
  int layers = 2;
  int heads = 4;
  int ffn = 64;
  int vocab_buckets = 2048;
  int max_positions = 512;

  int vocab_size() const;
  bool operator==(const CompactEncoderSpec&) const = default;
};

CompactEncoderSpec parse_encoder_id(const std::string& encoder_id);

// ---------------------------------------------------------------------------
// Tokenizer: whitespace + punctuation splitting with the twelve reserved
// markers kept atomic and pinned to fixed vocabulary ids; remaining tokens
// are hashed into a fixed bucket space.

class MarkerTokenizer {
 public:
  explicit MarkerTokenizer(int vocab_buckets);

  static constexpr int kPadId = 0;
  static constexpr int kClsId = 1;

  std::vector<std::string> tokenize(const std::string& text) const;
  // CLS-prefixed ids, right-truncated to max_len; *truncated reports overflow.
  std::vector<int> encode(const std::string& text, int max_len, bool* truncated) const;

  int vocab_size() const;

 private:
  int buckets_;
};

// ---------------------------------------------------------------------------
// Model handle. Base encoder weights are a deterministic function of the
// encoder id, standing in for a pretrained checkpoint at desk scale; the
// classification head is seeded per run.

class CompactModel;  // parameters + forward/backward, defined in the .cpp

class Model {
 public:
  Model();  // uninitialized handle; predict raises UsageError
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  bool initialized() const;
  const std::string& encoder_id() const;
  const CompactEncoderSpec& spec() const;
  int max_sequence_length() const;

  std::vector<Prediction> predict(const std::vector<PromptRecord>& prompts) const;

  void save(const std::string& path) const;
  static Model load(const std::string& path);

 private:
  friend Model zero_shot_init(const TrainConfig&);
  friend struct FineTuner;
  std::unique_ptr<CompactModel> impl_;
  std::string encoder_id_;
  int max_sequence_length_ = 512;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<MetricsReport> dev;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  std::size_t truncated_train = 0;
  std::size_t truncated_dev = 0;
};

struct FineTuneResult {
  Model model;
  TrainingLog log;
};

// Trains encoder and head with AdamW (decoupled weight decay, linear warmup
// then constant rate). Deterministic given (data, config, seed). Requires
// both labels in the training set.
FineTuneResult fine_tune(const std::vector<PromptRecord>& train,
                         const std::vector<PromptRecord>& dev, const TrainConfig& config);

std::vector<Prediction> predict_batch(const Model& model,
                                      const std::vector<PromptRecord>& prompts);

// Pretrained-identity encoder plus a freshly seeded, untrained head.
Model zero_shot_init(const TrainConfig& config);

// ---------------------------------------------------------------------------
// Run directory: manifest.json + model.bin, directory named by the hash of
// the manifest core (config + data fingerprints).

struct DataFingerprint {
  std::string path;
  std::string sha256;
  std::size_t records = 0;
};

std::string write_run(const std::string& run_root, const Model& model,
                      const TrainingLog& log, const TrainConfig& config, PromptMode mode,
                      const std::vector<DataFingerprint>& data);

struct LoadedRun {
  Model model;
  TrainConfig config;
  PromptMode mode = PromptMode::baseline;
  json manifest;
};

LoadedRun load_run(const std::string& manifest_path);

json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j);

namespace detail {
// Direct access to the flat parameter vector and a single-example gradient
// pass; used by the finite-difference checks.
std::vector<double>& model_params(Model& m);
std::vector<double> loss_gradients(Model& m, const std::string& prompt, int gold,
                                   double* loss);
}  // namespace detail

}  // namespace sempl
