#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdqc/nn/checkpoint.hpp"
#include "sdqc/nn/layers.hpp"
#include "sdqc/textprep.hpp"

namespace sdqc {

enum class ModelKind : std::uint32_t { MicroBert = 1, FeaturesNN = 2, BiLstmSelfAtt = 3 };

std::string_view model_kind_name(ModelKind k);  // "micro_bert", "features_nn", "bilstm_selfatt"
ModelKind parse_model_kind(std::string_view s);

// One classification example: the pair encoding for the sequence models and
// the handcrafted features for FeaturesNN.
struct Example {
  std::string id;
  EncodedExample encoded;
  std::vector<double> features;
  std::optional<StanceLabel> label;
};

struct AttentionCapture {
  std::size_t layer = 0;
  std::size_t head = 0;
  nn::Tensor scores;  // QKᵀ/√d_k
  nn::Tensor probs;   // row softmax, padding columns 0
};

struct ClassifierOutput {
  std::array<double, kNumClasses> scores{};
  std::array<double, kNumClasses> probs{};
  std::vector<AttentionCapture> attention;
};

// Flat key=value lines, used for configs in checkpoints and on disk.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text);
std::string format_key_values(const KeyValues& kv);

class StanceModel {
 public:
  virtual ~StanceModel() = default;
  virtual ModelKind kind() const = 0;
  virtual std::string config_text() const = 0;
  // n×4 pre-softmax scores, recorded on the autodiff graph.
  virtual nn::Var forward_scores(std::span<const Example* const> batch, bool training) = 0;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 protected:
  nn::ParamStore params_;
};

// ---------------------------------------------------------------------------

struct MicroBertConfig {
  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int ff_dim = 256;
  int vocab_size = 2000;
  int max_len = 200;
  double dropout = 0.0;
  bool pretraining_heads = false;
  bool include_source = true;  // encoder ablation flags travel with the model
  bool include_previous = true;

  // bert-large-uncased sizes, kept as a documented reference preset.
  static MicroBertConfig full_scale();
  void validate() const;
  KeyValues to_kv() const;
  static MicroBertConfig from_kv(const KeyValues& kv);
};

struct MicroBertForwardOptions {
  bool capture_attention = false;
  std::size_t pad_to = 0;  // right-pad every example to this length and mask the padding
  bool training = false;
};

struct MicroBertOutput {
  nn::Var scores;                                     // n×4
  nn::Var pooled;                                     // n×d after dense+tanh
  std::vector<nn::Var> hidden;                        // per example, L×d final layer states
  std::vector<std::vector<AttentionCapture>> attention;  // per example, layer-major
};

class MicroBert final : public StanceModel {
 public:
  MicroBert(MicroBertConfig cfg, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::MicroBert; }
  std::string config_text() const override { return format_key_values(cfg_.to_kv()); }
  nn::Var forward_scores(std::span<const Example* const> batch, bool training) override;

  MicroBertOutput forward(std::span<const EncodedExample* const> batch, const MicroBertForwardOptions& opt);
  // Token logits (rows × V) for selected final-layer states; needs pretraining heads.
  nn::Var mlm_logits(const nn::Var& states) const;
  nn::Var nsp_logits(const nn::Var& pooled) const;

  const MicroBertConfig& config() const { return cfg_; }

 private:
  MicroBertConfig cfg_;
  nn::Var token_table_, segment_table_, position_table_;
  std::vector<nn::TransformerLayerParams> layers_;
  nn::Linear pooler_, classifier_;
  std::optional<nn::Linear> mlm_, nsp_;
  std::mt19937_64 dropout_rng_;
};

// ---------------------------------------------------------------------------

struct FeaturesNNConfig {
  int input_dim = 61;
  int hidden = 50;

  KeyValues to_kv() const;
  static FeaturesNNConfig from_kv(const KeyValues& kv);
};

class FeaturesNN final : public StanceModel {
 public:
  FeaturesNN(FeaturesNNConfig cfg, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::FeaturesNN; }
  std::string config_text() const override { return format_key_values(cfg_.to_kv()); }
  nn::Var forward_scores(std::span<const Example* const> batch, bool training) override;
  nn::Var forward_features(const nn::Var& features) const;

  const FeaturesNNConfig& config() const { return cfg_; }
  const nn::Linear& hidden_layer() const { return hidden_; }
  const nn::Linear& output_layer() const { return output_; }

 private:
  FeaturesNNConfig cfg_;
  nn::Linear hidden_, output_;
};

// ---------------------------------------------------------------------------

struct BiLstmSelfAttConfig {
  int vocab_size = 2000;
  int max_len = 200;
  int embed_dim = 64;
  int hidden = 64;         // per direction
  int hops = 4;            // attention rows r
  int attention_dim = 64;  // tanh scoring width
  bool include_source = true;
  bool include_previous = true;

  KeyValues to_kv() const;
  static BiLstmSelfAttConfig from_kv(const KeyValues& kv);
};

struct BiLstmSelfAttOutput {
  nn::Var scores;                       // n×4
  std::vector<nn::Tensor> attention;    // per example, r×L
};

class BiLstmSelfAtt final : public StanceModel {
 public:
  BiLstmSelfAtt(BiLstmSelfAttConfig cfg, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::BiLstmSelfAtt; }
  std::string config_text() const override { return format_key_values(cfg_.to_kv()); }
  nn::Var forward_scores(std::span<const Example* const> batch, bool training) override;
  BiLstmSelfAttOutput forward(std::span<const EncodedExample* const> batch, std::size_t pad_to = 0);

  const BiLstmSelfAttConfig& config() const { return cfg_; }
  const nn::BiLstmParams& encoder() const { return lstm_; }
  const nn::Var& embedding() const { return embedding_; }
  const nn::Var& score_hidden() const { return ws1_; }
  const nn::Var& score_output() const { return ws2_; }
  const nn::Linear& classifier() const { return classifier_; }

 private:
  BiLstmSelfAttConfig cfg_;
  nn::Var embedding_;
  nn::BiLstmParams lstm_;
  nn::Var ws1_, ws2_;
  nn::Linear classifier_;
};

// ---------------------------------------------------------------------------

std::vector<ClassifierOutput> predict(StanceModel& model, std::span<const Example* const> batch);
std::array<double, kNumClasses> softmax4(const std::array<double, kNumClasses>& scores);
// Argmax with ties going to the lowest class code.
int argmax4(const std::array<double, kNumClasses>& v);

nn::CheckpointData model_snapshot(const StanceModel& model);
std::unique_ptr<StanceModel> model_from_checkpoint(const nn::CheckpointData& ckpt);
std::unique_ptr<StanceModel> create_model(ModelKind kind, const KeyValues& config, std::uint64_t seed);

// Encoder settings implied by a sequence model's config (max_len and ablation flags).
EncoderConfig encoder_config_of(const StanceModel& model);

}  // namespace sdqc
