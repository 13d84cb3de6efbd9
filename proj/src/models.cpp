#include "sdqc/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sdqc/error.hpp"
#include "sdqc/numfmt.hpp"

namespace sdqc {

using nn::Var;

std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::MicroBert: return "micro_bert";
    case ModelKind::FeaturesNN: return "features_nn";
    case ModelKind::BiLstmSelfAtt: return "bilstm_selfatt";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "micro_bert") return ModelKind::MicroBert;
  if (s == "features_nn") return ModelKind::FeaturesNN;
  if (s == "bilstm_selfatt") return ModelKind::BiLstmSelfAtt;
  fail(ErrorCode::InvalidConfig, "unknown model kind '" + std::string(s) + "'");
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::MalformedDocument, "expected key=value, got '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

namespace {

int get_int(const KeyValues& kv, const char* key, int fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : static_cast<int>(parse_int(it->second));
}

double get_double(const KeyValues& kv, const char* key, double fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : parse_double(it->second);
}

bool get_bool(const KeyValues& kv, const char* key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  fail(ErrorCode::MalformedDocument, std::string("bad boolean for ") + key);
}

std::string b(bool v) { return v ? "true" : "false"; }

std::vector<unsigned char> padding_mask(const EncodedExample& ex, std::size_t real_len) {
  std::vector<unsigned char> mask(ex.size(), 0);
  for (std::size_t i = real_len; i < ex.size(); ++i) mask[i] = 1;
  return mask;
}

}  // namespace

// ---------------------------------------------------------------------------
// MicroBert

MicroBertConfig MicroBertConfig::full_scale() {
  MicroBertConfig c;
  c.layers = 24;
  c.hidden = 1024;
  c.heads = 16;
  c.ff_dim = 4096;
  c.vocab_size = 30522;
  c.max_len = 200;
  return c;
}

void MicroBertConfig::validate() const {
  if (layers < 1 || hidden < 1 || heads < 1 || ff_dim < 1 || vocab_size <= kNumSpecials || max_len < 8)
    fail(ErrorCode::InvalidConfig, "micro_bert sizes must be positive (vocab > specials, max_len >= 8)");
  if (hidden % heads != 0) fail(ErrorCode::InvalidConfig, "hidden size must be divisible by the head count");
  if (dropout < 0.0 || dropout >= 1.0) fail(ErrorCode::InvalidConfig, "dropout must be in [0,1)");
}

KeyValues MicroBertConfig::to_kv() const {
  return {{"layers", std::to_string(layers)},
          {"hidden", std::to_string(hidden)},
          {"heads", std::to_string(heads)},
          {"ff_dim", std::to_string(ff_dim)},
          {"vocab_size", std::to_string(vocab_size)},
          {"max_len", std::to_string(max_len)},
          {"dropout", format_double(dropout)},
          {"pretraining_heads", b(pretraining_heads)},
          {"include_source", b(include_source)},
          {"include_previous", b(include_previous)}};
}

MicroBertConfig MicroBertConfig::from_kv(const KeyValues& kv) {
  MicroBertConfig c;
  c.layers = get_int(kv, "layers", c.layers);
  c.hidden = get_int(kv, "hidden", c.hidden);
  c.heads = get_int(kv, "heads", c.heads);
  c.ff_dim = get_int(kv, "ff_dim", c.ff_dim);
  c.vocab_size = get_int(kv, "vocab_size", c.vocab_size);
  c.max_len = get_int(kv, "max_len", c.max_len);
  c.dropout = get_double(kv, "dropout", c.dropout);
  c.pretraining_heads = get_bool(kv, "pretraining_heads", c.pretraining_heads);
  c.include_source = get_bool(kv, "include_source", c.include_source);
  c.include_previous = get_bool(kv, "include_previous", c.include_previous);
  return c;
}

MicroBert::MicroBert(MicroBertConfig cfg, std::uint64_t seed) : cfg_(cfg), dropout_rng_(seed ^ 0xD1B54A32D192ED03ull) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const auto d = static_cast<std::size_t>(cfg_.hidden);
  token_table_ = params_.add_weight("embeddings.token", static_cast<std::size_t>(cfg_.vocab_size), d, rng);
  segment_table_ = params_.add_weight("embeddings.segment", 2, d, rng);
  position_table_ = params_.add_weight("embeddings.position", static_cast<std::size_t>(cfg_.max_len), d, rng);
  for (int l = 0; l < cfg_.layers; ++l)
    layers_.push_back(nn::TransformerLayerParams::create(params_, "encoder." + std::to_string(l), d,
                                                         static_cast<std::size_t>(cfg_.heads),
                                                         static_cast<std::size_t>(cfg_.ff_dim), rng));
  pooler_ = nn::Linear::create(params_, "pooler", d, d, rng);
  classifier_ = nn::Linear::create(params_, "classifier", d, kNumClasses, rng);
  if (cfg_.pretraining_heads) {
    mlm_ = nn::Linear::create(params_, "mlm.output", d, static_cast<std::size_t>(cfg_.vocab_size), rng);
    nsp_ = nn::Linear::create(params_, "nsp.output", d, 2, rng);
  }
}

MicroBertOutput MicroBert::forward(std::span<const EncodedExample* const> batch, const MicroBertForwardOptions& opt) {
  MicroBertOutput out;
  std::vector<Var> cls_rows;
  cls_rows.reserve(batch.size());
  for (const EncodedExample* raw : batch) {
    const std::size_t real_len = raw->size();
    if (real_len == 0) fail(ErrorCode::ConfigMismatch, "empty encoded example");
    const EncodedExample padded = opt.pad_to > real_len ? pad_to(*raw, opt.pad_to) : *raw;
    if (padded.size() > static_cast<std::size_t>(cfg_.max_len))
      fail(ErrorCode::ConfigMismatch, "example length " + std::to_string(padded.size()) + " exceeds model max_len " +
                                          std::to_string(cfg_.max_len));
    for (auto id : padded.token_ids)
      if (id < 0 || id >= cfg_.vocab_size)
        fail(ErrorCode::ConfigMismatch, "token id " + std::to_string(id) + " outside model vocabulary");
    const auto mask = padding_mask(padded, real_len);

    Var x = nn::embedding_sum(token_table_, segment_table_, position_table_, padded.token_ids, padded.segment_ids,
                              padded.position_ids);
    x = nn::dropout(x, cfg_.dropout, opt.training, dropout_rng_);
    std::vector<AttentionCapture> captures;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto res = nn::transformer_layer(x, layers_[l], mask, cfg_.dropout, opt.training, &dropout_rng_);
      x = res.output;
      if (opt.capture_attention)
        for (std::size_t h = 0; h < res.scores.size(); ++h)
          captures.push_back({l, h, std::move(res.scores[h]), std::move(res.probs[h])});
    }
    cls_rows.push_back(nn::slice_rows(x, 0, 1));
    out.hidden.push_back(x);
    out.attention.push_back(std::move(captures));
  }
  out.pooled = nn::tanh(pooler_(nn::concat_rows(cls_rows)));
  out.scores = classifier_(out.pooled);
  return out;
}

Var MicroBert::forward_scores(std::span<const Example* const> batch, bool training) {
  std::vector<const EncodedExample*> enc;
  enc.reserve(batch.size());
  for (const Example* e : batch) enc.push_back(&e->encoded);
  MicroBertForwardOptions opt;
  opt.training = training;
  return forward(enc, opt).scores;
}

Var MicroBert::mlm_logits(const Var& states) const {
  if (!mlm_) fail(ErrorCode::WrongModelKind, "model was built without pretraining heads");
  return (*mlm_)(states);
}

Var MicroBert::nsp_logits(const Var& pooled) const {
  if (!nsp_) fail(ErrorCode::WrongModelKind, "model was built without pretraining heads");
  return (*nsp_)(pooled);
}

// ---------------------------------------------------------------------------
// FeaturesNN

KeyValues FeaturesNNConfig::to_kv() const {
  return {{"input_dim", std::to_string(input_dim)}, {"hidden", std::to_string(hidden)}};
}

FeaturesNNConfig FeaturesNNConfig::from_kv(const KeyValues& kv) {
  FeaturesNNConfig c;
  c.input_dim = get_int(kv, "input_dim", c.input_dim);
  c.hidden = get_int(kv, "hidden", c.hidden);
  return c;
}

FeaturesNN::FeaturesNN(FeaturesNNConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.input_dim < 1 || cfg_.hidden < 1) fail(ErrorCode::InvalidConfig, "features_nn sizes must be positive");
  std::mt19937_64 rng(seed);
  hidden_ = nn::Linear::create(params_, "hidden", static_cast<std::size_t>(cfg_.input_dim),
                               static_cast<std::size_t>(cfg_.hidden), rng);
  output_ = nn::Linear::create(params_, "output", static_cast<std::size_t>(cfg_.hidden), kNumClasses, rng);
}

Var FeaturesNN::forward_features(const Var& features) const {
  if (features->cols() != static_cast<std::size_t>(cfg_.input_dim))
    fail(ErrorCode::DimensionMismatch, "feature width " + std::to_string(features->cols()) + " != " +
                                           std::to_string(cfg_.input_dim));
  return output_(nn::relu(hidden_(features)));
}

Var FeaturesNN::forward_scores(std::span<const Example* const> batch, bool) {
  const std::size_t f = static_cast<std::size_t>(cfg_.input_dim);
  nn::Tensor x(batch.size(), f);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->features.size() != f)
      fail(ErrorCode::DimensionMismatch, "example " + batch[i]->id + " has " +
                                             std::to_string(batch[i]->features.size()) + " features, model expects " +
                                             std::to_string(f));
    std::copy(batch[i]->features.begin(), batch[i]->features.end(),
              x.values.begin() + static_cast<std::ptrdiff_t>(i * f));
  }
  return forward_features(nn::constant(std::move(x)));
}

// ---------------------------------------------------------------------------
// BiLSTM + structured self-attention

KeyValues BiLstmSelfAttConfig::to_kv() const {
  return {{"vocab_size", std::to_string(vocab_size)},
          {"max_len", std::to_string(max_len)},
          {"embed_dim", std::to_string(embed_dim)},
          {"hidden", std::to_string(hidden)},
          {"hops", std::to_string(hops)},
          {"attention_dim", std::to_string(attention_dim)},
          {"include_source", b(include_source)},
          {"include_previous", b(include_previous)}};
}

BiLstmSelfAttConfig BiLstmSelfAttConfig::from_kv(const KeyValues& kv) {
  BiLstmSelfAttConfig c;
  c.vocab_size = get_int(kv, "vocab_size", c.vocab_size);
  c.max_len = get_int(kv, "max_len", c.max_len);
  c.embed_dim = get_int(kv, "embed_dim", c.embed_dim);
  c.hidden = get_int(kv, "hidden", c.hidden);
  c.hops = get_int(kv, "hops", c.hops);
  c.attention_dim = get_int(kv, "attention_dim", c.attention_dim);
  c.include_source = get_bool(kv, "include_source", c.include_source);
  c.include_previous = get_bool(kv, "include_previous", c.include_previous);
  return c;
}

BiLstmSelfAtt::BiLstmSelfAtt(BiLstmSelfAttConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.vocab_size <= kNumSpecials || cfg_.embed_dim < 1 || cfg_.hidden < 1 || cfg_.hops < 1 ||
      cfg_.attention_dim < 1 || cfg_.max_len < 8)
    fail(ErrorCode::InvalidConfig, "bilstm_selfatt sizes must be positive");
  std::mt19937_64 rng(seed);
  const auto e = static_cast<std::size_t>(cfg_.embed_dim);
  const auto h = static_cast<std::size_t>(cfg_.hidden);
  embedding_ = params_.add_weight("embeddings.token", static_cast<std::size_t>(cfg_.vocab_size), e, rng);
  lstm_ = nn::BiLstmParams::create(params_, "bilstm", e, h, rng);
  ws1_ = params_.add_weight("selfatt.ws1", 2 * h, static_cast<std::size_t>(cfg_.attention_dim), rng);
  ws2_ = params_.add_weight("selfatt.ws2", static_cast<std::size_t>(cfg_.attention_dim),
                            static_cast<std::size_t>(cfg_.hops), rng);
  classifier_ = nn::Linear::create(params_, "classifier", static_cast<std::size_t>(cfg_.hops) * 2 * h, kNumClasses, rng);
}

BiLstmSelfAttOutput BiLstmSelfAtt::forward(std::span<const EncodedExample* const> batch, std::size_t pad_len) {
  BiLstmSelfAttOutput out;
  std::vector<Var> rows;
  const auto h2 = 2 * static_cast<std::size_t>(cfg_.hidden);
  const auto r = static_cast<std::size_t>(cfg_.hops);
  for (const EncodedExample* raw : batch) {
    const std::size_t real_len = raw->size();
    if (real_len == 0) fail(ErrorCode::ConfigMismatch, "empty encoded example");
    const EncodedExample ex = pad_len > real_len ? pad_to(*raw, pad_len) : *raw;
    if (ex.size() > static_cast<std::size_t>(cfg_.max_len))
      fail(ErrorCode::ConfigMismatch, "example longer than model max_len");
    for (auto id : ex.token_ids)
      if (id < 0 || id >= cfg_.vocab_size) fail(ErrorCode::ConfigMismatch, "token id outside model vocabulary");
    const auto mask = padding_mask(ex, real_len);

    const Var hidden = nn::bilstm(nn::gather_rows(embedding_, ex.token_ids), lstm_);           // L×2h
    const Var logits = nn::transpose(nn::matmul(nn::tanh(nn::matmul(hidden, ws1_)), ws2_));  // r×L
    const Var attn = nn::row_softmax(logits, mask);
    out.attention.push_back(attn->value);
    rows.push_back(nn::reshape(nn::matmul(attn, hidden), 1, r * h2));
  }
  out.scores = classifier_(nn::concat_rows(rows));
  return out;
}

Var BiLstmSelfAtt::forward_scores(std::span<const Example* const> batch, bool) {
  std::vector<const EncodedExample*> enc;
  enc.reserve(batch.size());
  for (const Example* e : batch) enc.push_back(&e->encoded);
  return forward(enc).scores;
}

// ---------------------------------------------------------------------------

std::array<double, kNumClasses> softmax4(const std::array<double, kNumClasses>& scores) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::array<double, kNumClasses> p{};
  double z = 0;
  for (int c = 0; c < kNumClasses; ++c) z += (p[c] = std::exp(scores[c] - mx));
  for (auto& v : p) v /= z;
  return p;
}

int argmax4(const std::array<double, kNumClasses>& v) {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c)
    if (v[c] > v[best]) best = c;
  return best;
}

std::vector<ClassifierOutput> predict(StanceModel& model, std::span<const Example* const> batch) {
  std::vector<ClassifierOutput> out(batch.size());
  if (batch.empty()) return out;
  const Var scores = model.forward_scores(batch, false);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (int c = 0; c < kNumClasses; ++c) out[i].scores[c] = scores->value.at(i, static_cast<std::size_t>(c));
    out[i].probs = softmax4(out[i].scores);
  }
  return out;
}

nn::CheckpointData model_snapshot(const StanceModel& model) {
  return nn::snapshot(static_cast<std::uint32_t>(model.kind()), model.config_text(), model.params());
}

std::unique_ptr<StanceModel> create_model(ModelKind kind, const KeyValues& config, std::uint64_t seed) {
  switch (kind) {
    case ModelKind::MicroBert: return std::make_unique<MicroBert>(MicroBertConfig::from_kv(config), seed);
    case ModelKind::FeaturesNN: return std::make_unique<FeaturesNN>(FeaturesNNConfig::from_kv(config), seed);
    case ModelKind::BiLstmSelfAtt: return std::make_unique<BiLstmSelfAtt>(BiLstmSelfAttConfig::from_kv(config), seed);
  }
  fail(ErrorCode::InvalidConfig, "unknown model kind code");
}

std::unique_ptr<StanceModel> model_from_checkpoint(const nn::CheckpointData& ckpt) {
  const auto kind = static_cast<ModelKind>(ckpt.model_kind);
  if (ckpt.model_kind < 1 || ckpt.model_kind > 3) fail(ErrorCode::MalformedDocument, "unknown model kind in checkpoint");
  auto model = create_model(kind, parse_key_values(ckpt.config), 0);
  nn::restore(ckpt, model->params(), true);
  if (model->params().all().size() != ckpt.params.size())
    fail(ErrorCode::ConfigMismatch, "checkpoint carries parameters the model does not have");
  return model;
}

EncoderConfig encoder_config_of(const StanceModel& model) {
  EncoderConfig enc;
  if (const auto* m = dynamic_cast<const MicroBert*>(&model)) {
    enc.max_len = m->config().max_len;
    enc.include_source = m->config().include_source;
    enc.include_previous = m->config().include_previous;
  } else if (const auto* b = dynamic_cast<const BiLstmSelfAtt*>(&model)) {
    enc.max_len = b->config().max_len;
    enc.include_source = b->config().include_source;
    enc.include_previous = b->config().include_previous;
  }
  return enc;
}

}  // namespace sdqc
