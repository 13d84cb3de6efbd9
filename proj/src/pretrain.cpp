#include "sdqc/pretrain.hpp"

#include <algorithm>

#include "sdqc/error.hpp"
#include "sdqc/nn/adam.hpp"

namespace sdqc {

std::vector<Sentence> corpus_sentences(std::span<const std::string> texts, const Vocab& vocab) {
  std::vector<Sentence> out;
  for (const auto& text : texts) {
    Sentence current;
    for (auto id : wordpiece_ids(normalize(text), vocab)) {
      if (id == kEosId) {
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
      } else {
        current.push_back(id);
      }
    }
    if (!current.empty()) out.push_back(std::move(current));
  }
  return out;
}

std::size_t masked_count(std::size_t n) {
  if (n == 0) return 0;
  return std::max<std::size_t>(1, (15 * n + 50) / 100);
}

PretrainExample mask_tokens(const EncodedExample& ex, std::size_t vocab_size, std::mt19937_64& rng) {
  if (vocab_size <= static_cast<std::size_t>(kNumSpecials))
    fail(ErrorCode::InvalidConfig, "vocabulary has no non-special tokens");
  PretrainExample out;
  out.input = ex;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < ex.size(); ++i)
    if (ex.token_ids[i] >= kNumSpecials) candidates.push_back(i);
  const std::size_t k = masked_count(candidates.size());
  // Partial Fisher-Yates for the first k picks.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(k);
  std::sort(candidates.begin(), candidates.end());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::int32_t> random_id(kNumSpecials, static_cast<std::int32_t>(vocab_size) - 1);
  for (auto pos : candidates) {
    out.positions.push_back(pos);
    out.targets.push_back(ex.token_ids[pos]);
    const double r = u(rng);
    if (r < 0.8)
      out.input.token_ids[pos] = kMaskId;
    else if (r < 0.9)
      out.input.token_ids[pos] = random_id(rng);
  }
  return out;
}

std::vector<PretrainExample> mlm_nsp_batch(std::span<const Sentence> sentences, std::size_t vocab_size,
                                           std::size_t batch_size, int max_len, std::mt19937_64& rng) {
  if (sentences.size() < 2) fail(ErrorCode::CorpusTooSmall, "need at least 2 sentences for next-sentence pairs");
  EncoderConfig enc;
  enc.max_len = max_len;
  enc.validate();
  std::uniform_int_distribution<std::size_t> first(0, sentences.size() - 2);
  std::uniform_int_distribution<std::size_t> other(0, sentences.size() - 2);
  std::bernoulli_distribution coin(0.5);
  std::vector<PretrainExample> batch;
  batch.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t i = first(rng);
    const bool is_next = coin(rng);
    std::size_t j = i + 1;
    if (!is_next) {
      // Uniform over every index except i + 1.
      j = other(rng);
      if (j >= i + 1) ++j;
    }
    auto ex = mask_tokens(encode_pair(sentences[i], sentences[j], enc), vocab_size, rng);
    ex.is_next = is_next;
    batch.push_back(std::move(ex));
  }
  return batch;
}

nn::Var pretrain_loss(MicroBert& model, std::span<const PretrainExample> batch, bool training) {
  if (batch.empty()) fail(ErrorCode::EmptyDataset, "empty pre-training batch");
  std::vector<const EncodedExample*> inputs;
  for (const auto& ex : batch) inputs.push_back(&ex.input);
  MicroBertForwardOptions opt;
  opt.training = training;
  const auto out = model.forward(inputs, opt);

  std::vector<nn::Var> picked;
  std::vector<int> targets;
  std::vector<int> nsp_gold;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t k = 0; k < batch[b].positions.size(); ++k) {
      picked.push_back(nn::slice_rows(out.hidden[b], batch[b].positions[k], 1));
      targets.push_back(batch[b].targets[k]);
    }
    nsp_gold.push_back(batch[b].is_next ? 0 : 1);
  }
  nn::Var nsp = nn::weighted_cross_entropy(model.nsp_logits(out.pooled), nsp_gold, {});
  if (picked.empty()) return nsp;
  nn::Var mlm = nn::weighted_cross_entropy(model.mlm_logits(nn::concat_rows(picked)), targets, {});
  return nn::add(mlm, nsp);
}

PretrainResult pretrain(MicroBert& model, std::span<const Sentence> sentences, const PretrainConfig& cfg) {
  if (sentences.empty()) fail(ErrorCode::EmptyDataset, "empty pre-training corpus");
  if (cfg.steps < 0 || cfg.batch_size < 1 || !(cfg.lr > 0)) fail(ErrorCode::InvalidConfig, "bad pre-training config");
  std::mt19937_64 rng(cfg.seed);
  nn::AdamConfig ac;
  ac.lr = cfg.lr;
  ac.weight_decay = cfg.weight_decay;
  nn::AdamState adam(ac);
  PretrainResult res;
  for (int s = 0; s < cfg.steps; ++s) {
    const auto batch = mlm_nsp_batch(sentences, static_cast<std::size_t>(model.config().vocab_size),
                                     static_cast<std::size_t>(cfg.batch_size), model.config().max_len, rng);
    model.params().zero_grad();
    const auto loss = pretrain_loss(model, batch, true);
    nn::backward(loss);
    adam.step(model.params());
    res.losses.push_back(loss->value.values[0]);
  }
  model.params().zero_grad();
  return res;
}

}  // namespace sdqc
