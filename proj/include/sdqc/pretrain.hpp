#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdqc/models.hpp"
#include "sdqc/textprep.hpp"

namespace sdqc {

using Sentence = std::vector<std::int32_t>;

// Splits each normalized text at [EOS] and maps the pieces to ids; empty
// sentences are dropped. Text order is preserved, so consecutive entries from
// the same text are true next-sentence pairs.
std::vector<Sentence> corpus_sentences(std::span<const std::string> texts, const Vocab& vocab);

// round(0.15·n) with halves rounded up, at least 1 when n > 0.
std::size_t masked_count(std::size_t n);

struct PretrainExample {
  EncodedExample input;                 // after masking
  std::vector<std::size_t> positions;   // masked positions, ascending
  std::vector<std::int32_t> targets;    // original ids at those positions
  bool is_next = true;
};

// Picks masked_count(non-special positions) of the non-special positions;
// each becomes [MASK] (80%), a random non-special id (10%) or stays (10%).
PretrainExample mask_tokens(const EncodedExample& ex, std::size_t vocab_size, std::mt19937_64& rng);

// One batch of sentence pairs: the second sentence is the true successor with
// probability 0.5, otherwise a random other sentence labelled not-next.
std::vector<PretrainExample> mlm_nsp_batch(std::span<const Sentence> sentences, std::size_t vocab_size,
                                           std::size_t batch_size, int max_len, std::mt19937_64& rng);

// Masked-token cross-entropy plus next-sentence cross-entropy on [CLS].
nn::Var pretrain_loss(MicroBert& model, std::span<const PretrainExample> batch, bool training);

struct PretrainConfig {
  int steps = 500;
  int batch_size = 8;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::uint64_t seed = 1;
};

struct PretrainResult {
  std::vector<double> losses;  // one per step
};

PretrainResult pretrain(MicroBert& model, std::span<const Sentence> sentences, const PretrainConfig& cfg);

}  // namespace sdqc
