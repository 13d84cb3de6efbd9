#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdqc/nn/params.hpp"

namespace sdqc::nn {

struct Linear {
  Var weight;  // in×out
  Var bias;    // 1×out

  static Linear create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                       std::mt19937_64& rng);
  Var operator()(const Var& x) const { return add_bias(matmul(x, weight), bias); }
};

struct LayerNormParams {
  Var gain;
  Var bias;
  static LayerNormParams create(ParamStore& store, const std::string& name, std::size_t dim);
  Var operator()(const Var& x) const { return layer_norm(x, gain, bias); }
};

struct AttentionParams {
  Linear query, key, value, output;
  std::size_t heads = 1;

  static AttentionParams create(ParamStore& store, const std::string& name, std::size_t dim, std::size_t heads,
                                std::mt19937_64& rng);
};

struct AttentionOutput {
  Var output;                  // L×d
  std::vector<Tensor> scores;  // per head, QKᵀ/√d_k before masking
  std::vector<Tensor> probs;   // per head, row softmax with masked columns at 0
};

// pad_mask[j] != 0 marks position j as padding; it is excluded as a key.
AttentionOutput multi_head_attention(const Var& x, const AttentionParams& p, std::span<const unsigned char> pad_mask);

struct TransformerLayerParams {
  AttentionParams attention;
  LayerNormParams attention_norm;
  Linear ff_in, ff_out;
  LayerNormParams output_norm;

  static TransformerLayerParams create(ParamStore& store, const std::string& name, std::size_t dim,
                                       std::size_t heads, std::size_t ff_dim, std::mt19937_64& rng);
};

struct TransformerOutput {
  Var output;
  std::vector<Tensor> scores;
  std::vector<Tensor> probs;
};

// Post-norm encoder block: LN(x + MHA(x)), then LN(h + W2·gelu(W1·h)).
TransformerOutput transformer_layer(const Var& x, const TransformerLayerParams& p,
                                    std::span<const unsigned char> pad_mask, double dropout_p = 0.0,
                                    bool training = false, std::mt19937_64* rng = nullptr);

// Gate order i, f, g, o packed along columns of the 4h-wide matrices.
struct LstmParams {
  Var input_weight;   // d×4h
  Var hidden_weight;  // h×4h
  Var bias;           // 1×4h
  std::size_t hidden = 0;

  static LstmParams create(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                           std::mt19937_64& rng);
};

struct BiLstmParams {
  LstmParams forward, backward;
  static BiLstmParams create(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                             std::mt19937_64& rng);
};

// Unidirectional pass over rows of x (L×d), zero initial state; L×h.
Var lstm(const Var& x, const LstmParams& p, bool reverse);
// [forward | backward] hidden sequences, L×2h.
Var bilstm(const Var& x, const BiLstmParams& p);

}  // namespace sdqc::nn
