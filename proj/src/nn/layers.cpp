#include "sdqc/nn/layers.hpp"

#include <cmath>

#include "sdqc/error.hpp"

namespace sdqc::nn {

double truncated_normal(std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (;;) {
    const double v = dist(rng);
    if (std::abs(v) <= 2.0 * stddev) return v;
  }
}

Var ParamStore::add(const std::string& name, Tensor init, bool decay_exempt, bool trainable) {
  if (find(name)) fail(ErrorCode::InvalidConfig, "duplicate parameter name " + name);
  auto v = leaf(std::move(init), trainable);
  params_.push_back({name, v, trainable, decay_exempt});
  return v;
}

Var ParamStore::add_weight(const std::string& name, std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Tensor t(rows, cols);
  for (auto& v : t.values) v = truncated_normal(rng, 0.02);
  return add(name, std::move(t), false);
}

Var ParamStore::add_zeros(const std::string& name, std::size_t rows, std::size_t cols, bool decay_exempt) {
  return add(name, Tensor(rows, cols, 0.0), decay_exempt);
}

Var ParamStore::add_ones(const std::string& name, std::size_t rows, std::size_t cols, bool decay_exempt) {
  return add(name, Tensor(rows, cols, 1.0), decay_exempt);
}

const Parameter* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

Var ParamStore::get(const std::string& name) const {
  const auto* p = find(name);
  if (!p) fail(ErrorCode::ConfigMismatch, "no parameter named " + name);
  return p->var;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.var->zero_grad();
}

std::size_t ParamStore::count_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var->value.values.size();
  return n;
}

Linear Linear::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                      std::mt19937_64& rng) {
  return {store.add_weight(name + ".weight", in, out, rng), store.add_zeros(name + ".bias", 1, out)};
}

LayerNormParams LayerNormParams::create(ParamStore& store, const std::string& name, std::size_t dim) {
  return {store.add_ones(name + ".gain", 1, dim), store.add_zeros(name + ".bias", 1, dim)};
}

AttentionParams AttentionParams::create(ParamStore& store, const std::string& name, std::size_t dim,
                                        std::size_t heads, std::mt19937_64& rng) {
  if (heads == 0 || dim % heads != 0)
    fail(ErrorCode::InvalidConfig, "hidden size " + std::to_string(dim) + " not divisible by " +
                                       std::to_string(heads) + " heads");
  AttentionParams p;
  p.query = Linear::create(store, name + ".query", dim, dim, rng);
  p.key = Linear::create(store, name + ".key", dim, dim, rng);
  p.value = Linear::create(store, name + ".value", dim, dim, rng);
  p.output = Linear::create(store, name + ".output", dim, dim, rng);
  p.heads = heads;
  return p;
}

AttentionOutput multi_head_attention(const Var& x, const AttentionParams& p, std::span<const unsigned char> pad_mask) {
  const std::size_t len = x->rows(), dim = x->cols();
  if (p.query.weight->rows() != dim) fail(ErrorCode::ShapeMismatch, "attention input width differs from parameters");
  if (!pad_mask.empty() && pad_mask.size() != len) fail(ErrorCode::ShapeMismatch, "pad mask length differs from input");
  const std::size_t dk = dim / p.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));

  const Var q = p.query(x), k = p.key(x), v = p.value(x);
  AttentionOutput out;
  std::vector<Var> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Var qh = slice_cols(q, h * dk, dk);
    const Var kh = slice_cols(k, h * dk, dk);
    const Var vh = slice_cols(v, h * dk, dk);
    const Var scores = scale(matmul_nt(qh, kh), inv_sqrt);
    const Var probs = row_softmax(scores, pad_mask);
    out.scores.push_back(scores->value);
    out.probs.push_back(probs->value);
    heads.push_back(matmul(probs, vh));
  }
  out.output = p.output(concat_cols(heads));
  return out;
}

TransformerLayerParams TransformerLayerParams::create(ParamStore& store, const std::string& name, std::size_t dim,
                                                      std::size_t heads, std::size_t ff_dim, std::mt19937_64& rng) {
  TransformerLayerParams p;
  p.attention = AttentionParams::create(store, name + ".attention", dim, heads, rng);
  p.attention_norm = LayerNormParams::create(store, name + ".attention_norm", dim);
  p.ff_in = Linear::create(store, name + ".ff_in", dim, ff_dim, rng);
  p.ff_out = Linear::create(store, name + ".ff_out", ff_dim, dim, rng);
  p.output_norm = LayerNormParams::create(store, name + ".output_norm", dim);
  return p;
}

TransformerOutput transformer_layer(const Var& x, const TransformerLayerParams& p,
                                    std::span<const unsigned char> pad_mask, double dropout_p, bool training,
                                    std::mt19937_64* rng) {
  auto att = multi_head_attention(x, p.attention, pad_mask);
  Var attended = att.output;
  if (rng) attended = dropout(attended, dropout_p, training, *rng);
  const Var h = p.attention_norm(add(x, attended));
  Var ff = p.ff_out(gelu(p.ff_in(h)));
  if (rng) ff = dropout(ff, dropout_p, training, *rng);
  return {p.output_norm(add(h, ff)), std::move(att.scores), std::move(att.probs)};
}

LstmParams LstmParams::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                              std::mt19937_64& rng) {
  return {store.add_weight(name + ".input_weight", in, 4 * hidden, rng),
          store.add_weight(name + ".hidden_weight", hidden, 4 * hidden, rng),
          store.add_zeros(name + ".bias", 1, 4 * hidden), hidden};
}

BiLstmParams BiLstmParams::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                                  std::mt19937_64& rng) {
  return {LstmParams::create(store, name + ".fw", in, hidden, rng),
          LstmParams::create(store, name + ".bw", in, hidden, rng)};
}

Var lstm(const Var& x, const LstmParams& p, bool reverse) {
  const std::size_t len = x->rows(), h = p.hidden;
  if (p.input_weight->rows() != x->cols()) fail(ErrorCode::ShapeMismatch, "lstm input width differs from parameters");
  // Input projections for all steps at once.
  const Var projected = add_bias(matmul(x, p.input_weight), p.bias);
  Var hidden = constant(Tensor(1, h));
  Var cell = constant(Tensor(1, h));
  std::vector<Var> outputs(len);
  for (std::size_t s = 0; s < len; ++s) {
    const std::size_t t = reverse ? len - 1 - s : s;
    const Var gates = add(slice_rows(projected, t, 1), matmul(hidden, p.hidden_weight));
    const Var i = sigmoid(slice_cols(gates, 0, h));
    const Var f = sigmoid(slice_cols(gates, h, h));
    const Var g = tanh(slice_cols(gates, 2 * h, h));
    const Var o = sigmoid(slice_cols(gates, 3 * h, h));
    cell = add(mul(f, cell), mul(i, g));
    hidden = mul(o, tanh(cell));
    outputs[t] = hidden;
  }
  return concat_rows(outputs);
}

Var bilstm(const Var& x, const BiLstmParams& p) {
  const std::vector<Var> halves{lstm(x, p.forward, false), lstm(x, p.backward, true)};
  return concat_cols(halves);
}

}  // namespace sdqc::nn
