#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdqc/nn/tensor.hpp"

namespace sdqc::nn {

struct Node;
using Var = std::shared_ptr<Node>;

// One value in the dynamic computation graph. Parameters are leaves that
// outlive individual forward passes; every op result holds its parents and a
// closure that pushes its gradient back to them.
struct Node {
  Tensor value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  void ensure_grad() {
    if (grad.size() != value.values.size()) grad.assign(value.values.size(), 0.0);
  }
  void zero_grad() { grad.assign(value.values.size(), 0.0); }
  std::size_t rows() const { return value.rows(); }
  std::size_t cols() const { return value.cols(); }
};

Var constant(Tensor t);
Var leaf(Tensor t, bool requires_grad = true);

// ---- forward ops ----------------------------------------------------------
Var matmul(const Var& a, const Var& b);      // a·b
Var matmul_nt(const Var& a, const Var& b);   // a·bᵀ
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var add_bias(const Var& a, const Var& bias);  // bias is 1×n, broadcast over rows
Var mul(const Var& a, const Var& b);          // elementwise
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var gelu(const Var& a);  // tanh approximation
// Softmax along each row; columns with mask[j] != 0 get exactly zero weight.
Var row_softmax(const Var& a, std::span<const unsigned char> column_mask = {});
// Normalizes each row, then applies gain and bias (both 1×n).
Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps = 1e-12);
Var gather_rows(const Var& table, std::span<const std::int32_t> ids);
// E_t[tok] + E_s[seg] + E_p[pos], row-wise.
Var embedding_sum(const Var& token_table, const Var& segment_table, const Var& position_table,
                  std::span<const std::int32_t> token_ids, std::span<const std::int32_t> segment_ids,
                  std::span<const std::int32_t> position_ids);
Var slice_rows(const Var& a, std::size_t start, std::size_t count);
Var slice_cols(const Var& a, std::size_t start, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var reshape(const Var& a, std::size_t rows, std::size_t cols);
Var sum(const Var& a);
// Inverted dropout; identity when p == 0 or !training.
Var dropout(const Var& a, double p, bool training, std::mt19937_64& rng);

// Mean over rows of weight[gold]·(−log softmax(scores)[gold]), via log-sum-exp.
Var weighted_cross_entropy(const Var& scores, std::span<const int> gold, std::span<const double> class_weights);

// ---- reverse pass ---------------------------------------------------------
// Accumulates d(loss)/d(leaf) into every reachable leaf that requires grad.
// Intermediate gradients are rebuilt on each call, so calling twice adds the
// same contribution twice.
void backward(const Var& loss);

}  // namespace sdqc::nn
