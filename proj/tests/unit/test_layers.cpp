#include <doctest.h>

#include <cmath>
#include <random>

#include "sdqc/nn/layers.hpp"
#include "support/gradcheck.hpp"

using namespace sdqc;
using namespace sdqc::nn;
using sdqc::testing::grad_check;
using sdqc::testing::random_tensor;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

Mat affine(const Mat& x, const Linear& lin) {
  const Mat w = to_mat(lin.weight->value);
  const auto& b = lin.bias->value.values;
  Mat out(x.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      double s = b[j];
      for (std::size_t k = 0; k < x[i].size(); ++k) s += x[i][k] * w[k][j];
      out[i][j] = s;
    }
  return out;
}

// One loop nest per head: scores, masked softmax, weighted values.
Mat naive_attention(const Mat& x, const AttentionParams& p, const std::vector<unsigned char>& mask) {
  const Mat q = affine(x, p.query), k = affine(x, p.key), v = affine(x, p.value);
  const std::size_t len = x.size(), dim = x[0].size(), dk = dim / p.heads;
  Mat concat(len, std::vector<double>(dim, 0.0));
  for (std::size_t h = 0; h < p.heads; ++h)
    for (std::size_t i = 0; i < len; ++i) {
      std::vector<double> w(len, 0.0);
      double mx = -1e300;
      for (std::size_t j = 0; j < len; ++j) {
        if (!mask.empty() && mask[j]) continue;
        double s = 0;
        for (std::size_t t = 0; t < dk; ++t) s += q[i][h * dk + t] * k[j][h * dk + t];
        w[j] = s / std::sqrt(static_cast<double>(dk));
        mx = std::max(mx, w[j]);
      }
      double z = 0;
      for (std::size_t j = 0; j < len; ++j) {
        w[j] = (!mask.empty() && mask[j]) ? 0.0 : std::exp(w[j] - mx);
        z += w[j];
      }
      for (std::size_t j = 0; j < len; ++j)
        for (std::size_t t = 0; t < dk; ++t) concat[i][h * dk + t] += w[j] / z * v[j][h * dk + t];
    }
  return affine(concat, p.output);
}

Mat naive_layer_norm(const Mat& x, const LayerNormParams& p) {
  Mat out = x;
  for (auto& row : out) {
    double mean = 0, var = 0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = (row[j] - mean) / std::sqrt(var + 1e-12) * p.gain->value.values[j] + p.bias->value.values[j];
  }
  return out;
}

Mat naive_transformer(const Mat& x, const TransformerLayerParams& p) {
  const Mat att = naive_attention(x, p.attention, {});
  Mat h = x;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x[i].size(); ++j) h[i][j] += att[i][j];
  h = naive_layer_norm(h, p.attention_norm);
  Mat f = affine(h, p.ff_in);
  for (auto& row : f)
    for (auto& v : row) v = 0.5 * v * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
  f = affine(f, p.ff_out);
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t j = 0; j < h[i].size(); ++j) f[i][j] += h[i][j];
  return naive_layer_norm(f, p.output_norm);
}

double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Mat naive_lstm(const Mat& x, const LstmParams& p, bool reverse) {
  const std::size_t len = x.size(), h = p.hidden;
  const Mat wi = to_mat(p.input_weight->value), wh = to_mat(p.hidden_weight->value);
  const auto& b = p.bias->value.values;
  std::vector<double> hid(h, 0.0), cell(h, 0.0);
  Mat out(len);
  for (std::size_t s = 0; s < len; ++s) {
    const std::size_t t = reverse ? len - 1 - s : s;
    std::vector<double> g(4 * h);
    for (std::size_t j = 0; j < 4 * h; ++j) {
      double v = b[j];
      for (std::size_t k = 0; k < x[t].size(); ++k) v += x[t][k] * wi[k][j];
      for (std::size_t k = 0; k < h; ++k) v += hid[k] * wh[k][j];
      g[j] = v;
    }
    for (std::size_t j = 0; j < h; ++j) {
      cell[j] = sigm(g[h + j]) * cell[j] + sigm(g[j]) * std::tanh(g[2 * h + j]);
      hid[j] = sigm(g[3 * h + j]) * std::tanh(cell[j]);
    }
    out[t] = hid;
  }
  return out;
}

void check_close(const Tensor& got, const Mat& want, double tol) {
  REQUIRE(got.rows() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    REQUIRE(got.cols() == want[i].size());
    for (std::size_t j = 0; j < want[i].size(); ++j) CHECK(std::abs(got.at(i, j) - want[i][j]) <= tol);
  }
}

void zero_all(ParamStore& store) {
  for (auto& p : store.all())
    if (p.name.find("norm") == std::string::npos) std::fill(p.var->value.values.begin(), p.var->value.values.end(), 0.0);
}

// Random non-zero biases so the oracles exercise every term.
void jitter_biases(ParamStore& store, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 0.1);
  for (auto& p : store.all())
    if (p.var->rows() == 1)
      for (auto& v : p.var->value.values) v += d(rng);
}

}  // namespace

TEST_CASE("attention matches a naive loop oracle") {
  std::mt19937_64 rng(21);
  ParamStore store;
  const auto p = AttentionParams::create(store, "att", 8, 2, rng);
  for (auto& prm : store.all())
    for (auto& v : prm.var->value.values) v = std::normal_distribution<double>(0.0, 0.4)(rng);
  const Tensor x = random_tensor(4, 8, rng);
  const auto got = multi_head_attention(constant(x), p, {});
  check_close(got.output->value, naive_attention(to_mat(x), p, {}), 1e-6);
  REQUIRE(got.probs.size() == 2);
  REQUIRE(got.scores.size() == 2);
  CHECK(got.probs[0].rows() == 4);
  CHECK(got.probs[0].cols() == 4);

  const std::vector<unsigned char> mask{0, 0, 1, 0};
  const auto masked = multi_head_attention(constant(x), p, mask);
  check_close(masked.output->value, naive_attention(to_mat(x), p, mask), 1e-6);
  for (const auto& pr : masked.probs)
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK(pr.at(r, 2) == 0.0);
      CHECK(std::abs(pr.at(r, 0) + pr.at(r, 1) + pr.at(r, 3) - 1.0) <= 1e-6);
    }
}

TEST_CASE("identity queries and keys give A = I / sqrt(d_k)") {
  const std::size_t d = 4;
  std::mt19937_64 rng(22);
  ParamStore store;
  auto p = AttentionParams::create(store, "att", d, 1, rng);
  Tensor eye(d, d);
  for (std::size_t i = 0; i < d; ++i) eye.at(i, i) = 1.0;
  p.query.weight->value = eye;
  p.key.weight->value = eye;
  const auto out = multi_head_attention(constant(eye), p, {});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) CHECK(out.scores[0].at(i, j) == doctest::Approx(i == j ? 0.5 : 0.0).epsilon(1e-15));
}

TEST_CASE("attention ignores trailing padding") {
  std::mt19937_64 rng(23);
  ParamStore store;
  const auto p = AttentionParams::create(store, "att", 8, 2, rng);
  jitter_biases(store, rng);
  const Tensor full = random_tensor(6, 8, rng);
  Tensor trimmed(4, 8);
  std::copy_n(full.values.begin(), 32, trimmed.values.begin());
  const std::vector<unsigned char> mask{0, 0, 0, 0, 1, 1};
  const auto a = multi_head_attention(constant(full), p, mask);
  const auto b = multi_head_attention(constant(trimmed), p, {});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(a.output->value.at(i, j) - b.output->value.at(i, j)) <= 1e-6);
}

TEST_CASE("transformer layer") {
  std::mt19937_64 rng(24);
  ParamStore store;
  const auto l1 = TransformerLayerParams::create(store, "l1", 8, 2, 16, rng);
  const auto l2 = TransformerLayerParams::create(store, "l2", 8, 2, 16, rng);
  jitter_biases(store, rng);
  const Tensor x = random_tensor(5, 8, rng);

  SUBCASE("shape is preserved and matches the naive oracle") {
    const auto y = transformer_layer(constant(x), l1, {});
    CHECK(y.output->value.shape == x.shape);
    check_close(y.output->value, naive_transformer(to_mat(x), l1), 1e-6);
  }
  SUBCASE("two stacked layers equal the composition of two single layers") {
    const auto once = transformer_layer(constant(x), l1, {});
    const auto twice = transformer_layer(once.output, l2, {});
    check_close(twice.output->value, naive_transformer(naive_transformer(to_mat(x), l1), l2), 1e-6);
  }
  SUBCASE("zero weights leave the normalized residual path") {
    zero_all(store);
    const auto y = transformer_layer(constant(x), l1, {});
    const Mat want = naive_layer_norm(naive_layer_norm(to_mat(x), l1.attention_norm), l1.output_norm);
    check_close(y.output->value, want, 1e-9);
  }
}

TEST_CASE("lstm and bilstm") {
  std::mt19937_64 rng(25);
  ParamStore store;
  const auto p = BiLstmParams::create(store, "lstm", 5, 3, rng);
  for (auto& prm : store.all())
    for (auto& v : prm.var->value.values) v = std::normal_distribution<double>(0.0, 0.5)(rng);

  SUBCASE("L=3 matches a step-by-step recurrence") {
    const Tensor x = random_tensor(3, 5, rng);
    const auto y = bilstm(constant(x), p);
    const Mat fw = naive_lstm(to_mat(x), p.forward, false), bw = naive_lstm(to_mat(x), p.backward, true);
    Mat want(3);
    for (std::size_t t = 0; t < 3; ++t) {
      want[t] = fw[t];
      want[t].insert(want[t].end(), bw[t].begin(), bw[t].end());
    }
    check_close(y->value, want, 1e-6);
  }
  SUBCASE("single step with shared weights gives equal halves") {
    BiLstmParams shared{p.forward, p.forward};
    const auto y = bilstm(constant(random_tensor(1, 5, rng)), shared);
    for (std::size_t j = 0; j < 3; ++j) CHECK(y->value.at(0, j) == y->value.at(0, 3 + j));
  }
  SUBCASE("zero weights give zero outputs") {
    zero_all(store);
    const auto y = bilstm(constant(random_tensor(4, 5, rng)), p);
    CHECK(y->value.shape == std::vector<std::size_t>{4, 6});
    for (double v : y->value.values) CHECK(v == 0.0);
  }
}

TEST_CASE("layer gradients match finite differences") {
  std::mt19937_64 rng(26);
  ParamStore store;
  const auto tl = TransformerLayerParams::create(store, "t", 8, 2, 12, rng);
  const auto bl = BiLstmParams::create(store, "b", 8, 3, rng);
  for (auto& prm : store.all())
    for (auto& v : prm.var->value.values) v += std::normal_distribution<double>(0.0, 0.3)(rng);
  const auto x = leaf(random_tensor(4, 8, rng));
  const std::vector<unsigned char> mask{0, 0, 0, 1};
  std::vector<Var> leaves{x};
  for (auto& prm : store.all()) leaves.push_back(prm.var);
  const Tensor proj = random_tensor(4, 6, rng);

  const auto loss = [&] {
    const auto h = transformer_layer(x, tl, mask).output;
    return sum(mul(bilstm(h, bl), constant(proj)));
  };
  std::mt19937_64 pick(27);
  const auto res = grad_check(loss, leaves, 200, pick);
  INFO("max relative error " << res.max_rel);
  CHECK(res.checked == 200);
  CHECK(res.failures == 0);
}
