#include "sdqc/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "sdqc/error.hpp"
#include "sdqc/kernels.hpp"

namespace sdqc::nn {

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s + "]";
}

namespace {

[[noreturn]] void shape_error(const char* op, const Var& a, const Var& b) {
  fail(ErrorCode::ShapeMismatch,
       std::string(op) + ": " + a->value.shape_string() + " vs " + b->value.shape_string());
}

// Builds a result node; the backward closure is only kept if some parent
// participates in differentiation.
Var make(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p->requires_grad; });
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(fn);
  }
  return n;
}

inline std::span<double> grad_of(Node& n) {
  n.ensure_grad();
  return n.grad;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  return n;
}

Var leaf(Tensor t, bool requires_grad) {
  auto n = constant(std::move(t));
  n->requires_grad = requires_grad;
  return n;
}

Var matmul(const Var& a, const Var& b) {
  if (a->cols() != b->rows()) shape_error("matmul", a, b);
  const std::size_t m = a->rows(), k = a->cols(), n = b->cols();
  Tensor out(m, n);
  kernels::gemm_nn(a->value.values, b->value.values, out.values, m, k, n, false);
  return make(std::move(out), {a, b}, [m, k, n](Node& self) {
    auto& a = *self.parents[0];
    auto& b = *self.parents[1];
    if (a.requires_grad) kernels::gemm_nt(self.grad, b.value.values, grad_of(a), m, n, k, true);
    if (b.requires_grad) kernels::gemm_tn(a.value.values, self.grad, grad_of(b), m, k, n, true);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a->cols() != b->cols()) shape_error("matmul_nt", a, b);
  const std::size_t m = a->rows(), k = a->cols(), n = b->rows();
  Tensor out(m, n);
  kernels::gemm_nt(a->value.values, b->value.values, out.values, m, k, n, false);
  return make(std::move(out), {a, b}, [m, k, n](Node& self) {
    auto& a = *self.parents[0];
    auto& b = *self.parents[1];
    if (a.requires_grad) kernels::gemm_nn(self.grad, b.value.values, grad_of(a), m, n, k, true);
    if (b.requires_grad) kernels::gemm_tn(self.grad, a.value.values, grad_of(b), m, n, k, true);
  });
}

Var transpose(const Var& a) {
  const std::size_t r = a->rows(), c = a->cols();
  Tensor out(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.values[j * r + i] = a->value.values[i * c + j];
  return make(std::move(out), {a}, [r, c](Node& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Var add(const Var& a, const Var& b) {
  if (a->value.shape != b->value.shape) shape_error("add", a, b);
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b->value.values[i];
  return make(std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto g = grad_of(*p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var add_bias(const Var& a, const Var& bias) {
  if (bias->rows() != 1 || bias->cols() != a->cols()) shape_error("add_bias", a, bias);
  const std::size_t r = a->rows(), c = a->cols();
  Tensor out = a->value;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.values[i * c + j] += bias->value.values[j];
  return make(std::move(out), {a, bias}, [r, c](Node& self) {
    auto& a = *self.parents[0];
    auto& b = *self.parents[1];
    if (a.requires_grad) {
      auto g = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b.requires_grad) {
      auto g = grad_of(b);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  if (a->value.shape != b->value.shape) shape_error("mul", a, b);
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= b->value.values[i];
  return make(std::move(out), {a, b}, [](Node& self) {
    auto& a = *self.parents[0];
    auto& b = *self.parents[1];
    if (a.requires_grad) {
      auto g = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b.value.values[i];
    }
    if (b.requires_grad) {
      auto g = grad_of(b);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a.value.values[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (auto& v : out.values) v *= s;
  return make(std::move(out), {a}, [s](Node& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

namespace {

// Elementwise op whose derivative is a function of input x and output y.
template <typename F, typename D>
Var unary(const Var& a, F f, D dfdx) {
  Tensor out = a->value;
  for (auto& v : out.values) v = f(v);
  return make(std::move(out), {a}, [dfdx](Node& self) {
    auto& a = *self.parents[0];
    auto g = grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdx(a.value.values[i], self.value.values[i]);
  });
}

}  // namespace

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Var gelu(const Var& a) {
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); },
      [](double x, double) {
        const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      });
}

Var row_softmax(const Var& a, std::span<const unsigned char> column_mask) {
  const std::size_t r = a->rows(), c = a->cols();
  if (!column_mask.empty() && column_mask.size() != c)
    fail(ErrorCode::ShapeMismatch, "row_softmax mask length " + std::to_string(column_mask.size()) +
                                       " vs " + std::to_string(c) + " columns");
  Tensor out(r, c);
  kernels::row_softmax(a->value.values, out.values, r, c, column_mask);
  return make(std::move(out), {a}, [r, c](Node& self) {
    auto g = grad_of(*self.parents[0]);
    const auto& y = self.value.values;
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[i * c + j] * (self.grad[i * c + j] - dot);
    }
  });
}

Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps) {
  const std::size_t r = a->rows(), c = a->cols();
  if (gain->rows() != 1 || gain->cols() != c) shape_error("layer_norm gain", a, gain);
  if (bias->rows() != 1 || bias->cols() != c) shape_error("layer_norm bias", a, bias);
  std::vector<double> xhat(r * c), rstd(r);
  Tensor out(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = a->value.values.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += x[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= static_cast<double>(c);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (x[j] - mean) * rstd[i];
      out.values[i * c + j] = xhat[i * c + j] * gain->value.values[j] + bias->value.values[j];
    }
  }
  return make(std::move(out), {a, gain, bias}, [r, c, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
    auto& x = *self.parents[0];
    auto& gamma = *self.parents[1];
    auto& beta = *self.parents[2];
    if (gamma.requires_grad) {
      auto g = grad_of(gamma);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j] * xhat[i * c + j];
    }
    if (beta.requires_grad) {
      auto g = grad_of(beta);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
    }
    if (x.requires_grad) {
      auto g = grad_of(x);
      const double inv_c = 1.0 / static_cast<double>(c);
      for (std::size_t i = 0; i < r; ++i) {
        double mean_g = 0.0, mean_gx = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double gh = self.grad[i * c + j] * gamma.value.values[j];
          mean_g += gh;
          mean_gx += gh * xhat[i * c + j];
        }
        mean_g *= inv_c;
        mean_gx *= inv_c;
        for (std::size_t j = 0; j < c; ++j) {
          const double gh = self.grad[i * c + j] * gamma.value.values[j];
          g[i * c + j] += rstd[i] * (gh - mean_g - xhat[i * c + j] * mean_gx);
        }
      }
    }
  });
}

Var gather_rows(const Var& table, std::span<const std::int32_t> ids) {
  const std::size_t c = table->cols(), nrows = table->rows();
  Tensor out(ids.size(), c);
  std::vector<std::size_t> idx(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= nrows)
      fail(ErrorCode::ShapeMismatch, "row id " + std::to_string(ids[i]) + " outside table of " + std::to_string(nrows));
    idx[i] = static_cast<std::size_t>(ids[i]);
    std::copy_n(table->value.values.begin() + static_cast<std::ptrdiff_t>(idx[i] * c), c,
                out.values.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return make(std::move(out), {table}, [c, idx = std::move(idx)](Node& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += self.grad[i * c + j];
  });
}

Var embedding_sum(const Var& token_table, const Var& segment_table, const Var& position_table,
                  std::span<const std::int32_t> token_ids, std::span<const std::int32_t> segment_ids,
                  std::span<const std::int32_t> position_ids) {
  if (token_ids.size() != segment_ids.size() || token_ids.size() != position_ids.size())
    fail(ErrorCode::ShapeMismatch, "embedding_sum id sequences differ in length");
  if (token_table->cols() != segment_table->cols() || token_table->cols() != position_table->cols())
    shape_error("embedding_sum tables", token_table, segment_table);
  return add(add(gather_rows(token_table, token_ids), gather_rows(segment_table, segment_ids)),
             gather_rows(position_table, position_ids));
}

Var slice_rows(const Var& a, std::size_t start, std::size_t count) {
  const std::size_t c = a->cols();
  if (start + count > a->rows()) fail(ErrorCode::ShapeMismatch, "slice_rows out of range");
  Tensor out(count, c);
  std::copy_n(a->value.values.begin() + static_cast<std::ptrdiff_t>(start * c), count * c, out.values.begin());
  return make(std::move(out), {a}, [start, c](Node& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[start * c + i] += self.grad[i];
  });
}

Var slice_cols(const Var& a, std::size_t start, std::size_t count) {
  const std::size_t r = a->rows(), c = a->cols();
  if (start + count > c) fail(ErrorCode::ShapeMismatch, "slice_cols out of range");
  Tensor out(r, count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out.values[i * count + j] = a->value.values[i * c + start + j];
  return make(std::move(out), {a}, [r, c, start, count](Node& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) g[i * c + start + j] += self.grad[i * count + j];
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat_rows of nothing");
  const std::size_t c = parts[0]->cols();
  std::size_t r = 0;
  for (const auto& p : parts) {
    if (p->cols() != c) shape_error("concat_rows", parts[0], p);
    r += p->rows();
  }
  Tensor out(r, c);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.values.begin(), p->value.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(off));
    off += p->value.values.size();
  }
  return make(std::move(out), {parts.begin(), parts.end()}, [](Node& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const std::size_t n = p->value.values.size();
      if (p->requires_grad) {
        auto g = grad_of(*p);
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat_cols of nothing");
  const std::size_t r = parts[0]->rows();
  std::size_t c = 0;
  for (const auto& p : parts) {
    if (p->rows() != r) shape_error("concat_cols", parts[0], p);
    c += p->cols();
  }
  Tensor out(r, c);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p->cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < pc; ++j) out.values[i * c + off + j] = p->value.values[i * pc + j];
    off += pc;
  }
  return make(std::move(out), {parts.begin(), parts.end()}, [r, c](Node& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const std::size_t pc = p->cols();
      if (p->requires_grad) {
        auto g = grad_of(*p);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < pc; ++j) g[i * pc + j] += self.grad[i * c + off + j];
      }
      off += pc;
    }
  });
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a->value.values.size())
    fail(ErrorCode::ShapeMismatch, "reshape " + a->value.shape_string() + " to " + std::to_string(rows) + "x" +
                                       std::to_string(cols));
  Tensor out(rows, cols, a->value.values);
  return make(std::move(out), {a}, [](Node& self) {
    auto g = grad_of(*self.parents[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a->value.values) s += v;
  return make(Tensor(1, 1, s), {a}, [](Node& self) {
    auto g = grad_of(*self.parents[0]);
    for (auto& x : g) x += self.grad[0];
  });
}

Var dropout(const Var& a, double p, bool training, std::mt19937_64& rng) {
  if (!training || p <= 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  const double inv = 1.0 / (1.0 - p);
  std::vector<double> m(a->value.values.size());
  for (auto& v : m) v = keep(rng) ? inv : 0.0;
  return mul(a, constant(Tensor(a->rows(), a->cols(), std::move(m))));
}

Var weighted_cross_entropy(const Var& scores, std::span<const int> gold, std::span<const double> class_weights) {
  const std::size_t n = scores->rows(), c = scores->cols();
  if (gold.size() != n) fail(ErrorCode::ShapeMismatch, "cross entropy: gold length differs from batch");
  if (!class_weights.empty() && class_weights.size() != c)
    fail(ErrorCode::ShapeMismatch, "cross entropy: weight count differs from class count");
  if (n == 0) fail(ErrorCode::ShapeMismatch, "cross entropy on an empty batch");
  std::vector<double> probs(n * c);
  std::vector<double> w(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gold[i] < 0 || static_cast<std::size_t>(gold[i]) >= c) fail(ErrorCode::ShapeMismatch, "gold class out of range");
    const double* s = scores->value.values.data() + i * c;
    double mx = s[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, s[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(s[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(s[j] - lse);
    w[i] = class_weights.empty() ? 1.0 : class_weights[static_cast<std::size_t>(gold[i])];
    loss += w[i] * (lse - s[gold[i]]);
  }
  loss /= static_cast<double>(n);
  std::vector<int> g(gold.begin(), gold.end());
  return make(Tensor(1, 1, loss), {scores},
              [n, c, probs = std::move(probs), w = std::move(w), g = std::move(g)](Node& self) {
                auto gs = grad_of(*self.parents[0]);
                const double up = self.grad[0] / static_cast<double>(n);
                for (std::size_t i = 0; i < n; ++i)
                  for (std::size_t j = 0; j < c; ++j) {
                    const double target = static_cast<int>(j) == g[i] ? 1.0 : 0.0;
                    gs[i * c + j] += up * w[i] * (probs[i * c + j] - target);
                  }
              });
}

void backward(const Var& loss) {
  if (!loss || loss->value.values.size() != 1) fail(ErrorCode::ShapeMismatch, "backward needs a scalar loss");
  if (!loss->requires_grad) fail(ErrorCode::NoTrace, "loss was not produced by differentiable ops");

  // Iterative post-order DFS; recursion would overflow on long recurrent chains.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.get(), 0}};
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order)
    if (!n->is_leaf()) n->zero_grad();
  loss->ensure_grad();
  if (loss->is_leaf()) {
    loss->grad[0] += 1.0;
    return;
  }
  loss->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
}

}  // namespace sdqc::nn
