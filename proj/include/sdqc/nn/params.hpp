#pragma once

#include <random>
#include <string>
#include <vector>

#include "sdqc/nn/graph.hpp"

namespace sdqc::nn {

struct Parameter {
  std::string name;
  Var var;
  bool trainable = true;
  bool decay_exempt = false;
};

// Ordered, name-unique collection of a model's parameters. Order is the
// registration order, which is also the checkpoint order.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init, bool decay_exempt = false, bool trainable = true);
  // Truncated normal (std 0.02, cut at 2 std) weight matrix.
  Var add_weight(const std::string& name, std::size_t rows, std::size_t cols, std::mt19937_64& rng);
  Var add_zeros(const std::string& name, std::size_t rows, std::size_t cols, bool decay_exempt = true);
  Var add_ones(const std::string& name, std::size_t rows, std::size_t cols, bool decay_exempt = true);

  const Parameter* find(const std::string& name) const;
  Var get(const std::string& name) const;
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  void zero_grad();
  std::size_t count_values() const;

 private:
  std::vector<Parameter> params_;
};

double truncated_normal(std::mt19937_64& rng, double stddev);

}  // namespace sdqc::nn
