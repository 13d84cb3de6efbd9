#pragma once

#include <cstdint>
#include <vector>

#include "sdqc/nn/params.hpp"

namespace sdqc::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.01;
};

// Bias-corrected Adam with decoupled weight decay (lr·wd·θ, skipped for
// decay-exempt parameters). Constant learning rate, no warmup.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore& params);
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  // Moment buffers for parameter i (empty before the first step).
  const std::vector<double>& first_moment(std::size_t i) const { return m_.at(i); }
  const std::vector<double>& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace sdqc::nn
