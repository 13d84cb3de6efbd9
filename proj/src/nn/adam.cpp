#include "sdqc/nn/adam.hpp"

#include <cmath>

#include "sdqc/error.hpp"

namespace sdqc::nn {

void AdamState::step(ParamStore& params) {
  auto& all = params.all();
  if (t_ == 0 && m_.empty()) {
    for (const auto& p : all) {
      m_.emplace_back(p.var->value.values.size(), 0.0);
      v_.emplace_back(p.var->value.values.size(), 0.0);
    }
  }
  if (m_.size() != all.size()) fail(ErrorCode::StateShapeMismatch, "optimizer state tracks a different parameter set");
  for (std::size_t i = 0; i < all.size(); ++i)
    if (m_[i].size() != all[i].var->value.values.size())
      fail(ErrorCode::StateShapeMismatch, "optimizer state shape differs for " + all[i].name);

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& p = all[i];
    if (!p.trainable) continue;
    auto& theta = p.var->value.values;
    p.var->ensure_grad();
    const auto& g = p.var->grad;
    auto& m = m_[i];
    auto& v = v_[i];
    const double decay = p.decay_exempt ? 0.0 : cfg_.weight_decay;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      theta[j] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + decay * theta[j]);
    }
  }
}

}  // namespace sdqc::nn
