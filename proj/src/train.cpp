#include "sdqc/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "sdqc/error.hpp"

namespace sdqc {

std::string_view class_weighting_name(ClassWeighting w) {
  return w == ClassWeighting::FlatPrior ? "flat_prior" : "none";
}

ClassWeighting parse_class_weighting(std::string_view s) {
  if (s == "flat_prior") return ClassWeighting::FlatPrior;
  if (s == "none") return ClassWeighting::None;
  fail(ErrorCode::InvalidConfig, "unknown class weighting '" + std::string(s) + "'");
}

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.lr = 1e-6;
  c.lr_low = 1e-6;
  c.lr_high = 2e-6;
  c.batch_size = 32;
  return c;
}

void TrainConfig::validate() const {
  if (!(lr > 0) || !(lr_low > 0) || lr_low > lr_high) fail(ErrorCode::InvalidConfig, "need lr > 0 and 0 < low <= high");
  if (batch_size < 1) fail(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (epochs < 0) fail(ErrorCode::InvalidConfig, "epochs must be >= 0");
  if (max_len < 8) fail(ErrorCode::InvalidConfig, "max_len must be >= 8");
  if (weight_decay < 0) fail(ErrorCode::InvalidConfig, "weight_decay must be >= 0");
}

std::array<double, kNumClasses> class_weights(const std::array<long long, kNumClasses>& counts) {
  long long total = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[c] <= 0)
      fail(ErrorCode::EmptyClass, std::string("no training examples for class ") + label_letter(label_from_code(c)));
    total += counts[c];
  }
  std::array<double, kNumClasses> w{};
  for (int c = 0; c < kNumClasses; ++c)
    w[c] = static_cast<double>(total) / (kNumClasses * static_cast<double>(counts[c]));
  return w;
}

std::array<long long, kNumClasses> label_counts(std::span<const Example> examples) {
  std::array<long long, kNumClasses> counts{};
  for (const auto& e : examples) {
    if (!e.label) fail(ErrorCode::MissingLabel, "unlabeled example " + e.id);
    ++counts[code(*e.label)];
  }
  return counts;
}

nn::Var weighted_ce(const nn::Var& scores, std::span<const int> gold, std::span<const double> weights) {
  return nn::weighted_cross_entropy(scores, gold, weights);
}

std::vector<std::vector<std::size_t>> length_ordered_batches(std::span<const Example> examples,
                                                             std::size_t batch_size) {
  if (batch_size == 0) fail(ErrorCode::InvalidConfig, "batch size must be >= 1");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto la = examples[a].encoded.size(), lb = examples[b].encoded.size();
    if (la != lb) return la < lb;
    return examples[a].id < examples[b].id;
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  return batches;
}

Evaluation evaluate(StanceModel& model, std::span<const Example> examples, std::size_t batch_size) {
  Evaluation ev;
  auto& pm = ev.predictions;
  bool all_labeled = true;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    std::vector<const Example*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&examples[i]);
    const auto outs = predict(model, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      pm.ids.push_back(batch[i]->id);
      pm.scores.push_back(outs[i].scores);
      pm.probs.push_back(outs[i].probs);
      pm.gold.push_back(batch[i]->label);
      all_labeled = all_labeled && batch[i]->label.has_value();
    }
  }
  if (all_labeled && !examples.empty()) {
    const auto gold = pm.gold_codes();
    const auto pred = pm.predicted();
    ev.metrics = compute_metrics(gold, pred);
  }
  return ev;
}

Trainer::Trainer(StanceModel& model, const TrainConfig& cfg, std::span<const Example> train)
    : model_(model), cfg_(cfg), train_(train) {
  cfg_.validate();
  if (train.empty()) fail(ErrorCode::EmptyDataset, "no training examples");
  const auto counts = label_counts(train);
  weights_.fill(1.0);
  if (cfg_.class_weighting == ClassWeighting::FlatPrior) weights_ = class_weights(counts);
  batches_ = length_ordered_batches(train, static_cast<std::size_t>(cfg_.batch_size));
  nn::AdamConfig ac;
  ac.lr = cfg_.lr;
  ac.weight_decay = cfg_.weight_decay;
  adam_ = nn::AdamState(ac);
}

double Trainer::run_epoch() {
  double total = 0.0;
  std::vector<const Example*> batch;
  std::vector<int> gold;
  for (const auto& idx : batches_) {
    batch.clear();
    gold.clear();
    for (auto i : idx) {
      batch.push_back(&train_[i]);
      gold.push_back(code(*train_[i].label));
    }
    model_.params().zero_grad();
    const nn::Var loss = weighted_ce(model_.forward_scores(batch, true), gold, weights_);
    nn::backward(loss);
    adam_.step(model_.params());
    total += loss->value.values[0];
  }
  model_.params().zero_grad();
  ++epochs_;
  return total / static_cast<double>(batches_.size());
}

std::string CheckpointMeta::to_json() const {
  nlohmann::ordered_json j;
  j["path"] = path;
  j["model"] = model_kind_name(kind);
  j["dev_macro_f1"] = dev_macro_f1;
  j["lr"] = lr;
  j["seed"] = seed;
  j["epoch"] = epoch;
  return j.dump(2) + "\n";
}

CheckpointMeta CheckpointMeta::from_json(const std::string& text) {
  CheckpointMeta m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.path = j.at("path").get<std::string>();
    m.kind = parse_model_kind(j.at("model").get<std::string>());
    m.dev_macro_f1 = j.at("dev_macro_f1").get<double>();
    m.lr = j.at("lr").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.epoch = j.at("epoch").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedDocument, std::string("checkpoint meta: ") + e.what());
  }
  return m;
}

TrainResult train_model(StanceModel& model, const TrainConfig& cfg, std::span<const Example> train,
                        std::span<const Example> dev) {
  Trainer trainer(model, cfg, train);
  TrainResult res;
  res.meta.kind = model.kind();
  res.meta.lr = cfg.lr;
  res.meta.seed = cfg.seed;
  res.best = model_snapshot(model);
  double best_f1 = -1.0;
  if (!dev.empty()) {
    auto frozen = model_from_checkpoint(res.best);
    best_f1 = evaluate(*frozen, dev, static_cast<std::size_t>(cfg.batch_size)).metrics.macro_f1;
    res.meta.dev_macro_f1 = best_f1;
  }
  for (int e = 1; e <= cfg.epochs; ++e) {
    res.epoch_loss.push_back(trainer.run_epoch());
    auto image = model_snapshot(model);
    if (dev.empty()) {
      res.best = std::move(image);
      res.meta.epoch = e;
      continue;
    }
    // Score the stored float32 image so the recorded F1 is what a reload sees.
    auto frozen = model_from_checkpoint(image);
    const double f1 = evaluate(*frozen, dev, static_cast<std::size_t>(cfg.batch_size)).metrics.macro_f1;
    res.epoch_dev_f1.push_back(f1);
    if (f1 > best_f1) {
      best_f1 = f1;
      res.best = std::move(image);
      res.meta.epoch = e;
      res.meta.dev_macro_f1 = f1;
    }
  }
  nn::restore(res.best, model.params(), true);
  return res;
}

std::vector<CheckpointMeta> filter_checkpoints(std::span<const CheckpointMeta> metas, double threshold_percent) {
  std::vector<CheckpointMeta> kept;
  // Stored fractions times 100 can land a hair under an exact percent boundary.
  for (const auto& m : metas)
    if (m.dev_macro_f1 * 100.0 + 1e-9 >= threshold_percent) kept.push_back(m);
  return kept;
}

}  // namespace sdqc
