#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sdqc/metrics.hpp"
#include "sdqc/models.hpp"
#include "sdqc/nn/adam.hpp"

namespace sdqc {

enum class ClassWeighting { FlatPrior, None };
std::string_view class_weighting_name(ClassWeighting w);
ClassWeighting parse_class_weighting(std::string_view s);

struct TrainConfig {
  double lr = 3e-4;
  // Replica learning rates are drawn uniformly from [lr_low, lr_high].
  double lr_low = 1e-4;
  double lr_high = 5e-4;
  int batch_size = 32;
  int epochs = 20;
  std::uint64_t seed = 1;
  int max_len = 200;
  ClassWeighting class_weighting = ClassWeighting::FlatPrior;
  double weight_decay = 0.01;

  // The learning-rate interval used at full scale with a pre-trained encoder.
  static TrainConfig full_scale();
  void validate() const;
};

// w_c = T / (4 n_c), so every class carries the same total weight T/4.
std::array<double, kNumClasses> class_weights(const std::array<long long, kNumClasses>& counts);
std::array<long long, kNumClasses> label_counts(std::span<const Example> examples);

// Mean over the batch of w_gold · (−log softmax(scores)[gold]).
nn::Var weighted_ce(const nn::Var& scores, std::span<const int> gold, std::span<const double> weights);

// Indices sorted by encoded length (ties by id), cut into consecutive batches.
std::vector<std::vector<std::size_t>> length_ordered_batches(std::span<const Example> examples,
                                                             std::size_t batch_size);

struct Evaluation {
  Metrics metrics;
  PredictionMatrix predictions;
};

// Full-split inference in the given order. Metrics are only computed when
// every example is labeled; otherwise they stay zero.
Evaluation evaluate(StanceModel& model, std::span<const Example> examples, std::size_t batch_size = 32);

// One optimizer owning one model; run_epoch performs a full ordered pass.
class Trainer {
 public:
  Trainer(StanceModel& model, const TrainConfig& cfg, std::span<const Example> train);

  double run_epoch();  // mean batch loss
  int epochs_done() const { return epochs_; }
  const std::array<double, kNumClasses>& weights() const { return weights_; }

 private:
  StanceModel& model_;
  TrainConfig cfg_;
  std::span<const Example> train_;
  std::vector<std::vector<std::size_t>> batches_;
  std::array<double, kNumClasses> weights_{};
  nn::AdamState adam_;
  int epochs_ = 0;
};

struct CheckpointMeta {
  std::string path;
  ModelKind kind = ModelKind::MicroBert;
  double dev_macro_f1 = 0.0;  // fraction in [0,1]
  double lr = 0.0;
  std::uint64_t seed = 0;
  int epoch = 0;

  std::string to_json() const;
  static CheckpointMeta from_json(const std::string& text);
};

struct TrainResult {
  CheckpointMeta meta;
  nn::CheckpointData best;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_dev_f1;
};

// Trains for cfg.epochs, evaluating dev after every epoch on the float32
// checkpoint image and keeping the strictly best one. On return the model
// holds the best checkpoint's values. meta.path is left empty.
TrainResult train_model(StanceModel& model, const TrainConfig& cfg, std::span<const Example> train,
                        std::span<const Example> dev);

// Keeps metas whose dev macro F1, in percent, is at least `threshold_percent`.
std::vector<CheckpointMeta> filter_checkpoints(std::span<const CheckpointMeta> metas, double threshold_percent);

}  // namespace sdqc
