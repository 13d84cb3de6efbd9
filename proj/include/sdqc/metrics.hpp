#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdqc/thread_data.hpp"

namespace sdqc {

using ClassArray = std::array<double, kNumClasses>;
using Confusion = std::array<std::array<long long, kNumClasses>, kNumClasses>;  // [gold][pred]

// Per-class values are indexed by class code (S, D, Q, C). Precision, recall
// and F1 are 0 whenever their denominator is 0.
struct Metrics {
  std::size_t n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  ClassArray precision{};
  ClassArray recall{};
  ClassArray f1{};
  Confusion confusion{};
};

Metrics compute_metrics(std::span<const int> gold, std::span<const int> pred);
Metrics metrics_from_confusion(const Confusion& confusion);

// Model outputs over one split, rows in the split's canonical order.
struct PredictionMatrix {
  std::vector<std::string> ids;
  std::vector<ClassArray> probs;
  std::vector<ClassArray> scores;
  std::vector<std::optional<StanceLabel>> gold;

  std::size_t size() const { return ids.size(); }
  std::vector<int> predicted() const;  // argmax of probs
  std::vector<int> gold_codes() const; // MissingLabel if any row is unlabeled
};

}  // namespace sdqc
