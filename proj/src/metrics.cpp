#include "sdqc/metrics.hpp"

#include "sdqc/error.hpp"
#include "sdqc/models.hpp"

namespace sdqc {

namespace {
double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

__int128 gcd128(__int128 a, __int128 b) {
  while (b != 0) {
    const __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}
}  // namespace

Metrics metrics_from_confusion(const Confusion& confusion) {
  Metrics m;
  m.confusion = confusion;
  long long total = 0, correct = 0;
  for (int g = 0; g < kNumClasses; ++g)
    for (int p = 0; p < kNumClasses; ++p) {
      total += confusion[g][p];
      if (g == p) correct += confusion[g][p];
    }
  m.n = static_cast<std::size_t>(total);
  m.accuracy = ratio(static_cast<double>(correct), static_cast<double>(total));
  // Macro F1 is summed as an exact fraction so that it is divided once, correctly rounded.
  __int128 num = 0, den = 1;
  for (int c = 0; c < kNumClasses; ++c) {
    long long tp = confusion[c][c], pred_c = 0, gold_c = 0;
    for (int k = 0; k < kNumClasses; ++k) {
      pred_c += confusion[k][c];
      gold_c += confusion[c][k];
    }
    m.precision[c] = ratio(static_cast<double>(tp), static_cast<double>(pred_c));
    m.recall[c] = ratio(static_cast<double>(tp), static_cast<double>(gold_c));
    m.f1[c] = ratio(2.0 * m.precision[c] * m.recall[c], m.precision[c] + m.recall[c]);
    if (pred_c + gold_c > 0) {
      const __int128 n = 2 * static_cast<__int128>(tp), d = pred_c + gold_c;
      num = num * d + n * den;
      den *= d;
      const __int128 g = gcd128(num, den);
      if (g > 1) num /= g, den /= g;
    }
  }
  m.macro_f1 = static_cast<double>(num) / static_cast<double>(den * kNumClasses);
  return m;
}

Metrics compute_metrics(std::span<const int> gold, std::span<const int> pred) {
  if (gold.size() != pred.size()) fail(ErrorCode::ShapeMismatch, "gold and predicted lengths differ");
  Confusion cm{};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= kNumClasses || pred[i] < 0 || pred[i] >= kNumClasses)
      fail(ErrorCode::ShapeMismatch, "class code out of range");
    ++cm[gold[i]][pred[i]];
  }
  return metrics_from_confusion(cm);
}

std::vector<int> PredictionMatrix::predicted() const {
  std::vector<int> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(argmax4(p));
  return out;
}

std::vector<int> PredictionMatrix::gold_codes() const {
  std::vector<int> out;
  out.reserve(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!gold[i]) fail(ErrorCode::MissingLabel, "no gold label for " + ids[i]);
    out.push_back(code(*gold[i]));
  }
  return out;
}

}  // namespace sdqc
