#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdqc/metrics.hpp"
#include "sdqc/powell.hpp"

namespace sdqc {

enum class FusionMode { TopN, ExcN, TopNScores, OptF1 };
std::string_view fusion_mode_name(FusionMode m);  // "top_n", "exc_n", "top_n_scores", "opt_f1"
FusionMode parse_fusion_mode(std::string_view s);

// Several models' outputs over one split; all members share the example order.
struct PredictionSet {
  std::vector<std::string> model_ids;
  std::vector<PredictionMatrix> members;
  std::vector<int> gold;  // class codes; may be empty when only applying a fusion

  std::size_t size() const { return members.size(); }
  std::size_t examples() const { return members.empty() ? 0 : members.front().size(); }
  // EmptyPredictionSet, ExampleOrderMismatch, ShapeMismatch.
  void validate() const;
};

struct FusionResult {
  FusionMode mode = FusionMode::TopN;
  std::uint64_t seed = 0;
  std::vector<std::string> selected;  // in the order they joined (or survived)
  std::vector<double> weights;        // opt_f1 only
  double dev_macro_f1 = 0.0;
  std::vector<double> history;        // ensemble F1 after each accepted step

  std::string to_json() const;
  static FusionResult from_json(const std::string& text);
};

// Combined rows for members `idx` of `ps`: probability averages (weighted when
// `weights` is given) or, for top_n_scores, score averages. Labels come from
// the argmax of these rows.
std::vector<ClassArray> fuse_rows(FusionMode mode, const PredictionSet& ps, std::span<const std::size_t> idx,
                                  std::span<const double> weights = {});
std::vector<int> fused_labels(FusionMode mode, const PredictionSet& ps, std::span<const std::size_t> idx,
                              std::span<const double> weights = {});
double ensemble_f1(FusionMode mode, const PredictionSet& ps, std::span<const std::size_t> idx,
                   std::span<const double> weights = {});

FusionResult fuse_top_n(const PredictionSet& ps, std::uint64_t seed);
FusionResult fuse_exc_n(const PredictionSet& ps);
FusionResult fuse_top_n_scores(const PredictionSet& ps, std::uint64_t seed);

struct OptF1Options {
  PowellOptions powell{1e-12, 50, {8.0, 401, 4, 40}};
  // Weight every model of the set instead of the top_n selection.
  bool all_models = false;
};
FusionResult fuse_opt_f1(const PredictionSet& ps, std::uint64_t seed, const OptF1Options& opt = {});

FusionResult fuse(FusionMode mode, const PredictionSet& ps, std::uint64_t seed);

// softmax(z): the unconstrained-to-simplex map used by opt_f1.
std::vector<double> simplex_weights(std::span<const double> z);

struct AppliedFusion {
  std::vector<int> labels;
  PredictionMatrix fused;  // probs and scores of the combination; gold copied from the first member
};

// Re-applies a fitted fusion to another split without re-selecting members.
AppliedFusion apply_fusion(const FusionResult& fr, const PredictionSet& ps);

}  // namespace sdqc
