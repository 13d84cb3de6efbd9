#include "sdqc/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "sdqc/error.hpp"
#include "sdqc/models.hpp"

namespace sdqc {

namespace {
constexpr double kImprovement = 1e-12;
}

std::string_view fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::TopN: return "top_n";
    case FusionMode::ExcN: return "exc_n";
    case FusionMode::TopNScores: return "top_n_scores";
    case FusionMode::OptF1: return "opt_f1";
  }
  return "unknown";
}

FusionMode parse_fusion_mode(std::string_view s) {
  if (s == "top_n") return FusionMode::TopN;
  if (s == "exc_n") return FusionMode::ExcN;
  if (s == "top_n_scores") return FusionMode::TopNScores;
  if (s == "opt_f1") return FusionMode::OptF1;
  fail(ErrorCode::InvalidConfig, "unknown fusion mode '" + std::string(s) + "'");
}

void PredictionSet::validate() const {
  if (members.empty()) fail(ErrorCode::EmptyPredictionSet, "no models in the prediction set");
  if (model_ids.size() != members.size()) fail(ErrorCode::ShapeMismatch, "model id count differs from member count");
  const auto& ref = members.front();
  for (std::size_t m = 0; m < members.size(); ++m) {
    const auto& pm = members[m];
    if (pm.probs.size() != pm.ids.size() || pm.scores.size() != pm.ids.size())
      fail(ErrorCode::ShapeMismatch, "ragged prediction matrix for " + model_ids[m]);
    if (pm.ids != ref.ids) fail(ErrorCode::ExampleOrderMismatch, model_ids[m] + " lists different examples or order");
  }
  if (!gold.empty() && gold.size() != ref.size()) fail(ErrorCode::ShapeMismatch, "gold length differs from predictions");
  std::vector<std::string> sorted = model_ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    fail(ErrorCode::ShapeMismatch, "duplicate model id in prediction set");
}

std::vector<double> simplex_weights(std::span<const double> z) {
  std::vector<double> w(z.size());
  if (z.empty()) return w;
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (w[i] = std::exp(z[i] - mx));
  for (auto& v : w) v /= s;
  return w;
}

std::vector<ClassArray> fuse_rows(FusionMode mode, const PredictionSet& ps, std::span<const std::size_t> idx,
                                  std::span<const double> weights) {
  if (idx.empty()) fail(ErrorCode::EmptyPredictionSet, "fusing zero models");
  if (!weights.empty() && weights.size() != idx.size()) fail(ErrorCode::ShapeMismatch, "one weight per member");
  const std::size_t n = ps.members.at(idx.front()).size();
  std::vector<ClassArray> rows(n, ClassArray{});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& pm = ps.members[idx[k]];
    const auto& src = mode == FusionMode::TopNScores ? pm.scores : pm.probs;
    const double w = weights.empty() ? 1.0 / static_cast<double>(idx.size()) : weights[k];
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < kNumClasses; ++c) rows[i][c] += w * src[i][c];
  }
  return rows;
}

std::vector<int> fused_labels(FusionMode mode, const PredictionSet& ps, std::span<const std::size_t> idx,
                              std::span<const double> weights) {
  const auto rows = fuse_rows(mode, ps, idx, weights);
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (const auto& r : rows) labels.push_back(argmax4(r));
  return labels;
}

double ensemble_f1(FusionMode mode, const PredictionSet& ps, std::span<const std::size_t> idx,
                   std::span<const double> weights) {
  if (ps.gold.size() != ps.examples()) fail(ErrorCode::MissingLabel, "fusion selection needs gold labels");
  return compute_metrics(ps.gold, fused_labels(mode, ps, idx, weights)).macro_f1;
}

namespace {

FusionResult greedy_forward(const PredictionSet& ps, std::uint64_t seed, FusionMode mode) {
  ps.validate();
  std::mt19937_64 rng(seed);
  const std::size_t k = ps.size();
  std::vector<std::size_t> chosen{std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)};
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < k; ++i)
    if (i != chosen[0]) rest.push_back(i);

  FusionResult fr;
  fr.mode = mode;
  fr.seed = seed;
  double best = ensemble_f1(mode, ps, chosen);
  fr.history.push_back(best);
  for (bool added = true; added && !rest.empty();) {
    added = false;
    std::shuffle(rest.begin(), rest.end(), rng);
    std::vector<std::size_t> still_out;
    for (auto cand : rest) {
      chosen.push_back(cand);
      const double f1 = ensemble_f1(mode, ps, chosen);
      if (f1 > best + kImprovement) {
        best = f1;
        fr.history.push_back(f1);
        added = true;
      } else {
        chosen.pop_back();
        still_out.push_back(cand);
      }
    }
    rest = std::move(still_out);
  }
  for (auto i : chosen) fr.selected.push_back(ps.model_ids[i]);
  fr.dev_macro_f1 = best;
  return fr;
}

std::vector<std::size_t> member_indices(const FusionResult& fr, const PredictionSet& ps) {
  std::vector<std::size_t> idx;
  for (const auto& id : fr.selected) {
    auto it = std::find(ps.model_ids.begin(), ps.model_ids.end(), id);
    if (it == ps.model_ids.end()) fail(ErrorCode::MissingModel, "prediction set has no model '" + id + "'");
    idx.push_back(static_cast<std::size_t>(it - ps.model_ids.begin()));
  }
  return idx;
}

}  // namespace

FusionResult fuse_top_n(const PredictionSet& ps, std::uint64_t seed) {
  return greedy_forward(ps, seed, FusionMode::TopN);
}

FusionResult fuse_top_n_scores(const PredictionSet& ps, std::uint64_t seed) {
  return greedy_forward(ps, seed, FusionMode::TopNScores);
}

FusionResult fuse_exc_n(const PredictionSet& ps) {
  ps.validate();
  std::vector<std::size_t> kept(ps.size());
  std::iota(kept.begin(), kept.end(), 0);
  FusionResult fr;
  fr.mode = FusionMode::ExcN;
  double current = ensemble_f1(FusionMode::ExcN, ps, kept);
  fr.history.push_back(current);
  while (kept.size() > 1) {
    std::vector<double> f1(kept.size());
    const long long m = static_cast<long long>(kept.size());
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < m; ++r) {
      std::vector<std::size_t> without;
      for (long long j = 0; j < m; ++j)
        if (j != r) without.push_back(kept[static_cast<std::size_t>(j)]);
      f1[static_cast<std::size_t>(r)] = ensemble_f1(FusionMode::ExcN, ps, without);
    }
    // Largest gain wins; among equal gains the lowest model index (kept is ascending).
    std::size_t drop = 0;
    for (std::size_t r = 1; r < kept.size(); ++r)
      if (f1[r] > f1[drop]) drop = r;
    if (!(f1[drop] > current + kImprovement)) break;
    current = f1[drop];
    fr.history.push_back(current);
    kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  for (auto i : kept) fr.selected.push_back(ps.model_ids[i]);
  fr.dev_macro_f1 = current;
  return fr;
}

FusionResult fuse_opt_f1(const PredictionSet& ps, std::uint64_t seed, const OptF1Options& opt) {
  FusionResult fr;
  if (opt.all_models) {
    ps.validate();
    fr.seed = seed;
    fr.selected = ps.model_ids;
    std::vector<std::size_t> all(ps.size());
    std::iota(all.begin(), all.end(), 0);
    fr.dev_macro_f1 = ensemble_f1(FusionMode::OptF1, ps, all);
    fr.history.push_back(fr.dev_macro_f1);
  } else {
    fr = greedy_forward(ps, seed, FusionMode::TopN);
  }
  fr.mode = FusionMode::OptF1;
  const auto idx = member_indices(fr, ps);
  if (idx.size() == 1) {
    fr.weights = {1.0};
    return fr;
  }
  const Objective objective = [&](std::span<const double> z) {
    const auto w = simplex_weights(z);
    return -ensemble_f1(FusionMode::OptF1, ps, idx, w);
  };
  const auto res = powell_minimize(objective, std::vector<double>(idx.size(), 0.0), opt.powell);
  fr.weights = simplex_weights(res.x);
  fr.dev_macro_f1 = ensemble_f1(FusionMode::OptF1, ps, idx, fr.weights);
  for (std::size_t i = 1; i < res.history.size(); ++i)
    if (res.history[i] < res.history[i - 1]) fr.history.push_back(-res.history[i]);
  return fr;
}

FusionResult fuse(FusionMode mode, const PredictionSet& ps, std::uint64_t seed) {
  switch (mode) {
    case FusionMode::TopN: return fuse_top_n(ps, seed);
    case FusionMode::ExcN: {
      auto fr = fuse_exc_n(ps);
      fr.seed = seed;
      return fr;
    }
    case FusionMode::TopNScores: return fuse_top_n_scores(ps, seed);
    case FusionMode::OptF1: return fuse_opt_f1(ps, seed);
  }
  fail(ErrorCode::InvalidConfig, "unknown fusion mode");
}

AppliedFusion apply_fusion(const FusionResult& fr, const PredictionSet& ps) {
  if (ps.members.empty()) fail(ErrorCode::EmptyPredictionSet, "no models in the prediction set");
  const auto idx = member_indices(fr, ps);
  const auto& ref_ids = ps.members[idx.front()].ids;
  for (auto i : idx)
    if (ps.members[i].ids != ref_ids)
      fail(ErrorCode::ExampleOrderMismatch, ps.model_ids[i] + " lists different examples or order");
  if (fr.mode == FusionMode::OptF1 && fr.weights.size() != idx.size())
    fail(ErrorCode::ShapeMismatch, "opt_f1 result needs one weight per selected model");
  const std::span<const double> w = fr.mode == FusionMode::OptF1 ? std::span<const double>(fr.weights)
                                                                   : std::span<const double>();

  // Build a view whose members all share the reference order.
  AppliedFusion out;
  auto& pm = out.fused;
  pm.ids = ref_ids;
  pm.gold = ps.members[idx.front()].gold;
  const auto rows = fuse_rows(fr.mode, ps, idx, w);
  for (const auto& r : rows) out.labels.push_back(argmax4(r));
  if (fr.mode == FusionMode::TopNScores) {
    pm.scores = rows;
    for (const auto& r : rows) pm.probs.push_back(softmax4(r));
  } else {
    pm.probs = rows;
    pm.scores = fuse_rows(FusionMode::TopNScores, ps, idx, w);
  }
  return out;
}

std::string FusionResult::to_json() const {
  nlohmann::ordered_json j;
  j["mode"] = fusion_mode_name(mode);
  j["seed"] = seed;
  j["selected"] = selected;
  if (mode == FusionMode::OptF1)
    j["weights"] = weights;
  else
    j["weights"] = nullptr;
  j["dev_macro_f1"] = dev_macro_f1;
  j["history"] = history;
  return j.dump(2) + "\n";
}

FusionResult FusionResult::from_json(const std::string& text) {
  FusionResult fr;
  try {
    const auto j = nlohmann::json::parse(text);
    fr.mode = parse_fusion_mode(j.at("mode").get<std::string>());
    fr.seed = j.at("seed").get<std::uint64_t>();
    fr.selected = j.at("selected").get<std::vector<std::string>>();
    if (j.contains("weights") && !j.at("weights").is_null()) fr.weights = j.at("weights").get<std::vector<double>>();
    fr.dev_macro_f1 = j.at("dev_macro_f1").get<double>();
    if (j.contains("history")) fr.history = j.at("history").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedDocument, std::string("fusion result: ") + e.what());
  }
  return fr;
}

}  // namespace sdqc
