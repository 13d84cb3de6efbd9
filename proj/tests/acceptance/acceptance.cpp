// Acceptance run: one line per criterion, non-zero exit if any fails.
// Usage: acceptance <path-to-sdqc-cli> [--only N]

#include <omp.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sdqc/error.hpp"
#include "sdqc/fusion.hpp"
#include "sdqc/introspect.hpp"
#include "sdqc/metrics.hpp"
#include "sdqc/powell.hpp"
#include "sdqc/pretrain.hpp"
#include "sdqc/train.hpp"
#include "support/gradcheck.hpp"
#include "support/synthetic.hpp"

using namespace sdqc;
namespace fs = std::filesystem;

namespace {

std::string g_cli;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

fs::path work_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("sdqc_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + g_cli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

void write_corpus(const std::vector<ThreadEntry>& threads, const fs::path& dir) {
  fs::create_directories(dir / "threads");
  std::vector<ManifestEntry> manifest;
  for (const auto& t : threads) {
    const auto p = dir / "threads" / (t.thread.thread_id + ".json");
    std::ofstream(p, std::ios::binary) << serialize_thread(t.thread) << "\n";
    manifest.push_back({p, t.split});
  }
  write_manifest(dir / "manifest.tsv", manifest);
}

// ---------------------------------------------------------------------------

Outcome dataset_statistics() {
  Outcome o;
  const auto& want = testing::kReleaseCounts;
  fs::path manifest;
  if (const char* official = std::getenv("SDQC_OFFICIAL_MANIFEST")) {
    manifest = official;
    o.detail = "official dataset";
  } else {
    const auto dir = work_dir("stats");
    write_corpus(testing::corpus_with_counts(want, {327, 38, 81}, 1), dir);
    manifest = dir / "manifest.tsv";
    o.detail = "official data not on disk (set SDQC_OFFICIAL_MANIFEST); checked on a synthetic corpus with the release class counts";
  }
  const auto log = work_dir("stats_log") / "stats.log";
  o.require(run_cli("stats --manifest \"" + manifest.string() + "\"", log) == 0, "stats command failed");
  std::istringstream in(slurp(log));
  std::string line;
  std::getline(in, line);  // header
  const std::array<std::int64_t, 3> totals{5217, 1485, 1827};
  for (std::size_t s = 0; s < 3 && o.pass; ++s) {
    std::string name;
    std::array<long long, 5> got{};
    if (!std::getline(in, line)) {
      o.require(false, "stats printed fewer than 3 rows");
      break;
    }
    std::istringstream row(line);
    row >> name >> got[0] >> got[1] >> got[2] >> got[3] >> got[4];
    for (int c = 0; c < 4; ++c) o.require(got[c] == want[s][c], "count mismatch in row: " + line);
    o.require(got[4] == totals[s], "total mismatch in row: " + line);
  }
  return o;
}

Outcome gradient_correctness() {
  Outcome o;
  using namespace nn;
  std::mt19937_64 rng(2);
  std::ostringstream worst;
  const auto check = [&](const std::string& name, const std::function<Var()>& loss, const std::vector<Var>& leaves) {
    std::mt19937_64 pick(3);
    const auto r = testing::grad_check(loss, leaves, 200, pick);
    worst << name << " " << r.max_rel_raw << "/" << r.max_abs << " ";
    o.require(r.checked >= 200 && r.failures == 0, name + ": " + std::to_string(r.failures) + " coordinates off");
  };
  const auto project = [](const Var& v, std::uint64_t seed) {
    std::mt19937_64 r(seed);
    return sum(mul(v, constant(testing::random_tensor(v->rows(), v->cols(), r))));
  };
  const auto perturb = [&](ParamStore& s, double scale) {
    std::normal_distribution<double> d(0.0, scale);
    for (auto& p : s.all())
      for (auto& v : p.var->value.values) v += d(rng);
  };

  {
    ParamStore s;
    const auto lin = Linear::create(s, "lin", 6, 5, rng);
    const auto ln = LayerNormParams::create(s, "ln", 5);
    perturb(s, 0.5);
    const auto x = leaf(testing::random_tensor(4, 6, rng));
    check("linear", [&] { return project(lin(x), 1); }, {x, lin.weight, lin.bias});
    check("layer_norm", [&] { return project(ln(lin(x)), 2); }, {x, ln.gain, ln.bias});
  }
  {
    const auto tt = leaf(testing::random_tensor(9, 4, rng)), st = leaf(testing::random_tensor(2, 4, rng)),
               pt = leaf(testing::random_tensor(6, 4, rng));
    const std::vector<std::int32_t> tok{2, 8, 8, 3, 1, 3}, seg{0, 0, 0, 0, 1, 1}, pos{0, 1, 2, 3, 4, 5};
    check("embedding_sum", [&] { return project(tanh(embedding_sum(tt, st, pt, tok, seg, pos)), 3); }, {tt, st, pt});
  }
  {
    ParamStore s;
    const auto att = AttentionParams::create(s, "att", 8, 2, rng);
    perturb(s, 0.3);
    const auto x = leaf(testing::random_tensor(5, 8, rng));
    const std::vector<unsigned char> mask{0, 0, 0, 0, 1};
    std::vector<Var> leaves{x};
    for (auto& p : s.all()) leaves.push_back(p.var);
    check("attention", [&] { return project(multi_head_attention(x, att, mask).output, 4); }, leaves);
  }
  {
    ParamStore s;
    const auto tl = TransformerLayerParams::create(s, "t", 8, 2, 16, rng);
    perturb(s, 0.3);
    const auto x = leaf(testing::random_tensor(5, 8, rng));
    std::vector<Var> leaves{x};
    for (auto& p : s.all()) leaves.push_back(p.var);
    check("transformer", [&] { return project(transformer_layer(x, tl, {}).output, 5); }, leaves);
  }
  {
    ParamStore s;
    const auto bl = BiLstmParams::create(s, "b", 6, 4, rng);
    perturb(s, 0.4);
    const auto x = leaf(testing::random_tensor(4, 6, rng));
    std::vector<Var> leaves{x};
    for (auto& p : s.all()) leaves.push_back(p.var);
    check("bilstm", [&] { return project(bilstm(x, bl), 6); }, leaves);
  }

  const auto data = testing::separable_set(4, 40, 7);
  std::vector<const Example*> batch;
  std::vector<int> gold;
  for (const auto& e : data) batch.push_back(&e), gold.push_back(code(*e.label));
  const std::vector<double> w{1.41, 3.45, 3.30, 0.37};
  const auto classifier_check = [&](const std::string& name, StanceModel& m) {
    perturb(m.params(), 0.2);
    std::vector<Var> leaves;
    for (auto& p : m.params().all()) leaves.push_back(p.var);
    check(name, [&] { return weighted_cross_entropy(m.forward_scores(batch, false), gold, w); }, leaves);
  };
  {
    MicroBertConfig c;
    c.hidden = 8;
    c.heads = 2;
    c.ff_dim = 16;
    c.vocab_size = 40;
    c.max_len = 32;
    MicroBert m(c, 8);
    classifier_check("micro_bert", m);
  }
  {
    FeaturesNN m(FeaturesNNConfig{8, 6}, 9);
    classifier_check("features_nn", m);
  }
  {
    BiLstmSelfAttConfig c;
    c.vocab_size = 40;
    c.max_len = 32;
    c.embed_dim = 5;
    c.hidden = 3;
    c.hops = 2;
    c.attention_dim = 4;
    BiLstmSelfAtt m(c, 10);
    classifier_check("bilstm_selfatt", m);
  }
  if (o.pass) o.detail = "max rel/abs error: " + worst.str();
  return o;
}

Outcome overfit_check() {
  Outcome o;
  omp_set_num_threads(1);
  const auto train = testing::separable_set(64, 60, 11);
  MicroBertConfig c;
  c.layers = 2;
  c.hidden = 64;
  c.heads = 4;
  c.ff_dim = 256;
  c.vocab_size = 60;
  c.max_len = 32;
  MicroBert m(c, 12);
  TrainConfig tc;
  tc.seed = 12;
  Trainer trainer(m, tc, train);
  double acc = 0.0;
  int epoch = 0;
  while (epoch < 200 && acc < 0.95) {
    trainer.run_epoch();
    ++epoch;
    acc = evaluate(m, train).metrics.accuracy;
  }
  omp_set_num_threads(omp_get_num_procs());
  o.require(acc >= 0.95, "train accuracy " + std::to_string(acc) + " after 200 epochs");
  o.detail = "train accuracy " + std::to_string(acc) + " after " + std::to_string(epoch) + " epochs";
  return o;
}

Outcome truncation_property() {
  Outcome o;
  const auto ids = [](std::size_t n) { return std::vector<std::int32_t>(n, 20); };
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> len(8, 400);
  std::uniform_int_distribution<std::size_t> doc(0, 500);
  for (int i = 0; i < 10000 && o.pass; ++i) {
    EncoderConfig cfg;
    cfg.max_len = len(rng);
    const std::size_t n1 = doc(rng), n2 = doc(rng);
    const auto e = encode_pair(ids(n1), ids(n2), cfg);
    const auto cap = static_cast<std::size_t>(cfg.doc_cap());
    o.require(e.size() <= static_cast<std::size_t>(cfg.max_len), "encoded length over budget");
    if (static_cast<std::size_t>(e.doc2_len) < n2)
      o.require(static_cast<std::size_t>(e.doc1_len) == std::min(n1, cap),
                "document 2 shortened while document 1 was below its cap");
  }
  EncoderConfig l200;
  const auto a = encode_pair(ids(180), ids(30), l200);
  const auto b = encode_pair(ids(150), ids(120), l200);
  o.require(a.doc1_len == 167 && a.doc2_len == 30, "fixture (180,30) at l=200");
  o.require(b.doc1_len == 98 && b.doc2_len == 98, "fixture (150,120) at l=200");
  if (o.pass) o.detail = "10000 random triples, fixtures (180,30)->(167,30) and (150,120)->(98,98)";
  return o;
}

Outcome tokenizer_properties() {
  Outcome o;
  std::vector<std::string> toks{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[EOS]", "$URL$", "$mention$",
                                "a", "b", "ab", "##b", "un", "##aff", "##able", "caf", "##\xc3\xa9"};
  const Vocab v(toks);
  o.require(wordpiece_tokenize("abb", v) == std::vector<std::string>{"ab", "##b"}, "abb");
  o.require(wordpiece_tokenize("ba", v) == std::vector<std::string>{"[UNK]"}, "ba");
  o.require(wordpiece_tokenize("unaffable", v) == std::vector<std::string>{"un", "##aff", "##able"}, "unaffable");
  o.require(wordpiece_tokenize("caf\xc3\xa9", v) == std::vector<std::string>{"caf", "##\xc3\xa9"}, "cafe");
  o.require(wordpiece_tokenize("$URL$ [EOS]", v) == std::vector<std::string>{"$URL$", "[EOS]"}, "placeholders");

  std::mt19937_64 rng(14);
  std::vector<std::string> corpus;
  for (int i = 0; i < 500; ++i) corpus.push_back(normalize(testing::random_tweet(rng)));
  const auto trained = train_vocab(corpus, 400);
  int checked = 0;
  while (checked < 1000 && o.pass) {
    const auto n = normalize(testing::random_tweet(rng));
    const auto pieces = wordpiece_tokenize(n, trained);
    if (std::count(pieces.begin(), pieces.end(), std::string("[UNK]")) > 0) continue;
    ++checked;
    o.require(detokenize(pieces) == split_whitespace(n), "detokenize mismatch on: " + n);
  }
  for (int i = 0; i < 1000 && o.pass; ++i) {
    const auto once = normalize(testing::random_tweet(rng));
    o.require(normalize(once) == once, "normalize not idempotent on: " + once);
  }
  if (o.pass) o.detail = "fixtures, 1000 round trips, 1000 idempotence checks";
  return o;
}

Outcome flat_prior() {
  Outcome o;
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<long long> cnt(1, 1000000);
  for (int i = 0; i < 10000 && o.pass; ++i) {
    const std::array<long long, 4> n{cnt(rng), cnt(rng), cnt(rng), cnt(rng)};
    const auto w = class_weights(n);
    const double ref = w[0] * static_cast<double>(n[0]);
    for (int c = 1; c < 4; ++c)
      o.require(std::abs(w[c] * static_cast<double>(n[c]) - ref) <= 1e-12 * std::max(1.0, ref), "w_c n_c differs");
  }
  const auto w = class_weights({925, 378, 395, 3519});
  const std::array<double, 4> want{1.4100, 3.4504, 3.3019, 0.3706};
  for (int c = 0; c < 4; ++c) o.require(std::abs(w[c] - want[c]) <= 5e-5, "training-split weight " + std::to_string(c));
  char buf[128];
  std::snprintf(buf, sizeof buf, "weights %.4f %.4f %.4f %.4f", w[0], w[1], w[2], w[3]);
  if (o.pass) o.detail = buf;
  return o;
}

Outcome metric_oracle() {
  Outcome o;
  std::mt19937_64 rng(16);
  std::uniform_int_distribution<int> len(0, 50), cls(0, 3);
  for (int t = 0; t < 1000 && o.pass; ++t) {
    const int n = len(rng);
    std::vector<int> gold(n), pred(n);
    for (int i = 0; i < n; ++i) gold[i] = cls(rng), pred[i] = cls(rng);
    // Brute force: count hits per class straight from the pairs.
    double f1 = 0.0, hits = 0.0;
    for (int c = 0; c < 4; ++c) {
      double tp = 0, np = 0, ng = 0;
      for (int i = 0; i < n; ++i) {
        tp += gold[i] == c && pred[i] == c;
        np += pred[i] == c;
        ng += gold[i] == c;
      }
      f1 += np + ng > 0 ? 2.0 * tp / (np + ng) : 0.0;
    }
    for (int i = 0; i < n; ++i) hits += gold[i] == pred[i];
    const auto m = compute_metrics(gold, pred);
    o.require(std::abs(m.macro_f1 - f1 / 4.0) <= 1e-12, "macro F1 differs from the brute-force value");
    o.require(std::abs(m.accuracy - (n ? hits / n : 0.0)) <= 1e-12, "accuracy differs from the brute-force value");
  }
  const std::vector<int> gold{0, 0, 1, 2, 3}, pred{0, 1, 1, 2, 3};
  o.require(compute_metrics(gold, pred).macro_f1 == 5.0 / 6.0, "hand fixture is not exactly 5/6");
  if (o.pass) o.detail = "1000 random vectors, fixture = 5/6";
  return o;
}

Outcome fusion_suite() {
  Outcome o;
  const auto ps = testing::toy_pool(8, 200, 17);
  std::vector<double> subset_f1(256, 0.0);
  for (std::size_t mask = 1; mask < 256; ++mask) {
    std::vector<std::size_t> idx;
    for (std::size_t m = 0; m < 8; ++m)
      if (mask >> m & 1) idx.push_back(m);
    subset_f1[mask] = ensemble_f1(FusionMode::TopN, ps, idx);
  }
  const double global = *std::max_element(subset_f1.begin(), subset_f1.end());
  double best_single = 0.0;
  for (std::size_t m = 0; m < 8; ++m) best_single = std::max(best_single, subset_f1[std::size_t{1} << m]);
  const auto index_of = [&](const std::string& id) {
    return static_cast<std::size_t>(std::find(ps.model_ids.begin(), ps.model_ids.end(), id) - ps.model_ids.begin());
  };

  std::ostringstream info;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto top = fuse_top_n(ps, seed);
    for (std::size_t i = 1; i < top.history.size(); ++i)
      o.require(top.history[i] > top.history[i - 1], "top_n accepted a non-improving addition");
    const double seeded = subset_f1[std::size_t{1} << index_of(top.selected.front())];
    o.require(top.dev_macro_f1 >= seeded, "top_n ended below its seeded singleton");
    o.require(top.dev_macro_f1 <= global, "top_n exceeds the exhaustive optimum");
    o.require(top.dev_macro_f1 >= best_single, "top_n (seed " + std::to_string(seed) + ") F1 " +
                                                   std::to_string(top.dev_macro_f1) + " below best single model " +
                                                   std::to_string(best_single));
    o.require(fuse_top_n(ps, seed).to_json() == top.to_json(), "top_n not deterministic");
    if (seed == 1) info << "top_n " << top.dev_macro_f1 << " (best single " << best_single << ", optimum " << global << ")";

    const auto opt = fuse_opt_f1(ps, seed);
    o.require(opt.dev_macro_f1 >= top.dev_macro_f1, "opt_f1 below the uniform average of its members");
    o.require(fuse_opt_f1(ps, seed).to_json() == opt.to_json(), "opt_f1 not deterministic");
  }
  const auto exc = fuse_exc_n(ps);
  for (std::size_t i = 1; i < exc.history.size(); ++i)
    o.require(exc.history[i] > exc.history[i - 1], "exc_n accepted a non-improving drop");
  o.require(exc.dev_macro_f1 >= subset_f1[255], "exc_n ended below the all-model ensemble");
  o.require(fuse_exc_n(ps).to_json() == exc.to_json(), "exc_n not deterministic");
  info << ", exc_n " << exc.dev_macro_f1;

  // 2-member pools: Powell weights against a 0.001 grid.
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto pair = testing::toy_pool(2, 200, 40 + s);
    OptF1Options opt;
    opt.all_models = true;
    const auto fr = fuse_opt_f1(pair, 1, opt);
    const std::vector<std::size_t> both{0, 1};
    double grid = 0.0;
    for (int k = 0; k <= 1000; ++k) {
      const std::vector<double> w{k / 1000.0, 1.0 - k / 1000.0};
      grid = std::max(grid, ensemble_f1(FusionMode::OptF1, pair, both, w));
    }
    o.require(fr.dev_macro_f1 >= ensemble_f1(FusionMode::OptF1, pair, both), "opt_f1 below uniform weights");
    o.require(std::abs(fr.dev_macro_f1 - grid) <= 0.005,
              "opt_f1 " + std::to_string(fr.dev_macro_f1) + " vs grid " + std::to_string(grid));
    if (s == 0) info << ", 2-member opt_f1 " << fr.dev_macro_f1 << " vs grid " << grid;
  }
  if (o.pass) o.detail = info.str();
  return o;
}

Outcome powell_optimizer() {
  Outcome o;
  const Objective quad = [](std::span<const double> x) {
    return (x[0] - 3.0) * (x[0] - 3.0) + (x[1] + 1.0) * (x[1] + 1.0);
  };
  const auto q = powell_minimize(quad, {0.0, 0.0});
  o.require(std::abs(q.x[0] - 3.0) <= 1e-6 && std::abs(q.x[1] + 1.0) <= 1e-6, "quadratic minimum missed");
  const Objective rosen = [](std::span<const double> x) {
    return 100.0 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + (1.0 - x[0]) * (1.0 - x[0]);
  };
  PowellOptions opt;
  opt.max_iter = 200;
  const auto r = powell_minimize(rosen, {-1.2, 1.0}, opt);
  o.require(r.f < 1e-6, "Rosenbrock f = " + std::to_string(r.f));
  const auto r2 = powell_minimize(rosen, {-1.5, 2.5}, opt);
  o.require(r2.f < 1e-6, "Rosenbrock from (-1.5, 2.5) f = " + std::to_string(r2.f));
  for (const auto* res : {&q, &r, &r2})
    for (std::size_t i = 1; i < res->history.size(); ++i)
      o.require(res->history[i] <= res->history[i - 1], "objective increased across a cycle");
  char buf[200];
  std::snprintf(buf, sizeof buf, "quadratic x=(%.9f, %.9f); Rosenbrock f=%.3g in %d cycles, f=%.3g in %d from (-1.5, 2.5)",
                q.x[0], q.x[1], r.f, r.cycles, r2.f, r2.cycles);
  if (o.pass) o.detail = buf;
  return o;
}

Outcome pretraining_objective() {
  Outcome o;
  std::mt19937_64 rng(18);
  std::vector<std::string> texts;
  for (int i = 0; i < 200; ++i) texts.push_back(normalize(testing::random_tweet(rng) + ". " + testing::random_tweet(rng)));
  const auto vocab = train_vocab(texts, 300);
  const auto sentences = corpus_sentences(texts, vocab);

  // Exactly round(15%) of non-special positions on every sequence.
  std::size_t not_next = 0, samples = 0;
  while (samples < 10000 && o.pass) {
    for (const auto& ex : mlm_nsp_batch(sentences, vocab.size(), 100, 128, rng)) {
      std::size_t plain = 0;
      for (std::size_t i = 0; i < ex.input.size(); ++i) {
        const bool masked = std::binary_search(ex.positions.begin(), ex.positions.end(), i);
        const auto original = masked ? ex.targets[static_cast<std::size_t>(
                                           std::lower_bound(ex.positions.begin(), ex.positions.end(), i) -
                                           ex.positions.begin())]
                                     : ex.input.token_ids[i];
        plain += original >= kNumSpecials;
      }
      o.require(ex.positions.size() == masked_count(plain), "masked count differs from round(0.15 n)");
      not_next += ex.is_next ? 0 : 1;
      ++samples;
    }
  }
  const double frac = static_cast<double>(not_next) / static_cast<double>(samples);
  o.require(std::abs(frac - 0.5) <= 0.02, "not-next fraction " + std::to_string(frac));

  MicroBertConfig c;
  c.layers = 2;
  c.hidden = 32;
  c.heads = 4;
  c.ff_dim = 64;
  c.vocab_size = static_cast<int>(vocab.size());
  c.max_len = 128;
  c.pretraining_heads = true;
  MicroBert m(c, 19);
  const auto batch = mlm_nsp_batch(sentences, vocab.size(), 32, 128, rng);
  const double loss = pretrain_loss(m, batch, false)->value.values[0];
  const double expected = std::log(static_cast<double>(vocab.size())) + std::log(2.0);
  o.require(std::abs(loss - expected) <= 0.1 * expected,
            "initial loss " + std::to_string(loss) + " vs " + std::to_string(expected));
  char buf[160];
  std::snprintf(buf, sizeof buf, "not-next %.4f over %zu pairs; initial loss %.4f vs ln|V|+ln2 = %.4f", frac, samples,
                loss, expected);
  if (o.pass) o.detail = buf;
  return o;
}

Outcome attention_introspection() {
  Outcome o;
  using namespace nn;
  std::mt19937_64 rng(20);
  {
    ParamStore s;
    auto p = AttentionParams::create(s, "att", 4, 1, rng);
    Tensor eye(4, 4);
    for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
    p.query.weight->value = eye;
    p.key.weight->value = eye;
    const auto out = multi_head_attention(constant(eye), p, {});
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        o.require(std::abs(out.scores[0].at(i, j) - (i == j ? 0.5 : 0.0)) <= 1e-15, "A != I/sqrt(d_k)");
  }
  MicroBertConfig c;
  c.hidden = 16;
  c.heads = 4;
  c.ff_dim = 32;
  c.vocab_size = 40;
  c.max_len = 32;
  MicroBert m(c, 21);
  for (auto& p : m.params().all())
    for (auto& v : p.var->value.values) v += std::normal_distribution<double>(0.0, 0.1)(rng);
  const auto data = testing::separable_set(10, 40, 22);
  for (const auto& ex : data) {
    const auto recs = capture(m, ex.encoded, nullptr, 32);
    o.require(recs.size() == 8, "expected 8 attention records");
    for (const auto& r : recs)
      for (std::size_t i = 0; i < 32; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 32; ++j) {
          if (j >= ex.encoded.size()) o.require(r.probs.at(i, j) == 0.0, "masked column has weight");
          sum += r.probs.at(i, j);
        }
        o.require(std::abs(sum - 1.0) <= 1e-6, "attention row does not sum to 1");
      }
    const EncodedExample* one = &ex.encoded;
    MicroBertForwardOptions padded;
    padded.pad_to = 32;
    const auto a = m.forward(std::span(&one, 1), {});
    const auto b = m.forward(std::span(&one, 1), padded);
    for (int k = 0; k < 4; ++k)
      o.require(std::abs(softmax4({a.scores->value.values[0], a.scores->value.values[1], a.scores->value.values[2],
                                   a.scores->value.values[3]})[k] -
                         softmax4({b.scores->value.values[0], b.scores->value.values[1], b.scores->value.values[2],
                                   b.scores->value.values[3]})[k]) <= 1e-6,
                "padding changed the classifier output");
  }
  const auto recs = capture(m, data[0].encoded);
  const auto path = work_dir("heatmap") / "head.pgm";
  export_heatmap(recs[0].probs, path);
  const auto g = read_graymap(path);
  const auto& vals = recs[0].probs.values;
  o.require(g.width == recs[0].probs.cols() && g.height == recs[0].probs.rows(), "heatmap shape changed");
  const double lo = *std::min_element(vals.begin(), vals.end()), hi = *std::max_element(vals.begin(), vals.end());
  const double step = (hi - lo) / 255.0;
  for (std::size_t a = 0; a < vals.size(); ++a)
    for (std::size_t b = 0; b < vals.size(); ++b)
      if (vals[a] > vals[b] + step) o.require(g.pixels[a] > g.pixels[b], "heatmap ranking not preserved");
  if (o.pass) o.detail = "identity fixture, 80 records, padding invariance, P5 round trip";
  return o;
}

Outcome end_to_end_determinism() {
  Outcome o;
  const auto dir = work_dir("e2e");
  write_corpus(testing::corpus_with_counts({{{12, 8, 8, 30}, {4, 3, 3, 10}, {3, 3, 3, 8}}}, {6, 2, 2}, 23), dir / "data");
  const std::string manifest = "\"" + (dir / "data" / "manifest.tsv").string() + "\"";
  const std::string vocab = "\"" + (dir / "vocab.txt").string() + "\"";
  o.require(run_cli("build-vocab --manifest " + manifest + " --size 300 --out " + vocab, dir / "vocab.log") == 0,
            "build-vocab failed: " + slurp(dir / "vocab.log"));
  const std::string common = "train --manifest " + manifest + " --vocab " + vocab +
                             " --model micro_bert --layers 1 --hidden 16 --heads 2 --ff-dim 32 --max-len 64"
                             " --epochs 3 --batch-size 8 --seed 7 --out ";
  for (const char* run : {"run1", "run2"})
    o.require(run_cli(common + "\"" + (dir / run).string() + "\"", dir / (std::string(run) + ".log")) == 0,
              std::string("train failed: ") + slurp(dir / (std::string(run) + ".log")));
  std::size_t compared = 0;
  if (o.pass)
    for (const auto& e : fs::recursive_directory_iterator(dir / "run1")) {
      if (!e.is_regular_file() || e.path().filename() == "effective_config.txt") continue;
      const auto rel = fs::relative(e.path(), dir / "run1");
      o.require(fs::exists(dir / "run2" / rel), rel.string() + " missing in second run");
      o.require(slurp(e.path()) == slurp(dir / "run2" / rel), rel.string() + " differs between runs");
      ++compared;
    }
  o.require(compared >= 5, "expected checkpoint, meta, metrics and prediction files");
  if (o.pass) o.detail = std::to_string(compared) + " output files byte-identical";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2 && !(argc == 4 && std::string(argv[2]) == "--only")) {
    std::fprintf(stderr, "usage: acceptance <sdqc-cli> [--only N]\n");
    return 2;
  }
  g_cli = fs::absolute(argv[1]).string();
  const std::size_t only = argc == 4 ? std::stoul(argv[3]) : 0;

  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"dataset statistics", 10, dataset_statistics},
      {"gradient correctness", 120, gradient_correctness},
      {"overfit check", 300, overfit_check},
      {"truncation property", 5, truncation_property},
      {"tokenizer properties", 10, tokenizer_properties},
      {"flat-prior invariant", 1, flat_prior},
      {"metric oracle", 5, metric_oracle},
      {"fusion suite", 120, fusion_suite},
      {"powell optimizer", 30, powell_optimizer},
      {"pre-training objective", 60, pretraining_objective},
      {"attention/introspection", 30, attention_introspection},
      {"end-to-end determinism", 600, end_to_end_determinism},
  };

  int failures = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && only != i + 1) continue;
    ++ran;
    const auto& c = criteria[i];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.pass && secs > c.budget_s) {
      o.pass = false;
      o.detail = "took " + std::to_string(secs) + " s, budget " + std::to_string(c.budget_s) + " s; " + o.detail;
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s  %2zu %-24s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", i + 1, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion %zu\n", only);
    return 2;
  }
  std::printf("%d of %d criteria passed\n", ran - failures, ran);
  fs::remove_all(fs::temp_directory_path() / ("sdqc_acceptance_" + std::to_string(::getpid())));
  return failures == 0 ? 0 : 1;
}
