// sdqc: rumour-stance toolkit command line.

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdqc/dataset.hpp"
#include "sdqc/error.hpp"
#include "sdqc/features.hpp"
#include "sdqc/fusion.hpp"
#include "sdqc/ingest.hpp"
#include "sdqc/introspect.hpp"
#include "sdqc/io.hpp"
#include "sdqc/models.hpp"
#include "sdqc/nn/checkpoint.hpp"
#include "sdqc/numfmt.hpp"
#include "sdqc/pretrain.hpp"
#include "sdqc/textprep.hpp"
#include "sdqc/thread_data.hpp"
#include "sdqc/train.hpp"

namespace fs = std::filesystem;
using namespace sdqc;

namespace {

// ---- config files -----------------------------------------------------------

// Appends --key=value for every config-file entry the command line does not set.
std::vector<std::string> merge_config_file(std::vector<std::string> args) {
  fs::path config;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (config.empty()) return args;
  const auto kv = parse_key_values(read_text_file(config));
  for (const auto& [key, value] : kv) {
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given && key != "config") args.push_back(flag + "=" + value);
  }
  return args;
}

// key=value lines for every option of `cmd`, as resolved after parsing.
std::string effective_config(const CLI::App& cmd) {
  KeyValues kv;
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
    } else {
      value = opt->get_default_str();
    }
    if (value.empty() && opt->get_expected_min() == 0) value = "false";
    if (value.empty()) continue;
    kv[name] = value;
  }
  return format_key_values(kv);
}

// ---- shared option groups ----------------------------------------------------

struct DataOptions {
  std::string manifest;
  std::string vocab;
  int max_len = 200;
  bool no_source = false;
  bool no_previous = false;
  std::string word_vectors;
  std::string negation;
  std::string swear;

  void add(CLI::App* cmd, bool need_vocab = true) {
    cmd->add_option("--manifest", manifest, "Dataset manifest (path<TAB>split per line)")->required();
    auto* v = cmd->add_option("--vocab", vocab, "WordPiece vocabulary file");
    if (need_vocab) v->required();
    cmd->add_option("--max-len", max_len, "Pair encoding length limit l (>= 8)");
    cmd->add_flag("--no-source", no_source, "Drop the source post from document 1");
    cmd->add_flag("--no-previous", no_previous, "Drop the previous post from document 1");
    cmd->add_option("--word-vectors", word_vectors, "Word-vector text file (token + values); hashed vectors if unset");
    cmd->add_option("--negation-lexicon", negation, "Negation word list; built-in list if unset");
    cmd->add_option("--swear-lexicon", swear, "Swear word list; built-in list if unset");
  }

  EncoderConfig encoder() const {
    EncoderConfig e;
    e.max_len = max_len;
    e.include_source = !no_source;
    e.include_previous = !no_previous;
    e.validate();
    return e;
  }
};

struct LoadedData {
  std::vector<ThreadEntry> dataset;
  Vocab vocab;
  WordVectors word_vectors;
  Lexicons lexicons;

  std::vector<Example> examples(Split split, const EncoderConfig& enc) const {
    return build_examples(dataset, split, ExampleSources{vocab, enc, word_vectors, lexicons});
  }
};

LoadedData load_data(const DataOptions& d) {
  LoadedData out{load_dataset(d.manifest), Vocab::load(d.vocab),
                 d.word_vectors.empty() ? WordVectors(50) : WordVectors::load(d.word_vectors), Lexicons::defaults()};
  if (!d.negation.empty()) out.lexicons.negation = Lexicons::load_list(d.negation);
  if (!d.swear.empty()) out.lexicons.swear = Lexicons::load_list(d.swear);
  return out;
}

struct ModelOptions {
  std::string kind = "micro_bert";
  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int ff_dim = 256;
  double dropout = 0.0;
  int features_hidden = 50;
  int embed_dim = 64;
  int lstm_hidden = 64;
  int hops = 4;
  int attention_dim = 64;

  void add(CLI::App* cmd, bool with_kind) {
    if (with_kind)
      cmd->add_option("--model", kind, "micro_bert | features_nn | bilstm_selfatt")
          ->check(CLI::IsMember({"micro_bert", "features_nn", "bilstm_selfatt"}));
    cmd->add_option("--layers", layers, "micro_bert: encoder layers N");
    cmd->add_option("--hidden", hidden, "micro_bert: hidden size d");
    cmd->add_option("--heads", heads, "micro_bert: attention heads h");
    cmd->add_option("--ff-dim", ff_dim, "micro_bert: feed-forward width");
    cmd->add_option("--dropout", dropout, "micro_bert: dropout probability during training");
    if (with_kind) {
      cmd->add_option("--features-hidden", features_hidden, "features_nn: hidden units");
      cmd->add_option("--embed-dim", embed_dim, "bilstm_selfatt: embedding width");
      cmd->add_option("--lstm-hidden", lstm_hidden, "bilstm_selfatt: hidden units per direction");
      cmd->add_option("--hops", hops, "bilstm_selfatt: attention rows r");
      cmd->add_option("--attention-dim", attention_dim, "bilstm_selfatt: attention scoring width");
    }
  }

  KeyValues config(ModelKind k, const EncoderConfig& enc, std::size_t vocab_size, std::size_t feature_dim,
                   bool pretraining_heads = false) const {
    switch (k) {
      case ModelKind::MicroBert: {
        MicroBertConfig c;
        c.layers = layers;
        c.hidden = hidden;
        c.heads = heads;
        c.ff_dim = ff_dim;
        c.dropout = dropout;
        c.vocab_size = static_cast<int>(vocab_size);
        c.max_len = enc.max_len;
        c.pretraining_heads = pretraining_heads;
        c.include_source = enc.include_source;
        c.include_previous = enc.include_previous;
        return c.to_kv();
      }
      case ModelKind::FeaturesNN: {
        FeaturesNNConfig c;
        c.input_dim = static_cast<int>(feature_dim);
        c.hidden = features_hidden;
        return c.to_kv();
      }
      case ModelKind::BiLstmSelfAtt: {
        BiLstmSelfAttConfig c;
        c.vocab_size = static_cast<int>(vocab_size);
        c.max_len = enc.max_len;
        c.embed_dim = embed_dim;
        c.hidden = lstm_hidden;
        c.hops = hops;
        c.attention_dim = attention_dim;
        c.include_source = enc.include_source;
        c.include_previous = enc.include_previous;
        return c.to_kv();
      }
    }
    return {};
  }
};

void write_snapshot(const CLI::App& cmd, const fs::path& out_dir) {
  write_text_file(out_dir / "effective_config.txt", effective_config(cmd));
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

void print_metrics(const std::string& what, const Metrics& m) {
  std::cout << what << ": accuracy " << percent(m.accuracy) << "  macro_f1 " << percent(m.macro_f1) << "  F1_S "
            << percent(m.f1[0]) << "  F1_Q " << percent(m.f1[2]) << "  F1_D " << percent(m.f1[1]) << "  F1_C "
            << percent(m.f1[3]) << "\n";
}

bool all_labeled(const std::vector<Example>& ex) {
  return !ex.empty() && std::all_of(ex.begin(), ex.end(), [](const Example& e) { return e.label.has_value(); });
}

// Data for a split of a model already trained: encoder settings come from the checkpoint.
std::vector<Example> examples_for(const LoadedData& data, const StanceModel& model, Split split) {
  return data.examples(split, encoder_config_of(model));
}

// ---- subcommands ---------------------------------------------------------------

struct IngestCmd {
  CLI::App* cmd_ = nullptr;
  std::vector<std::string> roots;
  std::string train_key, dev_key, test_key, out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("ingest", "Convert a competition release into thread files and a manifest");
    c->add_option("--release", roots, "Release directories holding per-thread folders (repeatable)")->required();
    c->add_option("--train-key", train_key, "Stance key for the training split");
    c->add_option("--dev-key", dev_key, "Stance key for the dev split");
    c->add_option("--test-key", test_key, "Stance key for the test split");
    c->add_option("--out", out, "Output directory")->required();
    cmd_ = c;
  }

  void run(const CLI::App& cmd) {
    std::map<Split, fs::path> keys;
    if (!train_key.empty()) keys[Split::Train] = train_key;
    if (!dev_key.empty()) keys[Split::Dev] = dev_key;
    if (!test_key.empty()) keys[Split::Test] = test_key;
    if (keys.empty()) fail(ErrorCode::InvalidConfig, "give at least one of --train-key, --dev-key, --test-key");
    std::vector<fs::path> paths(roots.begin(), roots.end());
    const auto s = ingest_release(paths, keys, out);
    write_snapshot(cmd, out);
    std::cout << "threads " << s.threads << "  posts " << s.posts << "  skipped " << s.skipped_threads << "\n";
  }
};

struct StatsCmd {
  CLI::App* cmd_ = nullptr;
  std::string manifest;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("stats", "Per-split class counts");
    c->add_option("--manifest", manifest, "Dataset manifest")->required();
    cmd_ = c;
  }

  void run() {
    const auto stats = split_stats(load_dataset(manifest));
    std::printf("%-6s %6s %6s %6s %6s %7s\n", "split", "S", "D", "Q", "C", "total");
    for (const auto& s : stats)
      std::printf("%-6s %6lld %6lld %6lld %6lld %7lld\n", std::string(split_name(s.split)).c_str(),
                  static_cast<long long>(s.counts[0]), static_cast<long long>(s.counts[1]),
                  static_cast<long long>(s.counts[2]), static_cast<long long>(s.counts[3]),
                  static_cast<long long>(s.total));
  }
};

struct BuildVocabCmd {
  CLI::App* cmd_ = nullptr;
  std::string manifest, out, split = "train";
  std::size_t size = 2000;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("build-vocab", "Train a WordPiece vocabulary on one split's posts");
    c->add_option("--manifest", manifest, "Dataset manifest")->required();
    c->add_option("--split", split, "Split whose posts form the corpus");
    c->add_option("--size", size, "Target vocabulary size including specials and alphabet");
    c->add_option("--out", out, "Vocabulary file to write")->required();
    cmd_ = c;
  }

  void run() {
    const Split which = parse_split(split);
    std::vector<std::string> corpus;
    for (const auto& e : load_dataset(manifest))
      if (e.split == which)
        for (const auto& id : e.thread.file_order) corpus.push_back(normalize(e.thread.posts.at(id).text));
    const Vocab v = train_vocab(corpus, size);
    v.save(out);
    std::cout << "vocabulary " << v.size() << " tokens, checksum " << v.checksum() << "\n";
  }
};

struct EncodeCmd {
  CLI::App* cmd_ = nullptr;
  DataOptions data;
  std::string split = "train", out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("encode", "Write the encoded pair cache for one split");
    data.add(c);
    c->add_option("--split", split, "train | dev | test");
    c->add_option("--out", out, "Cache file to write")->required();
    cmd_ = c;
  }

  void run() {
    const auto d = load_data(data);
    const auto enc = data.encoder();
    const auto ex = d.examples(parse_split(split), enc);
    std::vector<EncodedExample> encoded;
    for (const auto& e : ex) encoded.push_back(e.encoded);
    write_encoded_cache(out, enc.max_len, d.vocab.checksum(), encoded);
    std::cout << "encoded " << encoded.size() << " examples\n";
  }
};

struct PretrainCmd {
  CLI::App* cmd_ = nullptr;
  DataOptions data;
  ModelOptions model;
  PretrainConfig cfg;
  std::string corpus, out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("pretrain", "Masked-token + next-sentence pre-training of micro_bert");
    c->option_defaults()->always_capture_default();
    data.add(c);
    model.add(c, false);
    c->add_option("--corpus", corpus, "Plain-text corpus, one document per line; training posts if unset");
    c->add_option("--steps", cfg.steps, "Optimizer steps");
    c->add_option("--batch-size", cfg.batch_size, "Sentence pairs per step");
    c->add_option("--lr", cfg.lr, "Adam learning rate");
    c->add_option("--weight-decay", cfg.weight_decay, "Decoupled weight decay");
    c->add_option("--seed", cfg.seed, "Seed for initialization and sampling");
    c->add_option("--out", out, "Output directory")->required();
    cmd_ = c;
  }

  void run(const CLI::App& cmd) {
    const auto d = load_data(data);
    std::vector<std::string> texts;
    if (!corpus.empty()) {
      std::istringstream in(read_text_file(corpus));
      for (std::string line; std::getline(in, line);)
        if (!line.empty()) texts.push_back(line);
    } else {
      for (const auto& e : d.dataset)
        if (e.split == Split::Train)
          for (const auto& id : e.thread.file_order) texts.push_back(e.thread.posts.at(id).text);
    }
    const auto sentences = corpus_sentences(texts, d.vocab);
    const auto enc = data.encoder();
    MicroBert bert(MicroBertConfig::from_kv(model.config(ModelKind::MicroBert, enc, d.vocab.size(), 0, true)),
                   cfg.seed);
    const auto res = pretrain(bert, sentences, cfg);
    fs::create_directories(out);
    nn::save_checkpoint(fs::path(out) / "pretrained.ckpt", model_snapshot(bert));
    std::string log = "step\tloss\n";
    for (std::size_t i = 0; i < res.losses.size(); ++i)
      log += std::to_string(i + 1) + "\t" + format_double(res.losses[i]) + "\n";
    write_text_file(fs::path(out) / "pretrain_loss.tsv", log);
    write_snapshot(cmd, out);
    if (!res.losses.empty())
      std::cout << "pretrain loss " << res.losses.front() << " -> " << res.losses.back() << "\n";
  }
};

void write_split_outputs(const fs::path& out, const std::string& split, const std::string& model_id,
                         const Evaluation& ev, bool labeled) {
  const fs::path dir = out / "predictions" / split;
  write_predictions(dir / (model_id + ".tsv"), ev.predictions);
  if (labeled) write_gold(dir / "gold.tsv", ev.predictions);
}

struct TrainCmd {
  CLI::App* cmd_ = nullptr;
  DataOptions data;
  ModelOptions model;
  TrainConfig cfg;
  std::string weighting = "flat_prior";
  int replicas = 1;
  std::string init, out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("train", "Train stance classifiers; keeps the best-dev checkpoint");
    c->option_defaults()->always_capture_default();
    data.add(c);
    model.add(c, true);
    c->add_option("--lr", cfg.lr, "Adam learning rate (single replica)");
    c->add_option("--lr-low", cfg.lr_low, "Replica learning-rate interval, lower end");
    c->add_option("--lr-high", cfg.lr_high, "Replica learning-rate interval, upper end");
    c->add_option("--batch-size", cfg.batch_size, "Examples per batch");
    c->add_option("--epochs", cfg.epochs, "Training epochs");
    c->add_option("--weight-decay", cfg.weight_decay, "Decoupled weight decay");
    c->add_option("--seed", cfg.seed, "Seed of the first replica (replica k uses seed + k)");
    c->add_option("--class-weighting", weighting, "flat_prior | none")
        ->check(CLI::IsMember({"flat_prior", "none"}));
    c->add_option("--replicas", replicas, "Models to train; with R > 1 each draws lr from [lr-low, lr-high]")
        ->check(CLI::PositiveNumber);
    c->add_option("--init", init, "Checkpoint whose same-named parameters initialize the model");
    c->add_option("--out", out, "Output directory")->required();
    cmd_ = c;
  }

  void run(const CLI::App& cmd) {
    const ModelKind kind = parse_model_kind(model.kind);
    cfg.max_len = data.max_len;
    cfg.class_weighting = parse_class_weighting(weighting);
    cfg.validate();
    const auto d = load_data(data);
    const auto enc = data.encoder();
    const auto train = d.examples(Split::Train, enc);
    const auto dev = d.examples(Split::Dev, enc);
    const auto test = d.examples(Split::Test, enc);
    if (train.empty()) fail(ErrorCode::EmptyDataset, "manifest has no training threads");
    const std::size_t feature_dim = train.front().features.size();
    const KeyValues model_cfg = model.config(kind, enc, d.vocab.size(), feature_dim);
    std::optional<nn::CheckpointData> init_ckpt;
    if (!init.empty()) init_ckpt = nn::load_checkpoint(init);

    const fs::path out_dir = out;
    fs::create_directories(out_dir / "models");
    write_snapshot(cmd, out_dir);
    std::mt19937_64 lr_rng(cfg.seed);
    std::uniform_real_distribution<double> lr_dist(cfg.lr_low, cfg.lr_high);
    for (int r = 0; r < replicas; ++r) {
      TrainConfig rc = cfg;
      rc.seed = cfg.seed + static_cast<std::uint64_t>(r);
      if (replicas > 1) rc.lr = lr_dist(lr_rng);
      const std::string id = model.kind + "-s" + std::to_string(rc.seed);
      auto m = create_model(kind, model_cfg, rc.seed);
      if (init_ckpt) nn::restore(*init_ckpt, m->params(), false);
      auto res = train_model(*m, rc, train, dev);

      res.meta.path = "models/" + id + ".ckpt";
      nn::save_checkpoint(out_dir / res.meta.path, res.best);
      write_text_file(out_dir / "models" / (id + ".meta.json"), res.meta.to_json());

      nlohmann::ordered_json metrics;
      const auto dev_ev = evaluate(*m, dev, static_cast<std::size_t>(rc.batch_size));
      write_split_outputs(out_dir, "dev", id, dev_ev, all_labeled(dev));
      metrics["dev"] = nlohmann::ordered_json::parse(format_metrics(dev_ev.metrics));
      print_metrics(id + " dev (epoch " + std::to_string(res.meta.epoch) + ")", dev_ev.metrics);
      if (!test.empty()) {
        const auto test_ev = evaluate(*m, test, static_cast<std::size_t>(rc.batch_size));
        write_split_outputs(out_dir, "test", id, test_ev, all_labeled(test));
        if (all_labeled(test)) {
          metrics["test"] = nlohmann::ordered_json::parse(format_metrics(test_ev.metrics));
          print_metrics(id + " test", test_ev.metrics);
        }
      }
      write_text_file(out_dir / "models" / (id + ".metrics.json"), metrics.dump(2) + "\n");
    }
  }
};

struct EvalCmd {
  CLI::App* cmd_ = nullptr;
  DataOptions data;
  std::string checkpoint, split = "dev", out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("eval", "Score a checkpoint on one split");
    data.add(c);
    c->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    c->add_option("--split", split, "train | dev | test");
    c->add_option("--out", out, "Directory for metrics.json, predictions.tsv and gold.tsv");
    cmd_ = c;
  }

  void run() {
    const auto d = load_data(data);
    auto m = model_from_checkpoint(nn::load_checkpoint(checkpoint));
    const auto ex = examples_for(d, *m, parse_split(split));
    const auto ev = evaluate(*m, ex);
    if (all_labeled(ex)) print_metrics(split, ev.metrics);
    if (!out.empty()) {
      write_predictions(fs::path(out) / "predictions.tsv", ev.predictions);
      if (all_labeled(ex)) {
        write_gold(fs::path(out) / "gold.tsv", ev.predictions);
        write_text_file(fs::path(out) / "metrics.json", format_metrics(ev.metrics));
      }
    }
  }
};

struct EnsembleCmd {
  CLI::App* cmd_ = nullptr;
  std::string dev, test, mode = "top_n", metas, out;
  std::uint64_t seed = 0;
  double min_dev_f1 = 0.0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("ensemble", "Fit a fusion on dev predictions and apply it to test");
    c->option_defaults()->always_capture_default();
    c->add_option("--dev", dev, "Directory of dev prediction files plus gold.tsv")->required();
    c->add_option("--test", test, "Directory of test prediction files (optional)");
    c->add_option("--mode", mode, "top_n | exc_n | top_n_scores | opt_f1")
        ->check(CLI::IsMember({"top_n", "exc_n", "top_n_scores", "opt_f1"}));
    c->add_option("--seed", seed, "Seed for the greedy selection order");
    c->add_option("--metas", metas, "Directory of <model>.meta.json files used for dev-F1 filtering");
    c->add_option("--min-dev-f1", min_dev_f1, "Discard models below this dev macro F1, in percent");
    c->add_option("--out", out, "Output directory")->required();
    cmd_ = c;
  }

  static PredictionSet keep_models(const PredictionSet& ps, const std::set<std::string>& ids) {
    PredictionSet out;
    out.gold = ps.gold;
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (ids.count(ps.model_ids[i])) {
        out.model_ids.push_back(ps.model_ids[i]);
        out.members.push_back(ps.members[i]);
      }
    return out;
  }

  void run(const CLI::App& cmd) {
    PredictionSet dev_set = load_prediction_set(dev);
    if (!metas.empty()) {
      std::vector<CheckpointMeta> all;
      std::vector<std::string> ids;
      for (const auto& id : dev_set.model_ids) {
        all.push_back(CheckpointMeta::from_json(read_text_file(fs::path(metas) / (id + ".meta.json"))));
        ids.push_back(id);
      }
      std::set<std::string> keep;
      for (std::size_t i = 0; i < all.size(); ++i)
        if (!filter_checkpoints(std::span(&all[i], 1), min_dev_f1).empty()) keep.insert(ids[i]);
      dev_set = keep_models(dev_set, keep);
    }
    const auto fr = fuse(parse_fusion_mode(mode), dev_set, seed);
    const fs::path out_dir = out;
    write_text_file(out_dir / "fusion.json", fr.to_json());
    write_snapshot(cmd, out_dir);
    const auto dev_applied = apply_fusion(fr, dev_set);
    write_predictions(out_dir / "dev_predictions.tsv", dev_applied.fused);
    std::cout << "selected " << fr.selected.size() << " of " << dev_set.size() << " models, dev macro_f1 "
              << percent(fr.dev_macro_f1) << "\n";
    if (!test.empty()) {
      const auto test_set = load_prediction_set(test);
      const auto applied = apply_fusion(fr, test_set);
      write_predictions(out_dir / "test_predictions.tsv", applied.fused);
      write_text_file(out_dir / "answers.json", format_answers(applied.fused.ids, applied.labels));
      if (!test_set.gold.empty()) {
        const auto m = compute_metrics(test_set.gold, applied.labels);
        write_text_file(out_dir / "test_metrics.json", format_metrics(m));
        print_metrics("test", m);
      }
    }
  }
};

struct PredictCmd {
  CLI::App* cmd_ = nullptr;
  DataOptions data;
  std::string checkpoint, fusion, predictions, split = "test", out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("predict", "Write a scorer answer file from a checkpoint or a fitted fusion");
    c->add_option("--checkpoint", checkpoint, "Model checkpoint (with --manifest and --vocab)");
    c->add_option("--fusion", fusion, "fusion.json from `ensemble` (with --predictions)");
    c->add_option("--predictions", predictions, "Directory of per-model prediction files for the split");
    c->add_option("--manifest", data.manifest, "Dataset manifest");
    c->add_option("--vocab", data.vocab, "WordPiece vocabulary file");
    c->add_option("--word-vectors", data.word_vectors, "Word-vector file used at training time");
    c->add_option("--split", split, "train | dev | test");
    c->add_option("--out", out, "Answer file to write")->required();
    cmd_ = c;
  }

  void run() {
    if (!fusion.empty()) {
      if (predictions.empty()) fail(ErrorCode::InvalidConfig, "--fusion needs --predictions");
      const auto fr = FusionResult::from_json(read_text_file(fusion));
      const auto applied = apply_fusion(fr, load_prediction_set(predictions));
      write_text_file(out, format_answers(applied.fused.ids, applied.labels));
      return;
    }
    if (checkpoint.empty() || data.manifest.empty() || data.vocab.empty())
      fail(ErrorCode::InvalidConfig, "give --fusion/--predictions or --checkpoint/--manifest/--vocab");
    const auto d = load_data(data);
    auto m = model_from_checkpoint(nn::load_checkpoint(checkpoint));
    const auto ev = evaluate(*m, examples_for(d, *m, parse_split(split)));
    write_text_file(out, format_answers(ev.predictions.ids, ev.predictions.predicted()));
  }
};

struct IntrospectCmd {
  CLI::App* cmd_ = nullptr;
  DataOptions data;
  std::string checkpoint, split = "dev", example, out, windows = "1,2";
  bool raw = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("introspect", "Export attention heatmaps and head statistics for one example");
    data.add(c);
    c->add_option("--checkpoint", checkpoint, "micro_bert checkpoint")->required();
    c->add_option("--split", split, "Split holding the example");
    c->add_option("--example", example, "Target post id; first example of the split if unset");
    c->add_option("--windows", windows, "Comma-separated local-mass window sizes");
    c->add_flag("--raw", raw, "Render raw scaled dot-product scores instead of softmaxed weights");
    c->add_option("--out", out, "Output directory")->required();
    cmd_ = c;
  }

  void run() {
    const auto d = load_data(data);
    auto m = model_from_checkpoint(nn::load_checkpoint(checkpoint));
    const auto ex = examples_for(d, *m, parse_split(split));
    if (ex.empty()) fail(ErrorCode::EmptyDataset, "split has no examples");
    auto it = example.empty() ? ex.begin()
                              : std::find_if(ex.begin(), ex.end(), [&](const Example& e) { return e.id == example; });
    if (it == ex.end()) fail(ErrorCode::PostNotInThread, "no example '" + example + "' in split " + split);
    std::vector<std::size_t> w;
    std::stringstream ws(windows);
    for (std::string part; std::getline(ws, part, ',');)
      if (!part.empty()) w.push_back(static_cast<std::size_t>(parse_int(part)));

    const auto records = capture(*m, it->encoded, &d.vocab);
    const fs::path dir = out;
    fs::create_directories(dir);
    std::string stats = "layer\thead\tintra_segment_mass\tdiagonal_mass";
    for (auto x : w) stats += "\tlocal_mass_" + std::to_string(x);
    stats += "\n";
    for (const auto& r : records) {
      const auto name = "layer" + std::to_string(r.layer) + "_head" + std::to_string(r.head) + ".pgm";
      export_heatmap(raw ? r.scores : r.probs, dir / name);
      const auto s = head_stats(r, w);
      stats += std::to_string(r.layer) + "\t" + std::to_string(r.head) + "\t" + format_double(s.intra_segment_mass) +
               "\t" + format_double(s.diagonal_mass);
      for (const auto& [win, mass] : s.local_mass) stats += "\t" + format_double(mass);
      stats += "\n";
    }
    write_text_file(dir / "head_stats.tsv", stats);
    std::string toks;
    if (!records.empty())
      for (const auto& t : records.front().tokens) toks += t + "\n";
    write_text_file(dir / "tokens.txt", toks);
    std::cout << "example " << it->id << ": " << records.size() << " attention maps written to " << out << "\n";
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rumour stance (support/deny/query/comment) toolkit"};
  app.require_subcommand(1);
  std::string config_file;
  int threads = 0;
  app.add_option("--config", config_file, "key=value file; command-line flags take precedence");
  app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");
  app.fallthrough();

  IngestCmd ingest;
  StatsCmd stats;
  BuildVocabCmd build_vocab;
  EncodeCmd encode;
  PretrainCmd pretrain_cmd;
  TrainCmd train;
  EvalCmd eval;
  EnsembleCmd ensemble;
  PredictCmd predict_cmd;
  IntrospectCmd introspect;
  ingest.add(app);
  stats.add(app);
  build_vocab.add(app);
  encode.add(app);
  pretrain_cmd.add(app);
  train.add(app);
  eval.add(app);
  ensemble.add(app);
  predict_cmd.add(app);
  introspect.add(app);

  try {
    auto args = merge_config_file(std::vector<std::string>(argv, argv + argc));
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
    if (threads > 0) omp_set_num_threads(threads);
    if (ingest.cmd_->parsed()) ingest.run(*ingest.cmd_);
    if (stats.cmd_->parsed()) stats.run();
    if (build_vocab.cmd_->parsed()) build_vocab.run();
    if (encode.cmd_->parsed()) encode.run();
    if (pretrain_cmd.cmd_->parsed()) pretrain_cmd.run(*pretrain_cmd.cmd_);
    if (train.cmd_->parsed()) train.run(*train.cmd_);
    if (eval.cmd_->parsed()) eval.run();
    if (ensemble.cmd_->parsed()) ensemble.run(*ensemble.cmd_);
    if (predict_cmd.cmd_->parsed()) predict_cmd.run();
    if (introspect.cmd_->parsed()) introspect.run();
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "sdqc: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "sdqc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
