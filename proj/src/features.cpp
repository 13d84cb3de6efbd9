#include "sdqc/features.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "sdqc/binio.hpp"
#include "sdqc/error.hpp"
#include "sdqc/textprep.hpp"

namespace sdqc {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double unit_interval(std::uint64_t& state) {
  return (static_cast<double>(splitmix64(state) >> 11) + 0.5) * 0x1.0p-53;
}

struct TokenView {
  std::vector<std::string> words;  // tokens without [EOS]
};

TokenView tokens_of(const std::string& raw) {
  TokenView v;
  for (auto& t : split_whitespace(normalize(raw)))
    if (t != tok::kEos) v.words.push_back(std::move(t));
  return v;
}

std::vector<double> average(const std::vector<std::string>& words, const WordVectors& wv) {
  std::vector<double> acc(wv.dim(), 0.0);
  if (words.empty()) return acc;
  for (const auto& w : words) {
    const auto v = wv.lookup(w);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  }
  for (auto& a : acc) a /= static_cast<double>(words.size());
  return acc;
}

}  // namespace

std::vector<double> hashed_unit_vector(const std::string& token, std::size_t dim) {
  std::uint64_t state = (static_cast<std::uint64_t>(binio::fnv1a32(token)) << 32) | binio::fnv1a32(token, 0x811C9DC5u ^ 0x5bd1e995u);
  std::vector<double> v(dim);
  double norm = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    // Box-Muller keeps the direction isotropic.
    const double u1 = unit_interval(state), u2 = unit_interval(state);
    v[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    norm += v[i] * v[i];
  }
  norm = std::sqrt(norm);
  if (norm > 0)
    for (auto& x : v) x /= norm;
  return v;
}

WordVectors::WordVectors(std::size_t dim) : dim_(dim) {
  if (dim == 0) fail(ErrorCode::InvalidConfig, "word vector dimension must be positive");
}

WordVectors WordVectors::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open word vectors " + path.string());
  std::string line;
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> table;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (v.empty()) fail(ErrorCode::MalformedDocument, path.string() + ":" + std::to_string(lineno) + ": no values");
    if (dim == 0) dim = v.size();
    if (v.size() != dim)
      fail(ErrorCode::DimensionMismatch, path.string() + ":" + std::to_string(lineno) + ": inconsistent dimension");
    table[token] = std::move(v);
  }
  if (dim == 0) fail(ErrorCode::MalformedDocument, "empty word vector file " + path.string());
  WordVectors wv(dim);
  wv.table_ = std::move(table);
  return wv;
}

std::vector<double> WordVectors::lookup(const std::string& token) const {
  if (auto it = table_.find(token); it != table_.end()) return it->second;
  return hashed_unit_vector(token, dim_);
}

void WordVectors::set(const std::string& token, std::vector<double> v) {
  if (v.size() != dim_) fail(ErrorCode::DimensionMismatch, "word vector for '" + token + "' has wrong dimension");
  table_[token] = std::move(v);
}

Lexicons Lexicons::defaults() {
  Lexicons lx;
  lx.negation = {"no", "not", "never", "none", "nobody", "nothing", "neither", "nor", "nowhere", "cannot",
                 "dont", "doesnt", "didnt", "isnt", "wasnt", "arent", "werent", "wont", "cant", "couldnt",
                 "shouldnt", "wouldnt", "hasnt", "havent", "hadnt", "without", "fake", "false", "hoax"};
  lx.swear = {"damn", "hell", "crap", "shit", "fuck", "fucking", "wtf", "bitch", "bastard", "ass", "asshole",
              "piss", "bloody", "bullshit", "dick", "idiot", "stupid", "omfg"};
  return lx;
}

std::set<std::string> Lexicons::load_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open lexicon " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto words = split_whitespace(line);
    if (words.empty() || words[0][0] == '#') continue;
    for (auto& w : words) out.insert(std::move(w));
  }
  return out;
}

std::vector<double> FeatureVector::to_vector() const {
  std::vector<double> v{is_source,      token_count,   has_url,       has_image,      count_question, count_exclaim,
                        count_period,   cos_to_source, cos_to_rest,   negation_count, swear_count};
  v.insert(v.end(), avg_wordvec.begin(), avg_wordvec.end());
  return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(ErrorCode::DimensionMismatch, "cosine of vectors with different dimension");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

FeatureVector extract_features(const Post& target, const Thread& thread, const WordVectors& wv,
                               const Lexicons& lexicons) {
  const Post* inside = thread.find(target.id);
  if (!inside || inside->thread_id != target.thread_id)
    fail(ErrorCode::PostNotInThread, "post " + target.id + " is not in thread " + thread.thread_id);

  const auto tv = tokens_of(target.text);
  FeatureVector f;
  f.is_source = target.id == thread.root_id ? 1.0 : 0.0;
  f.has_image = target.media_flag ? 1.0 : 0.0;
  for (const auto& w : tv.words) {
    if (w == tok::kUrl) f.has_url = 1.0;
    if (w == "?") f.count_question += 1;
    if (w == "!") f.count_exclaim += 1;
    if (w == ".") f.count_period += 1;
    if (lexicons.negation.count(w)) f.negation_count += 1;
    if (lexicons.swear.count(w)) f.swear_count += 1;
  }
  f.token_count = static_cast<double>(tv.words.size());
  f.avg_wordvec = average(tv.words, wv);

  const auto root_vec = target.id == thread.root_id ? f.avg_wordvec : average(tokens_of(thread.root().text).words, wv);
  f.cos_to_source = cosine(f.avg_wordvec, root_vec);

  std::vector<std::string> rest;
  for (const auto& id : thread.file_order) {
    if (id == target.id) continue;
    auto words = tokens_of(thread.posts.at(id).text).words;
    rest.insert(rest.end(), words.begin(), words.end());
  }
  f.cos_to_rest = cosine(f.avg_wordvec, average(rest, wv));
  return f;
}

}  // namespace sdqc
