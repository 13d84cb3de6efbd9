#include "sdqc/textprep.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <regex>
#include <set>

#include "sdqc/binio.hpp"
#include "sdqc/error.hpp"

namespace sdqc {

namespace {

constexpr std::array<std::string_view, kNumSpecials> kSpecials = {
    tok::kPad, tok::kUnk, tok::kCls, tok::kSep, tok::kMask, tok::kEos, tok::kUrl, tok::kMention};

constexpr std::string_view kEllipsis = "\xE2\x80\xA6";

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

// Non-ASCII bytes are treated as word characters so multi-byte sequences stay whole.
bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

bool is_terminal(std::string_view t) { return t == "." || t == "!" || t == "?" || t == kEllipsis; }

std::size_t utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

// Byte offsets of code point starts, plus the end offset.
std::vector<std::size_t> code_point_offsets(std::string_view w) {
  std::vector<std::size_t> offs;
  for (std::size_t i = 0; i < w.size();) {
    offs.push_back(i);
    i += std::max<std::size_t>(1, std::min(utf8_len(static_cast<unsigned char>(w[i])), w.size() - i));
  }
  offs.push_back(w.size());
  return offs;
}

void split_chunk(std::string_view chunk, std::vector<std::string>& out) {
  if (chunk == tok::kEos || chunk == tok::kUrl || chunk == tok::kMention) {
    out.emplace_back(chunk);
    return;
  }
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < chunk.size();) {
    if (chunk.substr(i, kEllipsis.size()) == kEllipsis) {
      flush();
      out.emplace_back(kEllipsis);
      i += kEllipsis.size();
      continue;
    }
    const auto c = static_cast<unsigned char>(chunk[i]);
    if (is_ascii_punct(c)) {
      // Keep '.', '!' and '?' inside words such as "3.5" or "u.s".
      const bool internal = (c == '.' || c == '!' || c == '?') && !word.empty() &&
                            is_word_byte(static_cast<unsigned char>(word.back())) && i + 1 < chunk.size() &&
                            is_word_byte(static_cast<unsigned char>(chunk[i + 1])) &&
                            chunk.substr(i + 1, kEllipsis.size()) != kEllipsis;
      if (internal) {
        word.push_back(static_cast<char>(c));
      } else {
        flush();
        out.emplace_back(1, static_cast<char>(c));
      }
      ++i;
      continue;
    }
    word.push_back(static_cast<char>(c));
    ++i;
  }
  flush();
}

}  // namespace

bool is_special_token(std::string_view token) {
  return std::find(kSpecials.begin(), kSpecials.end(), token) != kSpecials.end();
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kNumSpecials) fail(ErrorCode::InvalidConfig, "vocabulary smaller than the special set");
  for (int i = 0; i < kNumSpecials; ++i)
    if (tokens_[static_cast<std::size_t>(i)] != kSpecials[static_cast<std::size_t>(i)])
      fail(ErrorCode::InvalidConfig, "vocabulary id " + std::to_string(i) + " must be " + std::string(kSpecials[i]));
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty() || std::any_of(t.begin(), t.end(), [](char c) { return is_space(static_cast<unsigned char>(c)); }))
      fail(ErrorCode::InvalidConfig, "vocabulary token at line " + std::to_string(i) + " is empty or has whitespace");
    if (!index_.emplace(t, static_cast<std::int32_t>(i)).second)
      fail(ErrorCode::InvalidConfig, "duplicate vocabulary token '" + t + "'");
  }
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

std::optional<std::int32_t> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::int32_t Vocab::id_or_unk(std::string_view token) const { return find(token).value_or(kUnkId); }

std::uint32_t Vocab::checksum() const {
  std::uint32_t h = 2166136261u;
  for (const auto& t : tokens_) h = binio::fnv1a32(t + "\n", h);
  return h;
}

// ---------------------------------------------------------------------------
// Normalization

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string normalize(std::string_view text) {
  static const std::regex url_re(
      R"((?:https?://|www\.)(?:\S*[^\s.,!?;:'")\]])?|\b[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}/(?:\S*[^\s.,!?;:'")\]])?)",
      std::regex::ECMAScript | std::regex::icase);
  static const std::regex mention_re(R"(@[A-Za-z0-9_]+)");

  std::string s = std::regex_replace(std::string(text), url_re, " $$URL$$ ");
  s = std::regex_replace(s, mention_re, " $$mention$$ ");

  std::vector<std::string> tokens;
  for (const auto& chunk : split_whitespace(s)) split_chunk(chunk, tokens);

  std::vector<std::string> out;
  out.reserve(tokens.size() + 4);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto t = tokens[i];
    if (!is_special_token(t))
      for (auto& ch : t)
        if (static_cast<unsigned char>(ch) < 0x80) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    out.push_back(std::move(t));
    if (!is_terminal(tokens[i])) continue;
    const bool run_continues = i + 1 < tokens.size() && is_terminal(tokens[i + 1]);
    if (run_continues) continue;
    // A period followed by a lowercase word ("U.S. officials") does not end the sentence.
    const bool lower_follows = tokens[i] == "." && i + 1 < tokens.size() &&
                               std::islower(static_cast<unsigned char>(tokens[i + 1][0]));
    if (lower_follows) continue;
    const bool already_closed = i + 1 < tokens.size() && tokens[i + 1] == tok::kEos;
    if (!already_closed) out.emplace_back(tok::kEos);
  }
  if (!out.empty() && out.back() != tok::kEos) out.emplace_back(tok::kEos);

  std::string joined;
  for (const auto& t : out) {
    if (!joined.empty()) joined.push_back(' ');
    joined += t;
  }
  return joined;
}

// ---------------------------------------------------------------------------
// WordPiece

std::vector<std::string> wordpiece_tokenize(std::string_view normalized, const Vocab& vocab) {
  std::vector<std::string> out;
  for (const auto& word : split_whitespace(normalized)) {
    if (is_special_token(word)) {
      out.push_back(word);
      continue;
    }
    const auto offs = code_point_offsets(word);
    const std::size_t n = offs.size() - 1;
    std::vector<std::string> pieces;
    bool bad = false;
    std::size_t start = 0;
    while (start < n) {
      std::size_t end = n;
      std::string match;
      while (end > start) {
        std::string sub = word.substr(offs[start], offs[end] - offs[start]);
        if (start > 0) sub.insert(0, tok::kContinuation);
        if (vocab.contains(sub)) {
          match = std::move(sub);
          break;
        }
        --end;
      }
      if (match.empty()) {
        bad = true;
        break;
      }
      pieces.push_back(std::move(match));
      start = end;
    }
    if (bad) {
      out.emplace_back(tok::kUnk);
    } else {
      for (auto& p : pieces) out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<std::int32_t> wordpiece_ids(std::string_view normalized, const Vocab& vocab) {
  std::vector<std::int32_t> ids;
  for (const auto& piece : wordpiece_tokenize(normalized, vocab)) ids.push_back(vocab.id_or_unk(piece));
  return ids;
}

std::vector<std::string> detokenize(std::span<const std::string> pieces) {
  std::vector<std::string> words;
  for (const auto& p : pieces) {
    if (p.size() > tok::kContinuation.size() && p.compare(0, 2, tok::kContinuation) == 0 && !words.empty()) {
      words.back() += p.substr(2);
    } else {
      words.push_back(p);
    }
  }
  return words;
}

Vocab train_vocab(std::span<const std::string> corpus, std::size_t size) {
  std::map<std::string, std::int64_t> word_counts;
  for (const auto& text : corpus)
    for (const auto& w : split_whitespace(text))
      if (!is_special_token(w)) ++word_counts[w];
  if (word_counts.empty()) fail(ErrorCode::CorpusEmpty, "no words in vocabulary corpus");

  struct Word {
    std::vector<std::string> symbols;
    std::int64_t count;
  };
  std::vector<Word> words;
  std::set<std::string> alphabet;
  for (const auto& [w, c] : word_counts) {
    const auto offs = code_point_offsets(w);
    Word word{{}, c};
    for (std::size_t i = 0; i + 1 < offs.size(); ++i) {
      auto ch = w.substr(offs[i], offs[i + 1] - offs[i]);
      alphabet.insert(ch);
      word.symbols.push_back(i == 0 ? ch : std::string(tok::kContinuation) + ch);
    }
    words.push_back(std::move(word));
  }

  std::vector<std::string> tokens(kSpecials.begin(), kSpecials.end());
  std::set<std::string> present(tokens.begin(), tokens.end());
  auto add = [&](const std::string& t) {
    if (present.insert(t).second) tokens.push_back(t);
  };
  for (const auto& ch : alphabet) add(ch);
  for (const auto& ch : alphabet) add(std::string(tok::kContinuation) + ch);
  if (size < tokens.size())
    fail(ErrorCode::InvalidConfig, "vocabulary size " + std::to_string(size) + " below specials+alphabet (" +
                                       std::to_string(tokens.size()) + ")");

  while (tokens.size() < size) {
    std::map<std::pair<std::string, std::string>, std::int64_t> pairs;
    for (const auto& w : words)
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) pairs[{w.symbols[i], w.symbols[i + 1]}] += w.count;
    if (pairs.empty()) break;
    // Highest count wins; std::map order breaks ties toward the smallest pair.
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it)
      if (it->second > best->second) best = it;
    const auto [left, right] = best->first;
    const std::string merged = left + right.substr(tok::kContinuation.size());
    add(merged);
    for (auto& w : words) {
      std::vector<std::string> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == left && w.symbols[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(std::move(w.symbols[i]));
        }
      }
      w.symbols = std::move(next);
    }
  }
  return Vocab(std::move(tokens));
}

// ---------------------------------------------------------------------------
// Encoding

void EncoderConfig::validate() const {
  if (max_len < 8) fail(ErrorCode::InvalidConfig, "max_len must be >= 8, got " + std::to_string(max_len));
}

EncodedExample encode_pair(std::span<const std::int32_t> doc1, std::span<const std::int32_t> doc2,
                           const EncoderConfig& cfg) {
  cfg.validate();
  const std::size_t l = static_cast<std::size_t>(cfg.max_len);
  const std::size_t cap = static_cast<std::size_t>(cfg.doc_cap());
  std::size_t n1 = doc1.size();
  std::size_t n2 = doc2.size();
  if (n1 + n2 + 3 > l) {
    const std::size_t room_for_doc1 = n2 + 3 <= l ? l - 3 - n2 : 0;
    n1 = std::min(n1, std::max(cap, room_for_doc1));
    if (n1 + n2 + 3 > l) n2 = std::min(n2, cap);
  }

  EncodedExample ex;
  ex.doc1_len = static_cast<int>(n1);
  ex.doc2_len = static_cast<int>(n2);
  const std::size_t total = n1 + n2 + 3;
  ex.token_ids.reserve(total);
  ex.token_ids.push_back(kClsId);
  ex.token_ids.insert(ex.token_ids.end(), doc1.begin(), doc1.begin() + static_cast<std::ptrdiff_t>(n1));
  ex.token_ids.push_back(kSepId);
  ex.token_ids.insert(ex.token_ids.end(), doc2.begin(), doc2.begin() + static_cast<std::ptrdiff_t>(n2));
  ex.token_ids.push_back(kSepId);
  ex.segment_ids.assign(total, 0);
  std::fill(ex.segment_ids.begin() + static_cast<std::ptrdiff_t>(n1 + 2), ex.segment_ids.end(), 1);
  ex.position_ids.resize(total);
  for (std::size_t i = 0; i < total; ++i) ex.position_ids[i] = static_cast<std::int32_t>(i);
  return ex;
}

EncodedExample build_example(const StanceTriple& triple, const Vocab& vocab, const EncoderConfig& cfg) {
  std::vector<std::int32_t> doc1;
  if (cfg.include_source) doc1 = wordpiece_ids(normalize(triple.source_text), vocab);
  if (cfg.include_previous) {
    auto prev = wordpiece_ids(normalize(triple.previous_text), vocab);
    doc1.insert(doc1.end(), prev.begin(), prev.end());
  }
  const auto doc2 = wordpiece_ids(normalize(triple.target_text), vocab);
  auto ex = encode_pair(doc1, doc2, cfg);
  ex.label = triple.label;
  return ex;
}

EncodedExample pad_to(const EncodedExample& ex, std::size_t len) {
  EncodedExample out = ex;
  for (std::size_t i = ex.size(); i < len; ++i) {
    out.token_ids.push_back(kPadId);
    out.segment_ids.push_back(0);
    out.position_ids.push_back(static_cast<std::int32_t>(i));
  }
  return out;
}

void write_encoded_cache(const std::filesystem::path& path, int max_len, std::uint32_t vocab_checksum,
                         std::span<const EncodedExample> examples) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  binio::put_i32(out, max_len);
  binio::put_u32(out, vocab_checksum);
  for (const auto& ex : examples) {
    binio::put_i32(out, static_cast<std::int32_t>(ex.size()));
    binio::put_i32(out, ex.doc1_len);
    binio::put_i32(out, ex.doc2_len);
    for (auto v : ex.token_ids) binio::put_i32(out, v);
    for (auto v : ex.segment_ids) binio::put_i32(out, v);
    for (auto v : ex.position_ids) binio::put_i32(out, v);
    binio::put_i32(out, ex.label ? code(*ex.label) : -1);
  }
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::vector<EncodedExample> read_encoded_cache(const std::filesystem::path& path, int expected_max_len,
                                               std::uint32_t expected_checksum) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  const int max_len = binio::get_i32(in);
  const std::uint32_t checksum = binio::get_u32(in);
  if (max_len != expected_max_len)
    fail(ErrorCode::ConfigMismatch, "cache max_len " + std::to_string(max_len) + " != " + std::to_string(expected_max_len));
  if (checksum != expected_checksum) fail(ErrorCode::ConfigMismatch, "cache was encoded with a different vocabulary");
  std::vector<EncodedExample> out;
  std::uint32_t len_raw = 0;
  while (binio::try_get_u32(in, len_raw)) {
    const auto len = static_cast<std::int32_t>(len_raw);
    if (len < 3 || len > max_len) fail(ErrorCode::MalformedDocument, "bad record length in cache");
    EncodedExample ex;
    ex.doc1_len = binio::get_i32(in);
    ex.doc2_len = binio::get_i32(in);
    ex.token_ids.resize(static_cast<std::size_t>(len));
    ex.segment_ids.resize(static_cast<std::size_t>(len));
    ex.position_ids.resize(static_cast<std::size_t>(len));
    for (auto& v : ex.token_ids) v = binio::get_i32(in);
    for (auto& v : ex.segment_ids) v = binio::get_i32(in);
    for (auto& v : ex.position_ids) v = binio::get_i32(in);
    const int label = binio::get_i32(in);
    if (label >= 0) ex.label = label_from_code(label);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace sdqc
