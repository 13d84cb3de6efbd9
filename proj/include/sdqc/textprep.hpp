#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sdqc/thread_data.hpp"

namespace sdqc {

namespace tok {
inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";
inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kMask = "[MASK]";
inline constexpr std::string_view kEos = "[EOS]";
inline constexpr std::string_view kUrl = "$URL$";
inline constexpr std::string_view kMention = "$mention$";
inline constexpr std::string_view kContinuation = "##";
}  // namespace tok

// Special tokens always occupy ids 0..7 in this order.
inline constexpr std::int32_t kPadId = 0, kUnkId = 1, kClsId = 2, kSepId = 3, kMaskId = 4, kEosId = 5,
                              kUrlId = 6, kMentionId = 7;
inline constexpr int kNumSpecials = 8;

bool is_special_token(std::string_view token);

class Vocab {
 public:
  // Tokens in id order. The first kNumSpecials entries must be the specials.
  explicit Vocab(std::vector<std::string> tokens);

  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  std::optional<std::int32_t> find(std::string_view token) const;
  std::int32_t id_or_unk(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  bool contains(std::string_view token) const { return find(token).has_value(); }
  bool is_special(std::int32_t id) const { return id >= 0 && id < kNumSpecials; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // FNV-1a over the newline-joined token list; stamps encoded caches.
  std::uint32_t checksum() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// URL/mention replacement, punctuation splitting, lowercasing and [EOS]
// sentence termination. Idempotent.
std::string normalize(std::string_view text);

std::vector<std::string> split_whitespace(std::string_view text);

// Greedy longest-match-first WordPiece over each whitespace-delimited word.
std::vector<std::string> wordpiece_tokenize(std::string_view normalized, const Vocab& vocab);
std::vector<std::int32_t> wordpiece_ids(std::string_view normalized, const Vocab& vocab);
// Joins continuation pieces back onto their word.
std::vector<std::string> detokenize(std::span<const std::string> pieces);

// Deterministic pair-merge vocabulary construction over normalized text.
Vocab train_vocab(std::span<const std::string> corpus, std::size_t size);

struct EncoderConfig {
  int max_len = 200;
  bool include_source = true;
  bool include_previous = true;

  void validate() const;
  int doc_cap() const { return (max_len - 3) / 2; }
};

struct EncodedExample {
  std::vector<std::int32_t> token_ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> position_ids;
  std::optional<StanceLabel> label;
  int doc1_len = 0;
  int doc2_len = 0;

  std::size_t size() const { return token_ids.size(); }
};

// [CLS] doc1 [SEP] doc2 [SEP] with the head-keeping truncation rule.
EncodedExample encode_pair(std::span<const std::int32_t> doc1, std::span<const std::int32_t> doc2,
                           const EncoderConfig& cfg);

EncodedExample build_example(const StanceTriple& triple, const Vocab& vocab, const EncoderConfig& cfg);

// Returns a copy right-padded with [PAD] to `len` (segment 0, continuing positions).
EncodedExample pad_to(const EncodedExample& ex, std::size_t len);

// Encoded-dataset cache: little-endian int32 header (max_len, vocab checksum)
// followed by one record per example until end of file.
void write_encoded_cache(const std::filesystem::path& path, int max_len, std::uint32_t vocab_checksum,
                         std::span<const EncodedExample> examples);
std::vector<EncodedExample> read_encoded_cache(const std::filesystem::path& path, int expected_max_len,
                                               std::uint32_t expected_checksum);

}  // namespace sdqc
