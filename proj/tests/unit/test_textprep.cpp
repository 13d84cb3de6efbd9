#include <algorithm>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "sdqc/error.hpp"
#include "sdqc/textprep.hpp"
#include "support/synthetic.hpp"

using namespace sdqc;
namespace fs = std::filesystem;

namespace {

Vocab vocab_with(std::vector<std::string> extra) {
  std::vector<std::string> t{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[EOS]", "$URL$", "$mention$"};
  t.insert(t.end(), extra.begin(), extra.end());
  return Vocab(t);
}

std::vector<std::int32_t> ids(std::size_t n, std::int32_t start) {
  std::vector<std::int32_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = start + static_cast<std::int32_t>(i % 50);
  return v;
}

}  // namespace

TEST_CASE("normalize fixtures") {
  CHECK(normalize("Check https://t.co/x now!") == "check $URL$ now ! [EOS]");
  CHECK(normalize("") == "");
  CHECK(normalize("@RyGuySA Oh my gosh! Is that not a tornado?!") ==
        "$mention$ oh my gosh ! [EOS] is that not a tornado ? ! [EOS]");
  CHECK(normalize("   ") == "");
  CHECK(normalize("no terminal punctuation") == "no terminal punctuation [EOS]");
  CHECK(normalize("see www.bbc.co.uk/news or bbc.com/x.") == "see $URL$ or $URL$ . [EOS]");
  CHECK(normalize("U.S. officials, 3.5 hrs") == "u.s . officials , 3.5 hrs [EOS]");
  CHECK(normalize("wait\xe2\x80\xa6 what") == "wait \xe2\x80\xa6 [EOS] what [EOS]");
}

TEST_CASE("normalize is idempotent") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto s = testing::random_tweet(rng);
    const auto once = normalize(s);
    CHECK(normalize(once) == once);
  }
}

TEST_CASE("vocab construction rules") {
  CHECK_THROWS_AS(Vocab({"a", "b"}), Error);
  CHECK_THROWS_AS(vocab_with({"a", "a"}), Error);
  CHECK_THROWS_AS(vocab_with({"a b"}), Error);
  const auto v = vocab_with({"a", "b"});
  CHECK(v.size() == 10);
  CHECK(*v.find("a") == 8);
  CHECK(v.id_or_unk("zz") == kUnkId);
  CHECK(v.checksum() == vocab_with({"a", "b"}).checksum());
  CHECK(v.checksum() != vocab_with({"b", "a"}).checksum());

  const fs::path p = fs::temp_directory_path() / "sdqc_vocab_test.txt";
  v.save(p);
  CHECK(Vocab::load(p).tokens() == v.tokens());
  fs::remove(p);
}

TEST_CASE("greedy wordpiece fixtures") {
  const auto v = vocab_with({"a", "b", "ab", "##b"});
  CHECK(wordpiece_tokenize("abb", v) == std::vector<std::string>{"ab", "##b"});
  CHECK(wordpiece_tokenize("ba", v) == std::vector<std::string>{"[UNK]"});
  CHECK(wordpiece_tokenize("$URL$", v) == std::vector<std::string>{"$URL$"});
  CHECK(wordpiece_tokenize("ab [EOS] $mention$", v) == std::vector<std::string>{"ab", "[EOS]", "$mention$"});
  CHECK(wordpiece_ids("abb ba", v) == std::vector<std::int32_t>{10, 11, kUnkId});
}

TEST_CASE("wordpiece works on code points") {
  const auto v = vocab_with({"caf", "##\xc3\xa9", "\xc3\xa9"});
  CHECK(wordpiece_tokenize("caf\xc3\xa9", v) == std::vector<std::string>{"caf", "##\xc3\xa9"});
}

TEST_CASE("trained vocabulary") {
  const std::vector<std::string> corpus{"aa aa"};
  const auto v = train_vocab(corpus, 100);
  CHECK(v.contains("aa"));
  CHECK(v.contains("a"));
  CHECK(v.contains("##a"));
  CHECK_THROWS_AS(train_vocab(std::vector<std::string>{}, 100), Error);
  CHECK_THROWS_AS(train_vocab(std::vector<std::string>{"abc"}, 9), Error);

  std::mt19937_64 rng(3);
  std::vector<std::string> big;
  for (int i = 0; i < 400; ++i) big.push_back(normalize(testing::random_tweet(rng)));
  const auto trained = train_vocab(big, 300);
  CHECK(trained.size() <= 300);
  CHECK(train_vocab(big, 300).tokens() == trained.tokens());
  for (const auto& s : big) {
    const auto pieces = wordpiece_tokenize(s, trained);
    CHECK(std::count(pieces.begin(), pieces.end(), "[UNK]") == 0);
  }
}

TEST_CASE("tokenize then detokenize restores the words") {
  std::mt19937_64 rng(21);
  std::vector<std::string> corpus;
  for (int i = 0; i < 500; ++i) corpus.push_back(normalize(testing::random_tweet(rng)));
  const auto v = train_vocab(corpus, 400);
  for (int i = 0; i < 1000; ++i) {
    const auto n = normalize(testing::random_tweet(rng));
    const auto pieces = wordpiece_tokenize(n, v);
    REQUIRE(std::count(pieces.begin(), pieces.end(), "[UNK]") == 0);
    CHECK(detokenize(pieces) == split_whitespace(n));
  }
}

TEST_CASE("pair encoding fixtures") {
  EncoderConfig cfg;
  auto e = encode_pair(ids(50, 10), ids(60, 10), cfg);
  CHECK(e.size() == 113);
  CHECK(e.doc1_len == 50);

  e = encode_pair(ids(180, 10), ids(30, 10), cfg);
  CHECK(e.doc1_len == 167);
  CHECK(e.doc2_len == 30);
  CHECK(e.size() == 200);

  e = encode_pair(ids(150, 10), ids(120, 10), cfg);
  CHECK(e.doc1_len == 98);
  CHECK(e.doc2_len == 98);
  CHECK(e.size() == 199);

  // layout and segments
  e = encode_pair(ids(2, 10), ids(3, 20), cfg);
  CHECK(e.token_ids == std::vector<std::int32_t>{kClsId, 10, 11, kSepId, 20, 21, 22, kSepId});
  CHECK(e.segment_ids == std::vector<std::int32_t>{0, 0, 0, 0, 1, 1, 1, 1});
  CHECK(e.position_ids == std::vector<std::int32_t>{0, 1, 2, 3, 4, 5, 6, 7});

  cfg.max_len = 7;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("truncation keeps the budget and shortens document 2 last") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 10000; ++i) {
    EncoderConfig cfg;
    cfg.max_len = 8 + static_cast<int>(rng() % 300);
    const std::size_t n1 = rng() % 400, n2 = rng() % 400;
    const auto e = encode_pair(ids(n1, 10), ids(n2, 10), cfg);
    REQUIRE(e.size() <= static_cast<std::size_t>(cfg.max_len));
    CHECK(e.token_ids.front() == kClsId);
    CHECK(std::count(e.token_ids.begin(), e.token_ids.end(), kSepId) == 2);
    CHECK(std::is_sorted(e.segment_ids.begin(), e.segment_ids.end()));
    if (static_cast<std::size_t>(e.doc2_len) < n2) CHECK(e.doc1_len <= cfg.doc_cap());
    if (n1 + n2 + 3 <= static_cast<std::size_t>(cfg.max_len)) CHECK(e.size() == n1 + n2 + 3);
  }
}

TEST_CASE("build_example composes source, previous and target") {
  const auto v = vocab_with({"src", "prev", "tgt"});
  StanceTriple t{"src", "prev", "tgt", "x", StanceLabel::Query};
  EncoderConfig cfg;
  auto e = build_example(t, v, cfg);
  // [CLS] src [EOS] prev [EOS] [SEP] tgt [EOS] [SEP]
  CHECK(e.token_ids == std::vector<std::int32_t>{kClsId, 8, kEosId, 9, kEosId, kSepId, 10, kEosId, kSepId});
  CHECK(e.label == StanceLabel::Query);

  cfg.include_previous = false;
  e = build_example(t, v, cfg);
  CHECK(e.token_ids == std::vector<std::int32_t>{kClsId, 8, kEosId, kSepId, 10, kEosId, kSepId});

  StanceTriple root{"", "", "tgt", "r", std::nullopt};
  e = build_example(root, v, EncoderConfig{});
  CHECK(e.token_ids == std::vector<std::int32_t>{kClsId, kSepId, 10, kEosId, kSepId});
}

TEST_CASE("encoded cache round trip") {
  std::vector<EncodedExample> ex;
  EncoderConfig cfg;
  cfg.max_len = 16;
  ex.push_back(encode_pair(ids(3, 10), ids(4, 10), cfg));
  ex.back().label = StanceLabel::Deny;
  ex.push_back(encode_pair(ids(30, 10), ids(2, 10), cfg));
  const fs::path p = fs::temp_directory_path() / "sdqc_cache_test.bin";
  write_encoded_cache(p, 16, 1234u, ex);
  const auto back = read_encoded_cache(p, 16, 1234u);
  REQUIRE(back.size() == 2);
  CHECK(back[0].token_ids == ex[0].token_ids);
  CHECK(back[0].label == StanceLabel::Deny);
  CHECK(!back[1].label);
  CHECK(back[1].doc1_len == ex[1].doc1_len);
  CHECK_THROWS_AS(read_encoded_cache(p, 16, 999u), Error);
  CHECK_THROWS_AS(read_encoded_cache(p, 32, 1234u), Error);
  fs::remove(p);
}

TEST_CASE("padding helper") {
  EncoderConfig cfg;
  const auto e = encode_pair(ids(2, 10), ids(2, 10), cfg);
  const auto p = pad_to(e, 10);
  CHECK(p.size() == 10);
  CHECK(p.token_ids[8] == kPadId);
  CHECK(p.position_ids[9] == 9);
}
