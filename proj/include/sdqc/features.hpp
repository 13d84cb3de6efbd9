#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdqc/thread_data.hpp"

namespace sdqc {

// Token vectors of a fixed dimension. Tokens missing from the table get a
// pseudo-random unit vector derived from a hash of their bytes.
class WordVectors {
 public:
  explicit WordVectors(std::size_t dim = 50);
  static WordVectors load(const std::filesystem::path& path);

  std::size_t dim() const { return dim_; }
  std::vector<double> lookup(const std::string& token) const;
  void set(const std::string& token, std::vector<double> v);

 private:
  std::size_t dim_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

std::vector<double> hashed_unit_vector(const std::string& token, std::size_t dim);

struct Lexicons {
  std::set<std::string> negation;
  std::set<std::string> swear;

  static Lexicons defaults();
  static std::set<std::string> load_list(const std::filesystem::path& path);
};

// Fixed coordinate order; cos_* hold cosine similarity (not 1 - similarity).
struct FeatureVector {
  double is_source = 0;
  double token_count = 0;
  double has_url = 0;
  double has_image = 0;
  double count_question = 0;
  double count_exclaim = 0;
  double count_period = 0;
  double cos_to_source = 0;
  double cos_to_rest = 0;
  double negation_count = 0;
  double swear_count = 0;
  std::vector<double> avg_wordvec;

  static constexpr std::size_t kScalarCount = 11;
  std::size_t dim() const { return kScalarCount + avg_wordvec.size(); }
  std::vector<double> to_vector() const;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

FeatureVector extract_features(const Post& target, const Thread& thread, const WordVectors& wv,
                               const Lexicons& lexicons);

}  // namespace sdqc
