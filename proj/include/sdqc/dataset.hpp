#pragma once

#include <vector>

#include "sdqc/features.hpp"
#include "sdqc/models.hpp"

namespace sdqc {

struct ExampleSources {
  const Vocab& vocab;
  EncoderConfig encoder;
  const WordVectors& word_vectors;
  const Lexicons& lexicons;
};

// Canonical order: threads as listed in the manifest, posts depth-first.
std::vector<Example> build_examples(const std::vector<ThreadEntry>& dataset, Split split, const ExampleSources& src);

}  // namespace sdqc
