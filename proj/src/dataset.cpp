#include "sdqc/dataset.hpp"

#include "sdqc/error.hpp"

namespace sdqc {

std::vector<Example> build_examples(const std::vector<ThreadEntry>& dataset, Split split, const ExampleSources& src) {
  src.encoder.validate();
  std::vector<Example> out;
  for (const auto& entry : dataset) {
    if (entry.split != split) continue;
    const auto& thread = entry.thread;
    const auto triples = linearize(thread);
    for (const auto& t : triples) {
      const Post* post = thread.find(t.target_id);
      if (!post) fail(ErrorCode::PostNotInThread, t.target_id);
      Example ex;
      ex.id = t.target_id;
      ex.encoded = build_example(t, src.vocab, src.encoder);
      ex.features = extract_features(*post, thread, src.word_vectors, src.lexicons).to_vector();
      ex.label = t.label;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace sdqc
