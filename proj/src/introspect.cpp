#include "sdqc/introspect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sdqc/error.hpp"

namespace sdqc {

std::vector<AttentionRecord> capture(StanceModel& model, const EncodedExample& example, const Vocab* vocab,
                                     std::size_t pad_to) {
  auto* bert = dynamic_cast<MicroBert*>(&model);
  if (!bert)
    fail(ErrorCode::WrongModelKind,
         "attention capture needs a micro_bert model, got " + std::string(model_kind_name(model.kind())));
  MicroBertForwardOptions opt;
  opt.capture_attention = true;
  opt.pad_to = pad_to;
  const EncodedExample* batch[] = {&example};
  auto out = bert->forward(batch, opt);

  std::vector<std::string> tokens;
  if (vocab)
    for (auto id : example.token_ids) tokens.push_back(vocab->token(id));
  std::vector<std::int32_t> segments = example.segment_ids;
  const std::size_t full = std::max(pad_to, example.size());
  segments.resize(full, 0);
  if (vocab) tokens.resize(full, std::string(tok::kPad));

  std::vector<AttentionRecord> recs;
  for (auto& cap : out.attention.front()) {
    AttentionRecord r;
    r.layer = cap.layer;
    r.head = cap.head;
    r.scores = std::move(cap.scores);
    r.probs = std::move(cap.probs);
    r.tokens = tokens;
    r.segment_ids = segments;
    r.segment_boundary = static_cast<std::size_t>(example.doc1_len) + 2;
    r.real_len = example.size();
    recs.push_back(std::move(r));
  }
  return recs;
}

namespace {

std::size_t stat_len(const AttentionRecord& rec) {
  const std::size_t n = std::min(rec.real_len, rec.probs.rows());
  if (n == 0) fail(ErrorCode::ShapeMismatch, "attention record has no positions");
  return n;
}

template <typename Keep>
double mean_row_mass(const AttentionRecord& rec, Keep keep) {
  const std::size_t n = stat_len(rec);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (keep(i, j)) row += rec.probs.at(i, j);
    total += row;
  }
  return total / static_cast<double>(n);
}

}  // namespace

double intra_segment_mass(const AttentionRecord& rec) {
  if (rec.segment_ids.size() < stat_len(rec)) fail(ErrorCode::ShapeMismatch, "segment ids shorter than the record");
  return mean_row_mass(rec, [&](std::size_t i, std::size_t j) { return rec.segment_ids[i] == rec.segment_ids[j]; });
}

double diagonal_mass(const AttentionRecord& rec) {
  return mean_row_mass(rec, [](std::size_t i, std::size_t j) { return i == j; });
}

double local_mass(const AttentionRecord& rec, std::size_t window) {
  return mean_row_mass(rec, [window](std::size_t i, std::size_t j) { return (i > j ? i - j : j - i) <= window; });
}

HeadStats head_stats(const AttentionRecord& rec, const std::vector<std::size_t>& windows) {
  HeadStats s;
  s.intra_segment_mass = intra_segment_mass(rec);
  s.diagonal_mass = diagonal_mass(rec);
  for (auto w : windows) s.local_mass.emplace_back(w, local_mass(rec, w));
  return s;
}

std::vector<std::uint8_t> heatmap_pixels(const nn::Tensor& m) {
  if (m.values.empty()) fail(ErrorCode::ShapeMismatch, "empty matrix");
  for (double v : m.values)
    if (!std::isfinite(v)) fail(ErrorCode::ShapeMismatch, "heatmap of a non-finite matrix");
  const auto [lo_it, hi_it] = std::minmax_element(m.values.begin(), m.values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<std::uint8_t> px(m.values.size(), 128);
  if (hi > lo)
    for (std::size_t i = 0; i < px.size(); ++i)
      px[i] = static_cast<std::uint8_t>(std::lround((m.values[i] - lo) / (hi - lo) * 255.0));
  return px;
}

void export_heatmap(const nn::Tensor& m, const std::filesystem::path& path) {
  const auto px = heatmap_pixels(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

Graymap read_graymap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  std::string magic;
  int maxval = 0;
  Graymap g;
  in >> magic >> g.width >> g.height >> maxval;
  if (magic != "P5" || maxval != 255 || !in) fail(ErrorCode::MalformedDocument, "not an 8-bit P5 graymap");
  in.get();  // single whitespace before the raster
  g.pixels.resize(g.width * g.height);
  in.read(reinterpret_cast<char*>(g.pixels.data()), static_cast<std::streamsize>(g.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(g.pixels.size()))
    fail(ErrorCode::MalformedDocument, "truncated graymap raster");
  return g;
}

}  // namespace sdqc
