#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdqc/models.hpp"

namespace sdqc {

struct AttentionRecord {
  std::size_t layer = 0;
  std::size_t head = 0;
  nn::Tensor scores;  // QKᵀ/√d_k, L×L
  nn::Tensor probs;   // row softmax over non-padding columns
  std::vector<std::string> tokens;       // subword strings (empty without a vocab)
  std::vector<std::int32_t> segment_ids;
  std::size_t segment_boundary = 0;      // first position of document 2
  std::size_t real_len = 0;              // positions from here on are padding
};

// Every layer/head of one forward pass. Non-micro_bert models raise WrongModelKind.
std::vector<AttentionRecord> capture(StanceModel& model, const EncodedExample& example, const Vocab* vocab = nullptr,
                                     std::size_t pad_to = 0);

// Statistics over the non-padding block, averaged over its rows.
double intra_segment_mass(const AttentionRecord& rec);
double diagonal_mass(const AttentionRecord& rec);
double local_mass(const AttentionRecord& rec, std::size_t window);

struct HeadStats {
  double intra_segment_mass = 0.0;
  double diagonal_mass = 0.0;
  std::vector<std::pair<std::size_t, double>> local_mass;  // (window, mass)
};
HeadStats head_stats(const AttentionRecord& rec, const std::vector<std::size_t>& windows = {1, 2});

// Min-max scaled 8-bit pixels, row-major; a constant matrix maps to 128.
std::vector<std::uint8_t> heatmap_pixels(const nn::Tensor& m);
// Binary P5 graymap: "P5\n<width> <height>\n255\n" then the pixels.
void export_heatmap(const nn::Tensor& m, const std::filesystem::path& path);

struct Graymap {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;
};
Graymap read_graymap(const std::filesystem::path& path);

}  // namespace sdqc
