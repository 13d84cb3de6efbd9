#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sdqc/fusion.hpp"
#include "sdqc/metrics.hpp"

namespace sdqc {

std::string read_text_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never see a partial file.
void write_text_file(const std::filesystem::path& path, const std::string& content);

// Tab-separated with a header row:
// id predicted_label p_S p_D p_Q p_C s_S s_D s_Q s_C
std::string format_predictions(const PredictionMatrix& pm);
PredictionMatrix parse_predictions(const std::string& text);
void write_predictions(const std::filesystem::path& path, const PredictionMatrix& pm);
PredictionMatrix read_predictions(const std::filesystem::path& path);

// "id<TAB>label" rows under an "id\tlabel" header.
void write_gold(const std::filesystem::path& path, const PredictionMatrix& pm);
std::vector<std::pair<std::string, StanceLabel>> read_gold(const std::filesystem::path& path);

// Scorer answer file: {"<id>": "support" | "deny" | "query" | "comment", ...}
std::string format_answers(const std::vector<std::string>& ids, const std::vector<int>& labels);

std::string format_metrics(const Metrics& m);

// Every *.tsv in `dir` except gold.tsv is one member, named by its file stem
// and ordered by name. gold.tsv, when present, supplies the gold codes.
PredictionSet load_prediction_set(const std::filesystem::path& dir);

}  // namespace sdqc
