#include "sdqc/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sdqc/error.hpp"
#include "sdqc/models.hpp"
#include "sdqc/numfmt.hpp"
#include "sdqc/textprep.hpp"

namespace sdqc {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + path.string());
    out << content;
    if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

constexpr const char* kPredictionHeader = "id\tpredicted_label\tp_S\tp_D\tp_Q\tp_C\ts_S\ts_D\ts_Q\ts_C";

}  // namespace

std::string format_predictions(const PredictionMatrix& pm) {
  std::string out = std::string(kPredictionHeader) + "\n";
  for (std::size_t i = 0; i < pm.size(); ++i) {
    out += pm.ids[i];
    out += '\t';
    out += label_name(label_from_code(argmax4(pm.probs[i])));
    for (double p : pm.probs[i]) out += "\t" + format_double(p);
    for (double s : pm.scores[i]) out += "\t" + format_double(s);
    out += '\n';
  }
  return out;
}

PredictionMatrix parse_predictions(const std::string& text) {
  const auto lines = data_lines(text);
  if (lines.empty() || lines.front() != kPredictionHeader)
    fail(ErrorCode::MalformedDocument, "prediction file lacks the expected header");
  PredictionMatrix pm;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto cols = split_tabs(lines[l]);
    if (cols.size() != 10) fail(ErrorCode::MalformedDocument, "prediction row " + std::to_string(l) + " needs 10 fields");
    pm.ids.push_back(cols[0]);
    ClassArray p{}, s{};
    for (int c = 0; c < kNumClasses; ++c) {
      p[c] = parse_double(cols[2 + c]);
      s[c] = parse_double(cols[6 + c]);
    }
    pm.probs.push_back(p);
    pm.scores.push_back(s);
    pm.gold.emplace_back();
  }
  return pm;
}

void write_predictions(const fs::path& path, const PredictionMatrix& pm) {
  write_text_file(path, format_predictions(pm));
}

PredictionMatrix read_predictions(const fs::path& path) { return parse_predictions(read_text_file(path)); }

void write_gold(const fs::path& path, const PredictionMatrix& pm) {
  std::string out = "id\tlabel\n";
  for (std::size_t i = 0; i < pm.size(); ++i) {
    if (!pm.gold[i]) fail(ErrorCode::MissingLabel, "no gold label for " + pm.ids[i]);
    out += pm.ids[i] + "\t" + std::string(label_name(*pm.gold[i])) + "\n";
  }
  write_text_file(path, out);
}

std::vector<std::pair<std::string, StanceLabel>> read_gold(const fs::path& path) {
  const auto lines = data_lines(read_text_file(path));
  if (lines.empty() || lines.front() != "id\tlabel") fail(ErrorCode::MalformedDocument, "gold file lacks its header");
  std::vector<std::pair<std::string, StanceLabel>> out;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto cols = split_tabs(lines[l]);
    if (cols.size() != 2) fail(ErrorCode::MalformedDocument, "gold row needs 2 fields");
    out.emplace_back(cols[0], parse_label(cols[1]));
  }
  return out;
}

std::string format_answers(const std::vector<std::string>& ids, const std::vector<int>& labels) {
  if (ids.size() != labels.size()) fail(ErrorCode::ShapeMismatch, "one label per id");
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < ids.size(); ++i) j[ids[i]] = label_name(label_from_code(labels[i]));
  return j.dump(2) + "\n";
}

std::string format_metrics(const Metrics& m) {
  nlohmann::ordered_json j;
  j["n"] = m.n;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["f1_S"] = m.f1[code(StanceLabel::Support)];
  j["f1_Q"] = m.f1[code(StanceLabel::Query)];
  j["f1_D"] = m.f1[code(StanceLabel::Deny)];
  j["f1_C"] = m.f1[code(StanceLabel::Comment)];
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : m.confusion) rows.push_back(r);
  j["confusion"] = rows;
  return j.dump(2) + "\n";
}

PredictionSet load_prediction_set(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::IoFailure, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".tsv" && e.path().filename() != "gold.tsv")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  PredictionSet ps;
  for (const auto& f : files) {
    ps.model_ids.push_back(f.stem().string());
    ps.members.push_back(read_predictions(f));
  }
  if (ps.members.empty()) fail(ErrorCode::EmptyPredictionSet, "no prediction files in " + dir.string());
  ps.validate();
  const fs::path gold_path = dir / "gold.tsv";
  if (fs::exists(gold_path)) {
    const auto gold = read_gold(gold_path);
    const auto& ids = ps.members.front().ids;
    if (gold.size() != ids.size()) fail(ErrorCode::ExampleOrderMismatch, "gold file lists a different example count");
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i].first != ids[i]) fail(ErrorCode::ExampleOrderMismatch, "gold file order differs at " + gold[i].first);
      ps.gold.push_back(code(gold[i].second));
      for (auto& m : ps.members) m.gold[i] = gold[i].second;
    }
  }
  return ps;
}

}  // namespace sdqc
