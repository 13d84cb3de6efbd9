#include "sdqc/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sdqc/error.hpp"

namespace sdqc {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

ojson read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot read " + path.string());
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedDocument, path.string() + ": " + e.what());
  }
}

std::string id_string(const ojson& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  fail(ErrorCode::MalformedDocument, "post id is neither a string nor an integer");
}

struct RawPost {
  std::string id;
  std::string text;
  bool media = false;
};

RawPost read_tweet(const ojson& j) {
  RawPost p;
  p.id = j.contains("id_str") ? id_string(j["id_str"]) : id_string(j.at("id"));
  if (j.contains("full_text"))
    p.text = j["full_text"].get<std::string>();
  else
    p.text = j.value("text", std::string());
  for (const char* key : {"entities", "extended_entities"})
    if (j.contains(key) && j[key].is_object() && j[key].contains("media") && !j[key]["media"].empty()) p.media = true;
  return p;
}

RawPost read_reddit(const ojson& j) {
  const ojson* d = &j;
  if (j.contains("data") && j["data"].is_object()) {
    d = &j["data"];
    if (d->contains("children") && (*d)["children"].is_array() && !(*d)["children"].empty())
      d = &(*d)["children"][0]["data"];
  }
  RawPost p;
  p.id = id_string(d->at("id"));
  if (d->contains("body") && (*d)["body"].is_string()) {
    p.text = (*d)["body"].get<std::string>();
  } else {
    p.text = d->value("title", std::string());
    const auto self = d->value("selftext", std::string());
    if (!self.empty()) p.text += (p.text.empty() ? "" : " ") + self;
  }
  const auto url = d->value("url", std::string());
  p.media = url.find("i.redd.it") != std::string::npos || url.find("imgur") != std::string::npos;
  return p;
}

std::map<std::string, RawPost> read_posts(const fs::path& dir, Platform platform) {
  std::map<std::string, RawPost> posts;
  for (const char* sub : {"source-tweet", "replies"}) {
    const fs::path d = dir / sub;
    if (!fs::is_directory(d)) continue;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(d))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto j = read_json(f);
      auto p = platform == Platform::Twitter ? read_tweet(j) : read_reddit(j);
      posts[p.id] = std::move(p);
    }
  }
  return posts;
}

// Depth-first over the nested structure, keeping sibling order as written.
void walk(const ojson& node, const std::optional<std::string>& surviving_parent,
          const std::map<std::string, RawPost>& posts, std::vector<std::pair<std::string, std::optional<std::string>>>& out) {
  if (!node.is_object()) return;
  for (auto it = node.begin(); it != node.end(); ++it) {
    std::optional<std::string> parent = surviving_parent;
    if (posts.count(it.key())) {
      out.emplace_back(it.key(), surviving_parent);
      parent = it.key();
    }
    walk(it.value(), parent, posts, out);
  }
}

}  // namespace

std::map<std::string, StanceLabel> read_stance_key(const fs::path& path) {
  const auto j = read_json(path);
  const ojson& table = j.contains("subtaskaenglish") ? j["subtaskaenglish"] : j;
  std::map<std::string, StanceLabel> out;
  for (auto it = table.begin(); it != table.end(); ++it) {
    if (!it.value().is_string()) fail(ErrorCode::MalformedDocument, "key label for " + it.key() + " is not a string");
    out[it.key()] = parse_label(it.value().get<std::string>());
  }
  return out;
}

Thread read_thread_dir(const fs::path& dir, Platform platform, const std::map<std::string, StanceLabel>& labels) {
  const auto posts = read_posts(dir, platform);
  if (posts.empty()) fail(ErrorCode::MalformedDocument, "no posts under " + dir.string());
  std::vector<std::pair<std::string, std::optional<std::string>>> order;
  if (fs::exists(dir / "structure.json")) walk(read_json(dir / "structure.json"), std::nullopt, posts, order);
  if (order.empty()) fail(ErrorCode::BrokenTree, "structure.json missing or names no known post in " + dir.string());

  ojson doc;
  doc["thread_id"] = dir.filename().string();
  doc["platform"] = platform_name(platform);
  doc["posts"] = ojson::array();
  for (const auto& [id, parent] : order) {
    const auto& p = posts.at(id);
    ojson jp;
    jp["id"] = id;
    jp["parent_id"] = parent ? ojson(*parent) : ojson(nullptr);
    jp["text"] = p.text;
    auto lab = labels.find(id);
    jp["label"] = lab == labels.end() ? ojson(nullptr) : ojson(std::string(label_name(lab->second)));
    jp["media"] = p.media;
    doc["posts"].push_back(std::move(jp));
  }
  return parse_thread(doc.dump());
}

IngestSummary ingest_release(const std::vector<fs::path>& roots, const std::map<Split, fs::path>& keys,
                             const fs::path& out_dir) {
  std::map<std::string, StanceLabel> all_labels;
  std::map<std::string, Split> split_of;
  for (const auto& [split, path] : keys)
    for (const auto& [id, lab] : read_stance_key(path)) {
      all_labels[id] = lab;
      split_of[id] = split;
    }

  std::vector<std::pair<fs::path, Platform>> thread_dirs;
  for (const auto& root : roots) {
    if (!fs::is_directory(root)) fail(ErrorCode::IoFailure, "not a directory: " + root.string());
    const Platform platform =
        root.string().find("reddit") != std::string::npos ? Platform::Reddit : Platform::Twitter;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file() && e.path().filename() == "structure.json")
        thread_dirs.emplace_back(e.path().parent_path(), platform);
  }
  std::sort(thread_dirs.begin(), thread_dirs.end());

  fs::create_directories(out_dir / "threads");
  IngestSummary summary;
  std::vector<ManifestEntry> manifest;
  for (const auto& [dir, platform] : thread_dirs) {
    Thread t = read_thread_dir(dir, platform, all_labels);
    std::optional<Split> split;
    if (auto it = split_of.find(t.root_id); it != split_of.end()) split = it->second;
    for (const auto& id : t.file_order) {
      if (split) break;
      if (auto it = split_of.find(id); it != split_of.end()) split = it->second;
    }
    if (!split) {
      ++summary.skipped_threads;
      continue;
    }
    const fs::path rel = fs::path("threads") / (t.thread_id + ".json");
    std::ofstream out(out_dir / rel, std::ios::binary);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + (out_dir / rel).string());
    out << serialize_thread(t) << "\n";
    manifest.push_back({out_dir / rel, *split});
    ++summary.threads;
    summary.posts += t.posts.size();
  }
  write_manifest(out_dir / "manifest.tsv", manifest);
  return summary;
}

}  // namespace sdqc
