#include "sdqc/thread_data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sdqc/error.hpp"

namespace sdqc {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorCode::MalformedDocument, std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_string()) fail(ErrorCode::MalformedDocument, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

// Ids are sometimes numeric in exported tweet data.
std::string id_string(const json& v, const char* key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  fail(ErrorCode::MalformedDocument, std::string("field '") + key + "' must be a string id");
}

}  // namespace

StanceLabel label_from_code(int c) {
  if (c < 0 || c >= kNumClasses) fail(ErrorCode::MalformedDocument, "label code out of range: " + std::to_string(c));
  return static_cast<StanceLabel>(c);
}

std::string_view label_name(StanceLabel l) {
  switch (l) {
    case StanceLabel::Support: return "support";
    case StanceLabel::Deny: return "deny";
    case StanceLabel::Query: return "query";
    case StanceLabel::Comment: return "comment";
  }
  return "comment";
}

char label_letter(StanceLabel l) { return "SDQC"[code(l)]; }

StanceLabel parse_label(std::string_view s) {
  const auto v = lower(s);
  if (v == "support" || v == "s") return StanceLabel::Support;
  if (v == "deny" || v == "d") return StanceLabel::Deny;
  if (v == "query" || v == "q") return StanceLabel::Query;
  if (v == "comment" || v == "c") return StanceLabel::Comment;
  fail(ErrorCode::MalformedDocument, "unknown stance label '" + std::string(s) + "'");
}

std::string_view platform_name(Platform p) { return p == Platform::Twitter ? "twitter" : "reddit"; }

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  const auto v = lower(s);
  if (v == "train") return Split::Train;
  if (v == "dev") return Split::Dev;
  if (v == "test") return Split::Test;
  fail(ErrorCode::MalformedDocument, "unknown split '" + std::string(s) + "'");
}

const Post* Thread::find(std::string_view id) const {
  auto it = posts.find(std::string(id));
  return it == posts.end() ? nullptr : &it->second;
}

Thread parse_thread(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::MalformedDocument, e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::MalformedDocument, "thread document must be an object");

  Thread t;
  t.thread_id = id_string(require(doc, "thread_id"), "thread_id");
  const auto platform = lower(require_string(doc, "platform"));
  if (platform == "twitter") {
    t.platform = Platform::Twitter;
  } else if (platform == "reddit") {
    t.platform = Platform::Reddit;
  } else {
    fail(ErrorCode::MalformedDocument, "unknown platform '" + platform + "'");
  }

  const auto& posts = require(doc, "posts");
  if (!posts.is_array()) fail(ErrorCode::MalformedDocument, "'posts' must be an array");
  if (posts.empty()) fail(ErrorCode::BrokenTree, "thread " + t.thread_id + " has no posts");

  for (const auto& p : posts) {
    if (!p.is_object()) fail(ErrorCode::MalformedDocument, "post must be an object");
    Post post;
    post.id = id_string(require(p, "id"), "id");
    post.thread_id = t.thread_id;
    post.platform = t.platform;
    if (auto it = p.find("parent_id"); it != p.end() && !it->is_null()) post.parent_id = id_string(*it, "parent_id");
    if (auto it = p.find("text"); it != p.end() && !it->is_null()) {
      if (!it->is_string()) fail(ErrorCode::MalformedDocument, "'text' must be a string");
      post.text = it->get<std::string>();
    }
    if (auto it = p.find("label"); it != p.end() && !it->is_null()) {
      if (!it->is_string()) fail(ErrorCode::MalformedDocument, "'label' must be a string or null");
      post.label = parse_label(it->get<std::string>());
    }
    if (auto it = p.find("media"); it != p.end() && !it->is_null()) {
      if (!it->is_boolean()) fail(ErrorCode::MalformedDocument, "'media' must be a boolean");
      post.media_flag = it->get<bool>();
    }
    if (t.posts.count(post.id)) fail(ErrorCode::MalformedDocument, "duplicate post id " + post.id);
    t.file_order.push_back(post.id);
    t.posts.emplace(post.id, std::move(post));
  }

  std::vector<std::string> roots;
  for (const auto& id : t.file_order) {
    const auto& post = t.posts.at(id);
    if (!post.parent_id) {
      roots.push_back(id);
      continue;
    }
    if (!t.posts.count(*post.parent_id))
      fail(ErrorCode::BrokenTree, "post " + id + " has unresolvable parent " + *post.parent_id);
    if (*post.parent_id == id) fail(ErrorCode::BrokenTree, "post " + id + " is its own parent");
    t.children[*post.parent_id].push_back(id);
  }
  if (roots.size() != 1)
    fail(ErrorCode::BrokenTree, "thread " + t.thread_id + " has " + std::to_string(roots.size()) + " roots");
  t.root_id = roots.front();

  // n-1 parent edges plus full reachability from the root means no cycles.
  std::set<std::string> seen;
  std::vector<std::string> stack{t.root_id};
  while (!stack.empty()) {
    auto id = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(id).second) fail(ErrorCode::BrokenTree, "cycle through " + id);
    if (auto it = t.children.find(id); it != t.children.end())
      for (const auto& c : it->second) stack.push_back(c);
  }
  if (seen.size() != t.posts.size()) fail(ErrorCode::BrokenTree, "thread " + t.thread_id + " contains a cycle");
  return t;
}

Thread load_thread(const std::filesystem::path& path) { return parse_thread(read_file(path)); }

std::string serialize_thread(const Thread& thread) {
  json doc;
  doc["thread_id"] = thread.thread_id;
  doc["platform"] = std::string(platform_name(thread.platform));
  json posts = json::array();
  for (const auto& id : thread.file_order) {
    const auto& p = thread.posts.at(id);
    json jp;
    jp["id"] = p.id;
    jp["parent_id"] = p.parent_id ? json(*p.parent_id) : json(nullptr);
    jp["text"] = p.text;
    jp["label"] = p.label ? json(std::string(label_name(*p.label))) : json(nullptr);
    jp["media"] = p.media_flag;
    posts.push_back(std::move(jp));
  }
  doc["posts"] = std::move(posts);
  return doc.dump(1);
}

std::vector<std::string> dfs_order(const Thread& thread) {
  std::vector<std::string> order;
  order.reserve(thread.posts.size());
  std::vector<std::string> stack{thread.root_id};
  while (!stack.empty()) {
    auto id = std::move(stack.back());
    stack.pop_back();
    if (auto it = thread.children.find(id); it != thread.children.end())
      for (auto c = it->second.rbegin(); c != it->second.rend(); ++c) stack.push_back(*c);
    order.push_back(std::move(id));
  }
  return order;
}

std::vector<StanceTriple> linearize(const Thread& thread) {
  std::vector<StanceTriple> out;
  const auto& root = thread.root();
  for (const auto& id : dfs_order(thread)) {
    const auto& post = thread.posts.at(id);
    StanceTriple t;
    t.target_text = post.text;
    t.target_id = post.id;
    t.label = post.label;
    if (post.parent_id) {
      t.source_text = root.text;
      // A reply to the root would repeat the source as its previous post.
      if (*post.parent_id != thread.root_id) t.previous_text = thread.posts.at(*post.parent_id).text;
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) fail(ErrorCode::IoFailure, "cannot open manifest " + manifest.string());
  const auto base = manifest.parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      fail(ErrorCode::MalformedDocument, manifest.string() + ":" + std::to_string(lineno) + ": expected path<TAB>split");
    std::filesystem::path p = line.substr(0, tab);
    if (p.is_relative()) p = base / p;
    out.push_back({p, parse_split(line.substr(tab + 1))});
  }
  return out;
}

void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries) {
  std::error_code ec;
  if (manifest.has_parent_path()) std::filesystem::create_directories(manifest.parent_path(), ec);
  std::ofstream out(manifest, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + manifest.string());
  const auto base = manifest.parent_path();
  for (const auto& e : entries) {
    auto rel = e.path.lexically_relative(base.empty() ? "." : base);
    out << (rel.empty() ? e.path : rel).generic_string() << '\t' << split_name(e.split) << '\n';
  }
}

std::vector<ThreadEntry> load_dataset(const std::filesystem::path& manifest) {
  std::vector<ThreadEntry> out;
  for (const auto& e : read_manifest(manifest)) out.push_back({load_thread(e.path), e.split});
  return out;
}

std::vector<SplitStats> split_stats(const std::vector<ThreadEntry>& dataset) {
  std::vector<SplitStats> stats(3);
  stats[0].split = Split::Train;
  stats[1].split = Split::Dev;
  stats[2].split = Split::Test;
  for (const auto& entry : dataset) {
    auto& s = stats[static_cast<int>(entry.split)];
    for (const auto& [id, post] : entry.thread.posts) {
      if (!post.label) fail(ErrorCode::MissingLabel, "post " + id + " in thread " + entry.thread.thread_id);
      ++s.counts[code(*post.label)];
      ++s.total;
    }
  }
  return stats;
}

}  // namespace sdqc
