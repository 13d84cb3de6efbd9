#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdqc {

// Integer codes are persisted in checkpoints, prediction files and metrics.
enum class StanceLabel : std::int32_t { Support = 0, Deny = 1, Query = 2, Comment = 3 };

inline constexpr int kNumClasses = 4;
inline constexpr std::array<StanceLabel, kNumClasses> kAllLabels = {
    StanceLabel::Support, StanceLabel::Deny, StanceLabel::Query, StanceLabel::Comment};

constexpr int code(StanceLabel l) { return static_cast<int>(l); }
StanceLabel label_from_code(int c);
std::string_view label_name(StanceLabel l);    // "support", "deny", ...
char label_letter(StanceLabel l);              // 'S', 'D', 'Q', 'C'
StanceLabel parse_label(std::string_view s);   // accepts names and letters, any case

enum class Platform { Twitter, Reddit };
std::string_view platform_name(Platform p);

enum class Split { Train, Dev, Test };
std::string_view split_name(Split s);
Split parse_split(std::string_view s);

struct Post {
  std::string id;
  std::string text;
  std::optional<std::string> parent_id;
  std::string thread_id;
  Platform platform = Platform::Twitter;
  std::optional<StanceLabel> label;
  bool media_flag = false;
};

struct Thread {
  std::string thread_id;
  std::string root_id;
  Platform platform = Platform::Twitter;
  std::map<std::string, Post> posts;
  // Children in file order. Leaves have no entry.
  std::map<std::string, std::vector<std::string>> children;
  // Post ids in file order, used for re-serialization.
  std::vector<std::string> file_order;

  const Post& root() const { return posts.at(root_id); }
  const Post* find(std::string_view id) const;
};

struct StanceTriple {
  std::string source_text;
  std::string previous_text;
  std::string target_text;
  std::string target_id;
  std::optional<StanceLabel> label;
};

struct SplitStats {
  Split split = Split::Train;
  std::array<std::int64_t, kNumClasses> counts{};
  std::int64_t total = 0;
};

Thread parse_thread(std::string_view document);
Thread load_thread(const std::filesystem::path& path);
std::string serialize_thread(const Thread& thread);

// Depth-first from the root, children in file order.
std::vector<StanceTriple> linearize(const Thread& thread);
// Post ids in the same order as linearize().
std::vector<std::string> dfs_order(const Thread& thread);

struct ThreadEntry {
  Thread thread;
  Split split = Split::Train;
};

struct ManifestEntry {
  std::filesystem::path path;
  Split split = Split::Train;
};

// Tab-separated "path<TAB>split" lines; relative paths resolve against the
// manifest's directory. Blank lines and '#' comments are skipped.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries);
std::vector<ThreadEntry> load_dataset(const std::filesystem::path& manifest);

// Returns stats for train, dev and test, in that order.
std::vector<SplitStats> split_stats(const std::vector<ThreadEntry>& dataset);

}  // namespace sdqc
