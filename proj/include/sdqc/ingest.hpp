#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sdqc/thread_data.hpp"

namespace sdqc {

// Stance answer keys: either {"subtaskaenglish": {id: label}} or a flat {id: label} map.
std::map<std::string, StanceLabel> read_stance_key(const std::filesystem::path& path);

struct IngestSummary {
  std::size_t threads = 0;
  std::size_t posts = 0;
  std::size_t skipped_threads = 0;  // no post appears in any key
};

// Converts a competition-style release (one directory per thread holding
// structure.json, source-tweet/ and replies/) into thread documents under
// out_dir/threads plus out_dir/manifest.tsv. A thread's split is the key that
// labels its source post (or, failing that, any of its posts). Posts named in
// structure.json without a file are dropped and their replies re-attached to
// the nearest surviving ancestor.
IngestSummary ingest_release(const std::vector<std::filesystem::path>& roots,
                             const std::map<Split, std::filesystem::path>& keys,
                             const std::filesystem::path& out_dir);

// One thread directory to a thread; labels are looked up in `labels`.
Thread read_thread_dir(const std::filesystem::path& dir, Platform platform,
                       const std::map<std::string, StanceLabel>& labels);

}  // namespace sdqc
