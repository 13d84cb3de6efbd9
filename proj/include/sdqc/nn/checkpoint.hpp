#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdqc/nn/params.hpp"

namespace sdqc::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredParameter {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

// Binary layout (little-endian): "SDQC", u32 version, u32 model kind,
// u32 config length + config bytes (key=value lines), u32 parameter count,
// then per parameter: u32 name length + name, u32 rank, u32 dims[rank],
// f32 payload.
struct CheckpointData {
  std::uint32_t version = kCheckpointVersion;
  std::uint32_t model_kind = 0;
  std::string config;
  std::vector<StoredParameter> params;
};

CheckpointData snapshot(std::uint32_t model_kind, const std::string& config, const ParamStore& params);
std::string serialize(const CheckpointData& ckpt);
CheckpointData deserialize(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& ckpt);
CheckpointData load_checkpoint(const std::filesystem::path& path);

// Copies stored values into same-named parameters. With `require_all`, every
// parameter in `params` must be present; otherwise missing ones keep their
// values. Shape differences are always an error. Returns the number copied.
std::size_t restore(const CheckpointData& ckpt, ParamStore& params, bool require_all);

}  // namespace sdqc::nn
