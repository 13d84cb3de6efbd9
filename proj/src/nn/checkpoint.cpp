#include "sdqc/nn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "sdqc/binio.hpp"
#include "sdqc/error.hpp"

namespace sdqc::nn {

namespace {
constexpr char kMagic[4] = {'S', 'D', 'Q', 'C'};
}

CheckpointData snapshot(std::uint32_t model_kind, const std::string& config, const ParamStore& params) {
  CheckpointData c;
  c.model_kind = model_kind;
  c.config = config;
  for (const auto& p : params.all()) {
    StoredParameter sp;
    sp.name = p.name;
    for (auto d : p.var->value.shape) sp.dims.push_back(static_cast<std::uint32_t>(d));
    sp.values.reserve(p.var->value.values.size());
    for (double v : p.var->value.values) sp.values.push_back(static_cast<float>(v));
    c.params.push_back(std::move(sp));
  }
  return c;
}

std::string serialize(const CheckpointData& ckpt) {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, 4);
  binio::put_u32(out, ckpt.version);
  binio::put_u32(out, ckpt.model_kind);
  binio::put_u32(out, static_cast<std::uint32_t>(ckpt.config.size()));
  out.write(ckpt.config.data(), static_cast<std::streamsize>(ckpt.config.size()));
  binio::put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    binio::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    binio::put_u32(out, static_cast<std::uint32_t>(p.dims.size()));
    for (auto d : p.dims) binio::put_u32(out, d);
    for (float v : p.values) binio::put_f32(out, v);
  }
  return out.str();
}

CheckpointData deserialize(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != std::string(kMagic, 4))
    fail(ErrorCode::MalformedDocument, "not a checkpoint file");
  CheckpointData c;
  c.version = binio::get_u32(in);
  if (c.version != kCheckpointVersion)
    fail(ErrorCode::MalformedDocument, "unsupported checkpoint version " + std::to_string(c.version));
  c.model_kind = binio::get_u32(in);
  c.config = binio::get_bytes(in, binio::get_u32(in));
  const std::uint32_t count = binio::get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredParameter p;
    p.name = binio::get_bytes(in, binio::get_u32(in));
    const std::uint32_t rank = binio::get_u32(in);
    if (rank > 8) fail(ErrorCode::MalformedDocument, "implausible rank for " + p.name);
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      p.dims.push_back(binio::get_u32(in));
      n *= p.dims.back();
    }
    if (n > bytes.size() / 4) fail(ErrorCode::MalformedDocument, "payload larger than file for " + p.name);
    p.values.resize(n);
    for (auto& v : p.values) v = binio::get_f32(in);
    c.params.push_back(std::move(p));
  }
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorCode::MalformedDocument, "trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& ckpt) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot write checkpoint " + path.string());
  const auto bytes = serialize(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

std::size_t restore(const CheckpointData& ckpt, ParamStore& params, bool require_all) {
  std::size_t copied = 0;
  for (auto& p : params.all()) {
    const StoredParameter* sp = nullptr;
    for (const auto& s : ckpt.params)
      if (s.name == p.name) sp = &s;
    if (!sp) {
      if (require_all) fail(ErrorCode::ConfigMismatch, "checkpoint lacks parameter " + p.name);
      continue;
    }
    std::vector<std::size_t> dims(sp->dims.begin(), sp->dims.end());
    if (dims != p.var->value.shape)
      fail(ErrorCode::ConfigMismatch, "shape mismatch for " + p.name + ": checkpoint vs " + p.var->value.shape_string());
    for (std::size_t i = 0; i < sp->values.size(); ++i) p.var->value.values[i] = static_cast<double>(sp->values[i]);
    ++copied;
  }
  return copied;
}

}  // namespace sdqc::nn
