#pragma once

#include "fdz/image_io.hpp"
#include "fdz/models.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

namespace fdz::training {

// FDHZ checkpoint: "FDHZ" magic, u32 version, u32 model kind, the full model
// configuration, then one record per parameter and running-statistic tensor:
// u32 name length, name bytes, u32 rank (always 4), u32 dims, raw
// little-endian 32-bit floats. Save/load round-trips are bit-exact for
// 32-bit models.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct checkpoint_error : io_error {
  using io_error::io_error;
};

namespace detail {

inline void wr_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}
inline void wr_f32(std::vector<unsigned char>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  wr_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::string& path) : path_(path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw file_not_found("no such file: " + path);
    std::fseek(f, 0, SEEK_END);
    const long n = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    buf_.resize(static_cast<size_t>(n));
    const size_t got = std::fread(buf_.data(), 1, buf_.size(), f);
    std::fclose(f);
    if (got != buf_.size()) throw corrupt_data(path + ": short read");
  }

  std::uint32_t u32(const std::string& what) {
    if (pos_ + 4 > buf_.size())
      throw checkpoint_error(path_ + ": truncated while reading " + what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const std::string& what) {
    const std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(size_t len, const std::string& what) {
    if (pos_ + len > buf_.size())
      throw checkpoint_error(path_ + ": truncated while reading " + what);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  void raw(void* dst, size_t len, const std::string& what) {
    if (pos_ + len > buf_.size())
      throw checkpoint_error(path_ + ": truncated while reading " + what);
    std::memcpy(dst, buf_.data() + pos_, len);
    pos_ += len;
  }
  bool at_end() const { return pos_ == buf_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::vector<unsigned char> buf_;
  size_t pos_ = 0;
};

inline void write_config(std::vector<unsigned char>& out, const models::FastNetConfig& cfg) {
  wr_u32(out, cfg.encoder_kind == models::EncoderKind::basic ? 0 : 1);
  for (int b : cfg.blocks_per_stage) wr_u32(out, static_cast<std::uint32_t>(b));
  wr_u32(out, static_cast<std::uint32_t>(cfg.base_width));
  wr_u32(out, static_cast<std::uint32_t>(cfg.feature_channels));
  wr_u32(out, static_cast<std::uint32_t>(cfg.refinement_scales.size()));
  for (int s : cfg.refinement_scales) wr_u32(out, static_cast<std::uint32_t>(s));
  wr_f32(out, cfg.t_min);
}

inline models::FastNetConfig read_config(Reader& r) {
  models::FastNetConfig cfg;
  cfg.encoder_kind =
      r.u32("encoder kind") == 0 ? models::EncoderKind::basic : models::EncoderKind::bottleneck;
  for (int& b : cfg.blocks_per_stage) b = static_cast<int>(r.u32("blocks"));
  cfg.base_width = static_cast<int>(r.u32("base width"));
  cfg.feature_channels = static_cast<int>(r.u32("feature channels"));
  cfg.refinement_scales.resize(r.u32("scale count"));
  for (int& s : cfg.refinement_scales) s = static_cast<int>(r.u32("scales"));
  cfg.t_min = r.f32("t_min");
  return cfg;
}

}  // namespace detail

template <typename S>
void save_checkpoint(models::Model<S>& model, const std::string& path) {
  std::vector<unsigned char> out;
  out.insert(out.end(), {'F', 'D', 'H', 'Z'});
  detail::wr_u32(out, kCheckpointVersion);
  detail::wr_u32(out, model.kind == models::ModelKind::fastnet ? 0 : 1);
  detail::write_config(out, model.cfg);

  std::vector<nn::Param<S>*> tensors = model.graph.params();
  for (auto* st : model.graph.state()) tensors.push_back(st);
  detail::wr_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (auto* p : tensors) {
    detail::wr_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.insert(out.end(), p->name.begin(), p->name.end());
    detail::wr_u32(out, 4);
    for (int d : p->value.dims()) detail::wr_u32(out, static_cast<std::uint32_t>(d));
    for (size_t i = 0; i < p->value.count(); ++i)
      detail::wr_f32(out, static_cast<float>(p->value.data()[i]));
  }

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw unwritable_path("cannot open for writing: " + path);
  const size_t n = std::fwrite(out.data(), 1, out.size(), f);
  std::fclose(f);
  if (n != out.size()) throw unwritable_path("write failed: " + path);
}

// Reads kind + config only (for model reconstruction before loading).
inline std::pair<models::ModelKind, models::FastNetConfig> peek_checkpoint(
    const std::string& path) {
  detail::Reader r(path);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::memcmp(magic, "FDHZ", 4) != 0) throw checkpoint_error(path + ": bad FDHZ magic");
  if (r.u32("version") != kCheckpointVersion)
    throw checkpoint_error(path + ": unsupported FDHZ version");
  const models::ModelKind kind =
      r.u32("model kind") == 0 ? models::ModelKind::fastnet : models::ModelKind::dualfastnet;
  return {kind, detail::read_config(r)};
}

// Loads into an already-built model; the stored kind and config must match.
template <typename S>
void load_checkpoint(models::Model<S>& model, const std::string& path) {
  detail::Reader r(path);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::memcmp(magic, "FDHZ", 4) != 0) throw checkpoint_error(path + ": bad FDHZ magic");
  if (r.u32("version") != kCheckpointVersion)
    throw checkpoint_error(path + ": unsupported FDHZ version");
  const std::uint32_t kind = r.u32("model kind");
  if ((kind == 0) != (model.kind == models::ModelKind::fastnet))
    throw checkpoint_error(path + ": model kind mismatch");
  const models::FastNetConfig cfg = detail::read_config(r);
  if (!(cfg == model.cfg)) throw checkpoint_error(path + ": model configuration mismatch");

  std::vector<nn::Param<S>*> tensors = model.graph.params();
  for (auto* st : model.graph.state()) tensors.push_back(st);
  const std::uint32_t count = r.u32("tensor count");
  if (count != tensors.size())
    throw checkpoint_error(path + ": tensor count mismatch (" + std::to_string(count) + " vs " +
                           std::to_string(tensors.size()) + ")");
  for (auto* p : tensors) {
    const std::uint32_t name_len = r.u32("name length of " + p->name);
    const std::string name = r.str(name_len, "name of " + p->name);
    if (name != p->name)
      throw checkpoint_error(path + ": tensor name mismatch: stored '" + name + "', expected '" +
                             p->name + "'");
    if (r.u32("rank of " + name) != 4)
      throw checkpoint_error(path + ": bad rank for tensor " + name);
    for (int d : p->value.dims())
      if (r.u32("dims of " + name) != static_cast<std::uint32_t>(d))
        throw checkpoint_error(path + ": shape mismatch for tensor " + name);
    for (size_t i = 0; i < p->value.count(); ++i)
      p->value.data()[i] = static_cast<S>(r.f32("payload of " + name));
  }
  if (!r.at_end()) throw checkpoint_error(path + ": trailing bytes after last tensor");
}

}  // namespace fdz::training
