#include "fdz/fmap.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace fdz {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'A', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32_le(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_fmap(const Raster& r, const std::string& path) {
  std::vector<unsigned char> buf;
  buf.reserve(kFmapHeaderBytes + r.size() * 4);
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32_le(buf, kVersion);
  put_u32_le(buf, static_cast<std::uint32_t>(r.height()));
  put_u32_le(buf, static_cast<std::uint32_t>(r.width()));
  put_u32_le(buf, static_cast<std::uint32_t>(r.channels()));
  for (size_t i = 0; i < r.size(); ++i) {
    std::uint32_t bits;
    static_assert(sizeof(bits) == sizeof(float));
    std::memcpy(&bits, &r.data()[i], 4);
    put_u32_le(buf, bits);
  }

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw unwritable_path("cannot open for writing: " + path);
  const size_t n = std::fwrite(buf.data(), 1, buf.size(), f);
  std::fclose(f);
  if (n != buf.size()) throw unwritable_path("write failed: " + path);
}

Raster read_fmap(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw file_not_found("no such file: " + path);
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> guard(f, &std::fclose);

  unsigned char header[kFmapHeaderBytes];
  if (std::fread(header, 1, sizeof(header), f) != sizeof(header))
    throw corrupt_data(path + ": truncated FMAP header");
  if (std::memcmp(header, kMagic, 4) != 0) throw corrupt_data(path + ": bad FMAP magic");
  if (get_u32_le(header + 4) != kVersion)
    throw corrupt_data(path + ": unsupported FMAP version (endianness canary failed)");

  const std::uint32_t h = get_u32_le(header + 8);
  const std::uint32_t w = get_u32_le(header + 12);
  const std::uint32_t c = get_u32_le(header + 16);
  if (h < 1 || w < 1 || c < 1 || h > (1u << 20) || w > (1u << 20) || c > 16)
    throw corrupt_data(path + ": implausible FMAP dimensions");

  Raster r(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  std::vector<unsigned char> payload(r.size() * 4);
  if (std::fread(payload.data(), 1, payload.size(), f) != payload.size())
    throw corrupt_data(path + ": truncated FMAP payload");
  if (std::fgetc(f) != EOF) throw corrupt_data(path + ": trailing bytes after FMAP payload");
  for (size_t i = 0; i < r.size(); ++i) {
    const std::uint32_t bits = get_u32_le(payload.data() + i * 4);
    std::memcpy(&r.data()[i], &bits, 4);
  }
  return r;
}

}  // namespace fdz
