#pragma once

#include "fdz/image.hpp"
#include "fdz/image_io.hpp"

#include <string>

namespace fdz {

// FMAP: little-endian float raster container for depth and transmission maps.
// Layout: magic "FMAP", u32 version (1), u32 height, u32 width, u32 channels,
// then height*width*channels IEEE-754 32-bit floats, planes row-major.
// All integers and floats little-endian. The version field doubles as an
// endianness canary: a reader that does not see exactly 1 must reject the
// file. Write/read round-trips are bit-exact.
void write_fmap(const Raster& r, const std::string& path);
Raster read_fmap(const std::string& path);

inline constexpr int kFmapHeaderBytes = 20;  // 4 magic + 4 version + 3*4 dims

}  // namespace fdz
