#pragma once

#include "fdz/image.hpp"

#include <cstdint>
#include <set>
#include <vector>

namespace fdz {

// Multi-scale patch extraction: the source is rescaled by each factor, then
// tiled into square patches.
struct PatchSpec {
  int patch_size = 64;            // square tile side, >= 8
  int stride = 64;                // >= 1
  std::vector<float> scales{1.f};  // each in (0,1]

  void validate() const;
};

enum class Rotation : int { deg0 = 0, deg90 = 90, deg180 = 180, deg270 = 270 };

// Random crop + quarter-turn rotation, applied identically to a pair.
struct AugmentSpec {
  int crop_size = 0;  // 0 means full size
  std::set<Rotation> rotations{Rotation::deg0};
  std::uint64_t seed = 0;
};

// Bilinear resampling with the half-pixel (align-corners = false) convention:
// source coordinate s = (d + 0.5) * (in_size / out_size) - 0.5, neighbors
// clamped to the source bounds. Constants are preserved exactly; outputs stay
// in [0,1].
Image resize_bilinear(const Image& img, int out_h, int out_w);
Raster resize_bilinear(const Raster& r, int out_h, int out_w);

// For each scale factor s: rescale the source to (floor(s*H), floor(s*W)),
// then tile with the given stride. Patch order is scale-major, then row-major
// within a scale. Throws patch_error when no scale admits a single tile.
struct patch_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
std::vector<Image> extract_patches(const Image& img, const PatchSpec& spec);

// Closed-form tile count for one plane of the given size.
inline long tile_count(int h, int w, int patch, int stride) {
  if (h < patch || w < patch) return 0;
  return (static_cast<long>(h - patch) / stride + 1) * ((w - patch) / stride + 1);
}

// Exact quarter-turn rotation (counterclockwise).
Image rotate_quarter(const Image& img, Rotation r);

// Applies one seeded crop window and rotation to both images of a pair.
// Deterministic for a fixed spec. Throws std::invalid_argument on dimension
// mismatch or crop_size larger than the source.
std::pair<Image, Image> augment_pair(const Image& a, const Image& b, const AugmentSpec& spec);

// Reflective border padding (edge row/column not repeated), used to bring
// arbitrary sizes up to network-friendly multiples.
Image pad_reflect(const Image& img, int top, int bottom, int left, int right);
Image crop(const Image& img, int y0, int x0, int h, int w);

}  // namespace fdz
