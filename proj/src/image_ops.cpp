#include "fdz/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fdz {

void PatchSpec::validate() const {
  if (patch_size < 8) throw std::invalid_argument("PatchSpec: patch_size must be >= 8");
  if (stride < 1) throw std::invalid_argument("PatchSpec: stride must be >= 1");
  if (scales.empty()) throw std::invalid_argument("PatchSpec: scales must be nonempty");
  for (float s : scales)
    if (!(s > 0.f && s <= 1.f)) throw std::invalid_argument("PatchSpec: scales must be in (0,1]");
}

namespace {

void resize_plane(const float* src, int h, int w, float* dst, int oh, int ow) {
  const double sy_ratio = static_cast<double>(h) / oh;
  const double sx_ratio = static_cast<double>(w) / ow;
  for (int oy = 0; oy < oh; ++oy) {
    const double sy = (oy + 0.5) * sy_ratio - 0.5;
    int y0 = static_cast<int>(std::floor(sy));
    const double wy = sy - y0;
    int y1 = std::min(y0 + 1, h - 1);
    y0 = std::clamp(y0, 0, h - 1);
    for (int ox = 0; ox < ow; ++ox) {
      const double sx = (ox + 0.5) * sx_ratio - 0.5;
      int x0 = static_cast<int>(std::floor(sx));
      const double wx = sx - x0;
      int x1 = std::min(x0 + 1, w - 1);
      x0 = std::clamp(x0, 0, w - 1);
      const double v = (1 - wy) * ((1 - wx) * src[y0 * w + x0] + wx * src[y0 * w + x1]) +
                       wy * ((1 - wx) * src[y1 * w + x0] + wx * src[y1 * w + x1]);
      dst[oy * ow + ox] = static_cast<float>(v);
    }
  }
}

}  // namespace

Raster resize_bilinear(const Raster& r, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: output dims must be >= 1");
  Raster out(out_h, out_w, r.channels());
  for (int c = 0; c < r.channels(); ++c)
    resize_plane(r.data() + static_cast<size_t>(c) * r.height() * r.width(), r.height(), r.width(),
                 out.data() + static_cast<size_t>(c) * out_h * out_w, out_h, out_w);
  return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  return Image::from_raster_clamped(resize_bilinear(img.raster(), out_h, out_w));
}

std::vector<Image> extract_patches(const Image& img, const PatchSpec& spec) {
  spec.validate();
  std::vector<Image> patches;
  bool any_scale_fits = false;
  for (float s : spec.scales) {
    const int hs = static_cast<int>(std::floor(s * img.height()));
    const int ws = static_cast<int>(std::floor(s * img.width()));
    if (hs < spec.patch_size || ws < spec.patch_size) continue;
    any_scale_fits = true;
    const Image scaled =
        (hs == img.height() && ws == img.width()) ? img : resize_bilinear(img, hs, ws);
    for (int y = 0; y + spec.patch_size <= hs; y += spec.stride)
      for (int x = 0; x + spec.patch_size <= ws; x += spec.stride)
        patches.push_back(crop(scaled, y, x, spec.patch_size, spec.patch_size));
  }
  if (!any_scale_fits)
    throw patch_error("extract_patches: no scale admits a " + std::to_string(spec.patch_size) +
                      "-pixel patch");
  return patches;
}

Image rotate_quarter(const Image& img, Rotation r) {
  const int h = img.height(), w = img.width(), c = img.channels();
  switch (r) {
    case Rotation::deg0:
      return img;
    case Rotation::deg90: {
      Image out(w, h, c);
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) out.at(w - 1 - x, y, ch) = img.at(y, x, ch);
      return out;
    }
    case Rotation::deg180: {
      Image out(h, w, c);
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) out.at(h - 1 - y, w - 1 - x, ch) = img.at(y, x, ch);
      return out;
    }
    case Rotation::deg270: {
      Image out(w, h, c);
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) out.at(x, h - 1 - y, ch) = img.at(y, x, ch);
      return out;
    }
  }
  throw std::invalid_argument("rotate_quarter: bad rotation");
}

std::pair<Image, Image> augment_pair(const Image& a, const Image& b, const AugmentSpec& spec) {
  if (!a.same_shape(b)) throw std::invalid_argument("augment_pair: images differ in shape");
  const int crop_size = spec.crop_size == 0 ? std::min(a.height(), a.width()) : spec.crop_size;
  if (crop_size > std::min(a.height(), a.width()))
    throw std::invalid_argument("augment_pair: crop_size exceeds source dimensions");
  if (spec.rotations.empty()) throw std::invalid_argument("augment_pair: empty rotation set");

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> dy(0, a.height() - crop_size);
  std::uniform_int_distribution<int> dx(0, a.width() - crop_size);
  const int y0 = dy(rng);
  const int x0 = dx(rng);
  std::vector<Rotation> rots(spec.rotations.begin(), spec.rotations.end());
  std::uniform_int_distribution<size_t> dr(0, rots.size() - 1);
  const Rotation rot = rots[dr(rng)];

  Image ca = crop(a, y0, x0, crop_size, crop_size);
  Image cb = crop(b, y0, x0, crop_size, crop_size);
  return {rotate_quarter(ca, rot), rotate_quarter(cb, rot)};
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.height() || x0 + w > img.width())
    throw std::invalid_argument("crop: window out of bounds");
  Image out(h, w, img.channels());
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
  return out;
}

Image pad_reflect(const Image& img, int top, int bottom, int left, int right) {
  const int h = img.height(), w = img.width();
  if (top < 0 || bottom < 0 || left < 0 || right < 0)
    throw std::invalid_argument("pad_reflect: negative padding");
  Image out(h + top + bottom, w + left + right, img.channels());
  // Periodic reflection without edge repetition (period 2n-2).
  auto reflect = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
  };
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x)
        out.at(y, x, c) = img.at(reflect(y - top, h), reflect(x - left, w), c);
  return out;
}

}  // namespace fdz
