#include "fdz/image.hpp"

#include <algorithm>
#include <cmath>

namespace fdz {

bool Image::valid() const {
  const float* p = data();
  for (size_t i = 0; i < size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.f || p[i] > 1.f) return false;
  }
  return true;
}

Image Image::from_raster_clamped(const Raster& r) {
  if (r.channels() != 1 && r.channels() != 3)
    throw std::invalid_argument("Image: channels must be 1 or 3");
  Image out(r.height(), r.width(), r.channels());
  const float* src = r.data();
  float* dst = out.data();
  for (size_t i = 0; i < r.size(); ++i) {
    float v = src[i];
    if (!std::isfinite(v)) throw std::invalid_argument("Image: non-finite value");
    dst[i] = std::clamp(v, 0.f, 1.f);
  }
  return out;
}

Image to_grayscale(const Image& img) {
  if (img.channels() == 1) return img;
  Image out(img.height(), img.width(), 1);
  out.plane(0) = (img.plane(0) + img.plane(1) + img.plane(2)) / 3.f;
  return out;
}

}  // namespace fdz
