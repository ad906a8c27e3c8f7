#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fdz {

// Row-major H x W plane views over contiguous storage.
template <typename Scalar>
using PlaneMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename Scalar>
using ConstPlaneMap =
    Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// A float raster of arbitrary range: h x w x c, stored planar (channel-first),
// each plane row-major. Carrier for depth maps, transmission maps, K maps and
// the FMAP file payload.
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, int channels, float fill = 0.f)
      : h_(height), w_(width), c_(channels) {
    if (height < 1 || width < 1 || channels < 1)
      throw std::invalid_argument("Raster: dimensions must be >= 1");
    data_.assign(static_cast<size_t>(h_) * w_ * c_, fill);
  }

  int height() const { return h_; }
  int width() const { return w_; }
  int channels() const { return c_; }
  size_t size() const { return data_.size(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& at(int y, int x, int c = 0) { return data_[idx(y, x, c)]; }
  float at(int y, int x, int c = 0) const { return data_[idx(y, x, c)]; }

  PlaneMap<float> plane(int c) {
    return PlaneMap<float>(data_.data() + static_cast<size_t>(c) * h_ * w_, h_, w_);
  }
  ConstPlaneMap<float> plane(int c) const {
    return ConstPlaneMap<float>(data_.data() + static_cast<size_t>(c) * h_ * w_, h_, w_);
  }

  bool same_shape(const Raster& o) const {
    return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

 private:
  size_t idx(int y, int x, int c) const {
    return (static_cast<size_t>(c) * h_ + y) * w_ + x;
  }
  int h_ = 0, w_ = 0, c_ = 0;
  std::vector<float> data_;
};

// An image: normalized intensities in [0,1], 1 or 3 channels.
// Storage is channel-first (planar), each plane row-major; pixel (y,x) of
// channel c lives at data[(c*H + y)*W + x].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.f) : r_(height, width, channels, fill) {
    if (channels != 1 && channels != 3)
      throw std::invalid_argument("Image: channels must be 1 or 3");
  }

  int height() const { return r_.height(); }
  int width() const { return r_.width(); }
  int channels() const { return r_.channels(); }
  size_t size() const { return r_.size(); }

  float* data() { return r_.data(); }
  const float* data() const { return r_.data(); }

  float& at(int y, int x, int c = 0) { return r_.at(y, x, c); }
  float at(int y, int x, int c = 0) const { return r_.at(y, x, c); }

  PlaneMap<float> plane(int c) { return r_.plane(c); }
  ConstPlaneMap<float> plane(int c) const { return r_.plane(c); }

  bool same_shape(const Image& o) const { return r_.same_shape(o.r_); }

  Raster& raster() { return r_; }
  const Raster& raster() const { return r_; }

  // True when every element is finite and in [0,1].
  bool valid() const;

  // Elementwise clamp into [0,1]; non-finite values are rejected.
  static Image from_raster_clamped(const Raster& r);

 private:
  Image(Raster r) : r_(std::move(r)) {}
  Raster r_;
};

// Channel-mean grayscale; identity for single-channel images.
Image to_grayscale(const Image& img);

}  // namespace fdz
