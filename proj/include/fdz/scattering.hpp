#pragma once

#include "fdz/image.hpp"

#include <array>
#include <optional>

namespace fdz {

// Per-pixel fraction of scene radiance reaching the camera: 1 = clear,
// values near 0 = opaque haze. Always in (0,1].
class TransmissionMap {
 public:
  TransmissionMap() = default;
  TransmissionMap(int height, int width, float fill = 1.f) : r_(height, width, 1, fill) {}
  explicit TransmissionMap(Raster r);

  int height() const { return r_.height(); }
  int width() const { return r_.width(); }
  float& at(int y, int x) { return r_.at(y, x); }
  float at(int y, int x) const { return r_.at(y, x); }
  const Raster& raster() const { return r_; }
  Raster& raster() { return r_; }

 private:
  Raster r_;
};

// Per-pixel scene distance in arbitrary consistent units, >= 0.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int height, int width, float fill = 0.f) : r_(height, width, 1, fill) {}
  explicit DepthMap(Raster r);

  int height() const { return r_.height(); }
  int width() const { return r_.width(); }
  float& at(int y, int x) { return r_.at(y, x); }
  float at(int y, int x) const { return r_.at(y, x); }
  const Raster& raster() const { return r_; }

 private:
  Raster r_;
};

// Scattered ambient illumination: either one RGB triple shared by every pixel
// or a full per-pixel 3-channel map. All values in [0,1]. When a scalar light
// is applied to a grayscale image, the first component is used.
class AtmosphericLight {
 public:
  AtmosphericLight() : rgb_{{1.f, 1.f, 1.f}} {}
  explicit AtmosphericLight(float gray) : rgb_{{gray, gray, gray}} { check_scalar(); }
  explicit AtmosphericLight(std::array<float, 3> rgb) : rgb_(rgb) { check_scalar(); }
  explicit AtmosphericLight(Image map);

  bool is_scalar() const { return !map_.has_value(); }
  const std::array<float, 3>& rgb() const { return rgb_; }
  const Image& map() const { return *map_; }

  // Value at (y, x) for the given image channel.
  float at(int y, int x, int channel) const {
    return map_ ? map_->at(y, x, channel) : rgb_[static_cast<size_t>(channel)];
  }

 private:
  void check_scalar() const;
  std::array<float, 3> rgb_{};
  std::optional<Image> map_;
};

// Synthesis parameters: scattering coefficient per unit depth, the light, and
// the bias of the single-variable reformulation.
struct ScatterParams {
  float beta = 1.5f;  // > 0
  AtmosphericLight A;
  float b = 0.f;
};

inline constexpr float kSynthesisTMin = 1e-4f;   // floor applied when deriving t from depth
inline constexpr float kRecoveryTMin = 0.05f;    // default divisor floor for recovery
inline constexpr float kKPoleGuard = 1e-6f;      // keeps the K denominator away from I = 1

// t = exp(-beta * d), floored at 1e-4 so the result stays in (0,1].
// Antitone in both depth and beta.
TransmissionMap transmission_from_depth(const DepthMap& d, float beta);

// I = J*t + A*(1-t). A convex combination, so the result is a valid image
// whenever J is. t is broadcast across channels; a scalar light is broadcast
// across pixels.
Image synthesize_haze(const Image& J, const TransmissionMap& t, const AtmosphericLight& A);

// J = (I - A*(1-t')) / t' with t' = max(t, t_min). The Image overload clamps
// into [0,1]; the linear overload returns the raw quotient for algebraic
// checks against the single-variable route.
Image recover_scene(const Image& I, const TransmissionMap& t, const AtmosphericLight& A,
                    float t_min = kRecoveryTMin);
Raster recover_scene_linear(const Image& I, const TransmissionMap& t, const AtmosphericLight& A,
                            float t_min = kRecoveryTMin);

// K = ((1/t)(I - A) + (A - b)) / (I - 1), with I replaced by min(I, 1 - 1e-6)
// to guard the pole at saturated pixels. One K value per pixel and channel.
Raster k_transform(const Image& I, const TransmissionMap& t, const AtmosphericLight& A, float b);

// J = K*I - K + b. The Image overload clamps into [0,1].
Image apply_k(const Raster& K, const Image& I, float b);
Raster apply_k_linear(const Raster& K, const Image& I, float b);

}  // namespace fdz
