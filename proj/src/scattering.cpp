#include "fdz/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fdz {

TransmissionMap::TransmissionMap(Raster r) : r_(std::move(r)) {
  if (r_.channels() != 1) throw std::invalid_argument("TransmissionMap: expected 1 channel");
  for (size_t i = 0; i < r_.size(); ++i) {
    float v = r_.data()[i];
    if (!std::isfinite(v) || v <= 0.f || v > 1.f)
      throw std::invalid_argument("TransmissionMap: values must lie in (0,1]");
  }
}

DepthMap::DepthMap(Raster r) : r_(std::move(r)) {
  if (r_.channels() != 1) throw std::invalid_argument("DepthMap: expected 1 channel");
  for (size_t i = 0; i < r_.size(); ++i) {
    float v = r_.data()[i];
    if (!std::isfinite(v) || v < 0.f)
      throw std::invalid_argument("DepthMap: values must be finite and >= 0");
  }
}

AtmosphericLight::AtmosphericLight(Image map) {
  if (map.channels() != 3)
    throw std::invalid_argument("AtmosphericLight: per-pixel light must have 3 channels");
  if (!map.valid()) throw std::invalid_argument("AtmosphericLight: values must lie in [0,1]");
  map_ = std::move(map);
}

void AtmosphericLight::check_scalar() const {
  for (float v : rgb_)
    if (!std::isfinite(v) || v < 0.f || v > 1.f)
      throw std::invalid_argument("AtmosphericLight: values must lie in [0,1]");
}

namespace {

void require_pixel_match(const Image& I, const TransmissionMap& t, const AtmosphericLight& A,
                         const char* op) {
  if (I.height() != t.height() || I.width() != t.width())
    throw std::invalid_argument(std::string(op) + ": transmission map shape mismatch");
  if (!A.is_scalar() &&
      (A.map().height() != I.height() || A.map().width() != I.width() || I.channels() != 3))
    throw std::invalid_argument(std::string(op) + ": atmospheric light shape mismatch");
}

}  // namespace

TransmissionMap transmission_from_depth(const DepthMap& d, float beta) {
  if (!(beta > 0.f)) throw std::invalid_argument("transmission_from_depth: beta must be > 0");
  TransmissionMap t(d.height(), d.width());
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x)
      t.at(y, x) = std::max(
          static_cast<float>(std::exp(-static_cast<double>(beta) * d.at(y, x))), kSynthesisTMin);
  return t;
}

Image synthesize_haze(const Image& J, const TransmissionMap& t, const AtmosphericLight& A) {
  require_pixel_match(J, t, A, "synthesize_haze");
  Image I(J.height(), J.width(), J.channels());
  for (int c = 0; c < J.channels(); ++c)
    for (int y = 0; y < J.height(); ++y)
      for (int x = 0; x < J.width(); ++x) {
        const double tv = t.at(y, x);
        I.at(y, x, c) = static_cast<float>(J.at(y, x, c) * tv + A.at(y, x, c) * (1.0 - tv));
      }
  return I;
}

Raster recover_scene_linear(const Image& I, const TransmissionMap& t, const AtmosphericLight& A,
                            float t_min) {
  if (!(t_min > 0.f)) throw std::invalid_argument("recover_scene: t_min must be > 0");
  require_pixel_match(I, t, A, "recover_scene");
  Raster J(I.height(), I.width(), I.channels());
  for (int c = 0; c < I.channels(); ++c)
    for (int y = 0; y < I.height(); ++y)
      for (int x = 0; x < I.width(); ++x) {
        const double tp = std::max(t.at(y, x), t_min);
        const double a = A.at(y, x, c);
        J.at(y, x, c) = static_cast<float>((I.at(y, x, c) - a * (1.0 - tp)) / tp);
      }
  return J;
}

Image recover_scene(const Image& I, const TransmissionMap& t, const AtmosphericLight& A,
                    float t_min) {
  return Image::from_raster_clamped(recover_scene_linear(I, t, A, t_min));
}

Raster k_transform(const Image& I, const TransmissionMap& t, const AtmosphericLight& A, float b) {
  require_pixel_match(I, t, A, "k_transform");
  Raster K(I.height(), I.width(), I.channels());
  for (int c = 0; c < I.channels(); ++c)
    for (int y = 0; y < I.height(); ++y)
      for (int x = 0; x < I.width(); ++x) {
        const double iv = std::min(static_cast<double>(I.at(y, x, c)), 1.0 - kKPoleGuard);
        const double a = A.at(y, x, c);
        const double tv = t.at(y, x);
        K.at(y, x, c) = static_cast<float>(((iv - a) / tv + (a - b)) / (iv - 1.0));
      }
  return K;
}

Raster apply_k_linear(const Raster& K, const Image& I, float b) {
  if (K.height() != I.height() || K.width() != I.width() || K.channels() != I.channels())
    throw std::invalid_argument("apply_k: shape mismatch");
  Raster J(I.height(), I.width(), I.channels());
  for (int c = 0; c < I.channels(); ++c)
    for (int y = 0; y < I.height(); ++y)
      for (int x = 0; x < I.width(); ++x) {
        const double k = K.at(y, x, c);
        const double iv = I.at(y, x, c);
        J.at(y, x, c) = static_cast<float>(k * iv - k + b);
      }
  return J;
}

Image apply_k(const Raster& K, const Image& I, float b) {
  return Image::from_raster_clamped(apply_k_linear(K, I, b));
}

}  // namespace fdz
