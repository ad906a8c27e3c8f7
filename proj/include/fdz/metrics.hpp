#pragma once

#include "fdz/image.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fdz {

// Gaussian-window SSIM configuration. The window must be odd; moments are
// taken only over fully interior window positions (no padding). Multichannel
// images are reduced to grayscale by the channel mean before comparison.
struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double L = 1.0;

  void validate() const;
};

// PSNR in decibels: 10*log10(L^2 / MSE) over all pixels and channels.
// Identical images have zero error; that case is reported as an empty
// optional rather than a floating-point infinity.
std::optional<double> psnr(const Image& a, const Image& b, double L = 1.0);

// Mean SSIM over all valid window positions.
double ssim(const Image& a, const Image& b, const SsimParams& p = {});

struct PairQuality {
  std::string name;
  std::optional<double> psnr_db;  // empty = identical images
  double ssim = 0.0;
};

struct QualityReport {
  std::vector<PairQuality> per_image;
  double psnr_mean = 0.0;  // over finite entries only
  double psnr_std = 0.0;
  int psnr_inf_count = 0;
  double ssim_mean = 0.0;
  double ssim_std = 0.0;

  // One key=value record per image followed by summary keys.
  std::string to_records() const;
  // Human-readable key: value block.
  std::string to_text() const;
};

// Per-pair PSNR/SSIM plus arithmetic means; infinite PSNR entries are
// excluded from the mean and counted separately.
QualityReport evaluate_pairs(const std::vector<std::pair<Image, Image>>& pairs,
                             const SsimParams& p = {});

}  // namespace fdz
