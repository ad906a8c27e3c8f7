#include "fdz/metrics.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fdz {

void SsimParams::validate() const {
  if (window < 3 || window % 2 == 0)
    throw std::invalid_argument("SsimParams: window must be odd and >= 3");
  if (!(sigma > 0)) throw std::invalid_argument("SsimParams: sigma must be > 0");
  if (!(k1 > 0) || !(k2 > 0)) throw std::invalid_argument("SsimParams: k1, k2 must be > 0");
  if (!(L > 0)) throw std::invalid_argument("SsimParams: L must be > 0");
}

std::optional<double> psnr(const Image& a, const Image& b, double L) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
  if (!(L > 0)) throw std::invalid_argument("psnr: L must be > 0");
  double sse = 0.0;
  const float* pa = a.data();
  const float* pb = b.data();
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::nullopt;
  const double mse = sse / static_cast<double>(a.size());
  return 10.0 * std::log10(L * L / mse);
}

namespace {

std::vector<double> gaussian_kernel(int window, double sigma) {
  std::vector<double> k(window);
  const int half = window / 2;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    const double d = i - half;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable valid-mode correlation of a (possibly elementwise-combined)
// source with the 1-D Gaussian, horizontal then vertical.
struct ValidFilter {
  int h, w, window;
  const std::vector<double>& kernel;
  int oh() const { return h - window + 1; }
  int ow() const { return w - window + 1; }

  std::vector<double> apply(const std::vector<double>& src) const {
    std::vector<double> tmp(static_cast<size_t>(h) * ow());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow(); ++x) {
        double s = 0.0;
        for (int k = 0; k < window; ++k) s += kernel[k] * src[y * w + x + k];
        tmp[y * ow() + x] = s;
      }
    std::vector<double> out(static_cast<size_t>(oh()) * ow());
    for (int y = 0; y < oh(); ++y)
      for (int x = 0; x < ow(); ++x) {
        double s = 0.0;
        for (int k = 0; k < window; ++k) s += kernel[k] * tmp[(y + k) * ow() + x];
        out[y * ow() + x] = s;
      }
    return out;
  }
};

}  // namespace

double ssim(const Image& a, const Image& b, const SsimParams& p) {
  p.validate();
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  if (a.height() < p.window || a.width() < p.window)
    throw std::invalid_argument("ssim: image smaller than the window");

  const Image ga = to_grayscale(a);
  const Image gb = to_grayscale(b);
  const int h = ga.height(), w = ga.width();
  const size_t n = static_cast<size_t>(h) * w;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (size_t i = 0; i < n; ++i) {
    x[i] = ga.data()[i];
    y[i] = gb.data()[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }

  const auto kernel = gaussian_kernel(p.window, p.sigma);
  const ValidFilter f{h, w, p.window, kernel};
  const auto mu_x = f.apply(x);
  const auto mu_y = f.apply(y);
  const auto s_xx = f.apply(xx);
  const auto s_yy = f.apply(yy);
  const auto s_xy = f.apply(xy);

  const double c1 = (p.k1 * p.L) * (p.k1 * p.L);
  const double c2 = (p.k2 * p.L) * (p.k2 * p.L);
  double total = 0.0;
  for (size_t i = 0; i < mu_x.size(); ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double vx = s_xx[i] - mx * mx;
    const double vy = s_yy[i] - my * my;
    const double cxy = s_xy[i] - mx * my;
    const double num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
    const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_x.size());
}

QualityReport evaluate_pairs(const std::vector<std::pair<Image, Image>>& pairs,
                             const SsimParams& p) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_pairs: empty list");
  QualityReport rep;
  rep.per_image.reserve(pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    PairQuality q;
    q.name = "pair" + std::to_string(i);
    q.psnr_db = psnr(pairs[i].first, pairs[i].second, p.L);
    q.ssim = ssim(pairs[i].first, pairs[i].second, p);
    rep.per_image.push_back(std::move(q));
  }

  double psum = 0.0, ssum = 0.0;
  int pn = 0;
  for (const auto& q : rep.per_image) {
    if (q.psnr_db) {
      psum += *q.psnr_db;
      ++pn;
    } else {
      ++rep.psnr_inf_count;
    }
    ssum += q.ssim;
  }
  rep.psnr_mean = pn ? psum / pn : 0.0;
  rep.ssim_mean = ssum / static_cast<double>(rep.per_image.size());

  double pvar = 0.0, svar = 0.0;
  for (const auto& q : rep.per_image) {
    if (q.psnr_db) pvar += (*q.psnr_db - rep.psnr_mean) * (*q.psnr_db - rep.psnr_mean);
    svar += (q.ssim - rep.ssim_mean) * (q.ssim - rep.ssim_mean);
  }
  rep.psnr_std = pn ? std::sqrt(pvar / pn) : 0.0;
  rep.ssim_std = std::sqrt(svar / static_cast<double>(rep.per_image.size()));
  return rep;
}

std::string QualityReport::to_records() const {
  std::ostringstream os;
  for (const auto& q : per_image) {
    os << "image=" << q.name << "\tpsnr_db=";
    if (q.psnr_db)
      os << *q.psnr_db;
    else
      os << "inf";
    os << "\tssim=" << q.ssim << "\n";
  }
  os << "summary\tpsnr_mean=" << psnr_mean << "\tpsnr_std=" << psnr_std
     << "\tpsnr_inf_count=" << psnr_inf_count << "\tssim_mean=" << ssim_mean
     << "\tssim_std=" << ssim_std << "\tcount=" << per_image.size() << "\n";
  return os.str();
}

std::string QualityReport::to_text() const {
  std::ostringstream os;
  os << "images:         " << per_image.size() << "\n"
     << "psnr_mean_db:   " << psnr_mean << (psnr_inf_count ? "  (excluding identical pairs)" : "")
     << "\n"
     << "psnr_std_db:    " << psnr_std << "\n"
     << "psnr_inf_count: " << psnr_inf_count << "\n"
     << "ssim_mean:      " << ssim_mean << "\n"
     << "ssim_std:       " << ssim_std << "\n";
  return os.str();
}

}  // namespace fdz
