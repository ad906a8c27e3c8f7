#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fdz/metrics.hpp"

#include <cmath>
#include <random>

using namespace fdz;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(0.f, 1.f);
  Image img(h, w, c);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = d(rng);
  return img;
}

// Independent PSNR oracle: direct summation of the defining formula.
double psnr_oracle(const Image& a, const Image& b, double L) {
  double sse = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.size());
  return 10.0 * std::log10(L * L / mse);
}

// Independent SSIM oracle: per-window nested loops, no separable filtering,
// no shared code with the implementation.
double ssim_oracle(const Image& a, const Image& b, const SsimParams& p) {
  const Image ga = to_grayscale(a);
  const Image gb = to_grayscale(b);
  const int h = ga.height(), w = ga.width(), win = p.window, half = win / 2;

  std::vector<double> weights(static_cast<size_t>(win) * win);
  double wsum = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double dy = i - half, dx = j - half;
      weights[static_cast<size_t>(i) * win + j] =
          std::exp(-(dy * dy + dx * dx) / (2.0 * p.sigma * p.sigma));
      wsum += weights[static_cast<size_t>(i) * win + j];
    }
  for (double& v : weights) v /= wsum;

  const double c1 = (p.k1 * p.L) * (p.k1 * p.L);
  const double c2 = (p.k2 * p.L) * (p.k2 * p.L);
  double total = 0.0;
  long count = 0;
  for (int y = 0; y + win <= h; ++y)
    for (int x = 0; x + win <= w; ++x) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double wgt = weights[static_cast<size_t>(i) * win + j];
          const double va = ga.at(y + i, x + j);
          const double vb = gb.at(y + i, x + j);
          mx += wgt * va;
          my += wgt * vb;
          sxx += wgt * va * va;
          syy += wgt * vb * vb;
          sxy += wgt * va * vb;
        }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("psnr: identical, uniform offset, symmetry") {
  const Image a = random_image(16, 16, 3, 1);
  CHECK(!psnr(a, a).has_value());  // +inf sentinel

  // MSE = 0.01 -> 20 dB, up to the float representation of 0.6.
  Image half(10, 10, 1, 0.5f);
  Image six(10, 10, 1, 0.6f);
  auto db = psnr(half, six, 1.0);
  REQUIRE(db.has_value());
  CHECK(std::abs(*db - 20.0) <= 1e-5);

  const Image b = random_image(16, 16, 3, 2);
  CHECK(*psnr(a, b) == doctest::Approx(*psnr(b, a)).epsilon(1e-12));
}

TEST_CASE("psnr matches a direct-summation oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Image a = random_image(13, 19, 3, rng());
    const Image b = random_image(13, 19, 3, rng());
    auto db = psnr(a, b, 1.0);
    REQUIRE(db.has_value());
    CHECK(std::abs(*db - psnr_oracle(a, b, 1.0)) <= 1e-9);
  }
}

TEST_CASE("psnr decreases as uniform noise grows") {
  const Image base = random_image(20, 20, 3, 4);
  double prev = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> noise(-1.f, 1.f);
  for (float amp : {0.01f, 0.03f, 0.1f, 0.3f}) {
    Image noisy = base;
    std::mt19937_64 r2(9);  // same noise pattern, scaled
    for (size_t i = 0; i < noisy.size(); ++i) {
      float v = base.data()[i] + amp * noise(r2);
      noisy.data()[i] = std::clamp(v, 0.f, 1.f);
    }
    auto db = psnr(base, noisy);
    REQUIRE(db.has_value());
    CHECK(*db < prev);
    prev = *db;
  }
}

TEST_CASE("ssim: self-similarity is exactly 1") {
  const Image a = random_image(24, 18, 3, 6);
  CHECK(ssim(a, a) == 1.0);
  const Image g = random_image(11, 11, 1, 7);
  CHECK(ssim(g, g) == 1.0);
}

TEST_CASE("ssim: constant images via direct formula") {
  // mu_a = 0.5, mu_b = 0.25, zero variance:
  // (2*0.125 + 1e-4) / (0.3125 + 1e-4) = 0.8000639795...
  Image a(16, 16, 1, 0.5f);
  Image b(16, 16, 1, 0.25f);
  CHECK(ssim(a, b) == doctest::Approx(0.8000639795265515).epsilon(1e-9));
}

TEST_CASE("ssim matches the naive sliding-window oracle") {
  std::mt19937_64 rng(8);
  SsimParams p;
  for (int trial = 0; trial < 10; ++trial) {
    const Image a = random_image(15, 21, 3, rng());
    const Image b = random_image(15, 21, 3, rng());
    CHECK(std::abs(ssim(a, b, p) - ssim_oracle(a, b, p)) <= 1e-6);
  }
}

TEST_CASE("ssim: symmetry and range") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Image a = random_image(14, 14, 3, rng());
    const Image b = random_image(14, 14, 3, rng());
    const double s1 = ssim(a, b), s2 = ssim(b, a);
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
    // Independent random pairs can anticorrelate within windows, so the full
    // [-1,1] range is reachable even for nonnegative images.
    CHECK(s1 >= -1.0);
    CHECK(s1 <= 1.0);
  }
}

TEST_CASE("ssim is positive for correlated (noisy-copy) pairs") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<float> noise(-0.1f, 0.1f);
  const Image a = random_image(20, 20, 3, 42);
  Image b = a;
  for (size_t i = 0; i < b.size(); ++i)
    b.data()[i] = std::clamp(b.data()[i] + noise(rng), 0.f, 1.f);
  const double s = ssim(a, b);
  CHECK(s > 0.0);
  CHECK(s <= 1.0);
}

TEST_CASE("ssim rejects undersized images") {
  const Image tiny = random_image(8, 8, 1, 10);
  CHECK_THROWS_AS(ssim(tiny, tiny), std::invalid_argument);
}

TEST_CASE("evaluate_pairs: aggregation") {
  const Image a = random_image(16, 16, 3, 11);
  const Image b = random_image(16, 16, 3, 12);

  QualityReport rep = evaluate_pairs({{a, a}});
  CHECK(rep.ssim_mean == 1.0);
  CHECK(rep.psnr_inf_count == 1);
  CHECK(rep.per_image.size() == 1);

  rep = evaluate_pairs({{a, b}, {a, b}});
  const double single = *psnr(a, b);
  CHECK(rep.psnr_mean == doctest::Approx(single).epsilon(1e-12));
  CHECK(rep.psnr_inf_count == 0);
  CHECK(rep.ssim_mean == doctest::Approx(ssim(a, b)).epsilon(1e-12));

  CHECK_THROWS_AS(evaluate_pairs({}), std::invalid_argument);
}

TEST_CASE("evaluate_pairs serialization carries the inf sentinel as text") {
  const Image a = random_image(16, 16, 3, 13);
  QualityReport rep = evaluate_pairs({{a, a}});
  const std::string records = rep.to_records();
  CHECK(records.find("psnr_db=inf") != std::string::npos);
  CHECK(records.find("ssim=1") != std::string::npos);
  const std::string text = rep.to_text();
  CHECK(text.find("psnr_inf_count: 1") != std::string::npos);
}
