#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fdz/scattering.hpp"

#include <cmath>
#include <random>

using namespace fdz;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed, float lo = 0.f, float hi = 1.f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(lo, hi);
  Image img(h, w, c);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = d(rng);
  return img;
}

TransmissionMap random_t(int h, int w, std::uint64_t seed, float lo, float hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(lo, hi);
  TransmissionMap t(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) t.at(y, x) = d(rng);
  return t;
}

}  // namespace

TEST_CASE("transmission_from_depth: exponential law with floor") {
  DepthMap d(2, 2, 0.f);
  d.at(0, 1) = 1.f;
  d.at(1, 0) = 1e6f;
  TransmissionMap t = transmission_from_depth(d, 1.4f);
  CHECK(t.at(0, 0) == 1.0f);                                      // exp(0)
  CHECK(t.at(0, 1) == doctest::Approx(0.2465969639416065).epsilon(1e-6));  // exp(-1.4)
  CHECK(t.at(1, 0) == 1e-4f);                                     // clamp engaged

  CHECK_THROWS_AS(transmission_from_depth(d, 0.f), std::invalid_argument);
  CHECK_THROWS_AS(transmission_from_depth(d, -1.f), std::invalid_argument);
}

TEST_CASE("transmission_from_depth is antitone in depth and beta") {
  DepthMap d(1, 3);
  d.at(0, 0) = 0.2f;
  d.at(0, 1) = 0.5f;
  d.at(0, 2) = 1.1f;
  TransmissionMap t1 = transmission_from_depth(d, 1.4f);
  CHECK(t1.at(0, 0) > t1.at(0, 1));
  CHECK(t1.at(0, 1) > t1.at(0, 2));
  TransmissionMap t2 = transmission_from_depth(d, 1.6f);
  for (int x = 0; x < 3; ++x) CHECK(t2.at(0, x) < t1.at(0, x));
}

TEST_CASE("synthesize_haze: boundary cases and direct arithmetic") {
  const Image J = random_image(4, 4, 3, 1);

  TransmissionMap clear(4, 4, 1.f);
  Image I = synthesize_haze(J, clear, AtmosphericLight(0.7f));
  for (size_t i = 0; i < J.size(); ++i) CHECK(I.data()[i] == doctest::Approx(J.data()[i]));

  TransmissionMap opaque(4, 4, 1e-4f);
  I = synthesize_haze(J, opaque, AtmosphericLight(0.7f));
  for (size_t i = 0; i < J.size(); ++i) CHECK(I.data()[i] == doctest::Approx(0.7f).epsilon(1e-3));

  Image one(1, 1, 1, 0.8f);
  TransmissionMap half(1, 1, 0.5f);
  Image hazy = synthesize_haze(one, half, AtmosphericLight(0.5f));
  CHECK(hazy.at(0, 0) == doctest::Approx(0.65).epsilon(1e-7));
}

TEST_CASE("synthesize_haze stays within the convex hull of J and A") {
  const Image J = random_image(8, 8, 3, 2);
  const TransmissionMap t = random_t(8, 8, 3, 0.05f, 1.f);
  const AtmosphericLight A(std::array<float, 3>{0.6f, 0.7f, 0.8f});
  const Image I = synthesize_haze(J, t, A);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const float lo = std::min(J.at(y, x, c), A.rgb()[c]);
        const float hi = std::max(J.at(y, x, c), A.rgb()[c]);
        CHECK(I.at(y, x, c) >= lo - 1e-6f);
        CHECK(I.at(y, x, c) <= hi + 1e-6f);
      }
}

TEST_CASE("haze monotonicity in t") {
  // For J < A the hazy value decreases as t grows; for J > A it increases.
  Image low(1, 1, 1, 0.2f), high(1, 1, 1, 0.9f);
  const AtmosphericLight A(0.5f);
  float prev_low = -1.f, prev_high = 2.f;
  bool first = true;
  for (float tv : {0.1f, 0.3f, 0.5f, 0.7f, 0.9f}) {
    TransmissionMap t(1, 1, tv);
    const float vl = synthesize_haze(low, t, A).at(0, 0);
    const float vh = synthesize_haze(high, t, A).at(0, 0);
    if (!first) {
      CHECK(vl < prev_low);   // J < A: I decreasing in t
      CHECK(vh > prev_high);  // J > A: I increasing in t
    }
    prev_low = vl;
    prev_high = vh;
    first = false;
  }
}

TEST_CASE("recover_scene inverts the synthesis example") {
  Image I(1, 1, 1, 0.65f);
  TransmissionMap t(1, 1, 0.5f);
  Image J = recover_scene(I, t, AtmosphericLight(0.5f));
  CHECK(J.at(0, 0) == doctest::Approx(0.8).epsilon(1e-6));

  TransmissionMap clear(1, 1, 1.f);
  Image same = recover_scene(I, clear, AtmosphericLight(0.3f));
  CHECK(same.at(0, 0) == doctest::Approx(0.65f));
}

TEST_CASE("round trip: recover(synthesize(J)) = J over random draws") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Image J = random_image(6, 6, 3, rng());
    const TransmissionMap t = random_t(6, 6, rng(), 0.2f, 1.f);
    std::uniform_real_distribution<float> da(0.5f, 1.f);
    const AtmosphericLight A(da(rng));
    const Image I = synthesize_haze(J, t, A);
    const Image back = recover_scene(I, t, A);
    for (size_t i = 0; i < J.size(); ++i)
      CHECK(std::abs(back.data()[i] - J.data()[i]) <= 1e-5f);
  }
}

TEST_CASE("k_transform: direct scalar evaluation") {
  Image I(1, 1, 1, 0.65f);
  TransmissionMap t(1, 1, 0.5f);
  Raster K = k_transform(I, t, AtmosphericLight(0.5f), 0.f);
  // ((1/0.5)(0.65-0.5) + 0.5) / (0.65-1) = 0.8 / -0.35
  CHECK(K.at(0, 0) == doctest::Approx(-2.285714285714286).epsilon(1e-6));
}

TEST_CASE("k_transform: fully hazed pixel maps to the airlight") {
  // I = A and b = A: numerator is 0, so K = 0 and apply_k returns b.
  Image I(2, 2, 3, 0.6f);
  TransmissionMap t(2, 2, 0.4f);
  const float b = 0.6f;
  Raster K = k_transform(I, t, AtmosphericLight(0.6f), b);
  for (size_t i = 0; i < K.size(); ++i) CHECK(K.data()[i] == doctest::Approx(0.f).epsilon(1e-9));
  Image J = apply_k(K, I, b);
  for (size_t i = 0; i < J.size(); ++i) CHECK(J.data()[i] == doctest::Approx(b).epsilon(1e-6));
}

TEST_CASE("apply_k: boundary cases") {
  const Image I = random_image(3, 3, 3, 10);
  Raster zero(3, 3, 3, 0.f);
  Image J = apply_k(zero, I, 0.4f);
  for (size_t i = 0; i < J.size(); ++i) CHECK(J.data()[i] == doctest::Approx(0.4f));

  Raster ones(3, 3, 3, 1.f);
  J = apply_k(ones, I, 0.f);  // K(I-1) <= 0, clamps to 0
  for (size_t i = 0; i < J.size(); ++i) CHECK(J.data()[i] == 0.f);
}

TEST_CASE("K-equivalence: apply_k(k_transform) matches unclamped recovery") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Image I = random_image(6, 6, 3, rng(), 0.f, 0.999f);  // keep I <= 1 - 1e-3
    const TransmissionMap t = random_t(6, 6, rng(), 0.2f, 1.f);
    std::uniform_real_distribution<float> da(0.5f, 1.f);
    const AtmosphericLight A(da(rng));
    const float b = 0.f;
    const Raster K = k_transform(I, t, A, b);
    const Raster via_k = apply_k_linear(K, I, b);
    // Independent unclamped route, evaluated directly in double.
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) {
          const double tp = std::max(t.at(y, x), 1e-6f);
          const double expect = (I.at(y, x, c) - A.rgb()[c] * (1.0 - tp)) / tp;
          CHECK(std::abs(via_k.at(y, x, c) - expect) <= 1e-5);
        }
  }
}

TEST_CASE("shape mismatches are rejected") {
  Image I(4, 4, 3, 0.5f);
  TransmissionMap t(3, 4, 0.5f);
  CHECK_THROWS_AS(synthesize_haze(I, t, AtmosphericLight(0.5f)), std::invalid_argument);
  Raster K(4, 5, 3);
  CHECK_THROWS_AS(apply_k(K, I, 0.f), std::invalid_argument);
}

TEST_CASE("per-pixel atmospheric light map") {
  const Image J = random_image(5, 5, 3, 20);
  const Image Amap = random_image(5, 5, 3, 21, 0.4f, 0.9f);
  const TransmissionMap t = random_t(5, 5, 22, 0.3f, 1.f);
  const AtmosphericLight A{Image(Amap)};
  const Image I = synthesize_haze(J, t, A);
  const Image back = recover_scene(I, t, A);
  for (size_t i = 0; i < J.size(); ++i) CHECK(std::abs(back.data()[i] - J.data()[i]) <= 1e-5f);
}

TEST_CASE("domain type invariants enforced") {
  Raster neg(2, 2, 1, -0.5f);
  CHECK_THROWS_AS(DepthMap{Raster(neg)}, std::invalid_argument);
  Raster zero_t(2, 2, 1, 0.f);
  CHECK_THROWS_AS(TransmissionMap{Raster(zero_t)}, std::invalid_argument);
  CHECK_THROWS_AS(AtmosphericLight(1.5f), std::invalid_argument);
}
