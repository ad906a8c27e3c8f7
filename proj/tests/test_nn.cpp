#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fdz/gradcheck.hpp"
#include "fdz/graph.hpp"
#include "fdz/layers.hpp"

#include <random>

using namespace fdz::nn;

namespace {

// Naive quadruple-loop cross-correlation, independent of the im2col path.
template <typename S>
Tensor4<S> conv_oracle(const Tensor4<S>& x, const Tensor4<S>& w, const std::vector<S>& bias,
                       int stride, int pad) {
  const int k = w.h();
  const int oh = conv_out_dim(x.h(), k, stride, pad);
  const int ow = conv_out_dim(x.w(), k, stride, pad);
  Tensor4<S> y(x.n(), w.n(), oh, ow);
  for (int n = 0; n < x.n(); ++n)
    for (int oc = 0; oc < w.n(); ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = bias.empty() ? 0.0 : static_cast<double>(bias[static_cast<size_t>(oc)]);
          for (int ic = 0; ic < x.c(); ++ic)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int sy = oy * stride - pad + ky;
                const int sx = ox * stride - pad + kx;
                if (sy < 0 || sy >= x.h() || sx < 0 || sx >= x.w()) continue;
                acc += static_cast<double>(x.at(n, ic, sy, sx)) * w.at(oc, ic, ky, kx);
              }
          y.at(n, oc, oy, ox) = static_cast<S>(acc);
        }
  return y;
}

// Naive transposed convolution: scatter each input pixel through the kernel.
template <typename S>
Tensor4<S> convt_oracle(const Tensor4<S>& x, const Tensor4<S>& w, const std::vector<S>& bias,
                        int stride, int pad, int out_pad) {
  const int k = w.h();
  const int out_c = w.c();
  const int oh = conv_transpose_out_dim(x.h(), k, stride, pad, out_pad);
  const int ow = conv_transpose_out_dim(x.w(), k, stride, pad, out_pad);
  Tensor4<S> y(x.n(), out_c, oh, ow);
  for (int n = 0; n < x.n(); ++n) {
    for (int ic = 0; ic < x.c(); ++ic)
      for (int sy = 0; sy < x.h(); ++sy)
        for (int sx = 0; sx < x.w(); ++sx)
          for (int oc = 0; oc < out_c; ++oc)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int ty = sy * stride - pad + ky;
                const int tx = sx * stride - pad + kx;
                if (ty < 0 || ty >= oh || tx < 0 || tx >= ow) continue;
                y.at(n, oc, ty, tx) += x.at(n, ic, sy, sx) * w.at(ic, oc, ky, kx);
              }
    if (!bias.empty())
      for (int oc = 0; oc < out_c; ++oc)
        for (int ty = 0; ty < oh; ++ty)
          for (int tx = 0; tx < ow; ++tx) y.at(n, oc, ty, tx) += bias[static_cast<size_t>(oc)];
  }
  return y;
}

template <typename S>
Tensor4<S> randn(int n, int c, int h, int w, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  Tensor4<S> t(n, c, h, w);
  for (size_t i = 0; i < t.count(); ++i) t.data()[i] = static_cast<S>(d(rng));
  return t;
}

// Wraps one layer into a single-node graph with a tap for grad_check.
template <typename S, typename L, typename... Args>
Graph<S> single_layer_graph(int n_inputs, Args&&... args) {
  Graph<S> g;
  std::vector<int> ins;
  for (int i = 0; i < n_inputs; ++i) ins.push_back(g.add_input("in" + std::to_string(i)));
  const int node = g.add("layer", std::make_unique<L>(std::forward<Args>(args)...), ins);
  g.mark_tap("out", node);
  return g;
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel") {
  std::mt19937_64 rng(1);
  Conv2d<double> conv("c", 2, 2, 1, 1, 0, false, rng);
  auto params = conv.params();
  // weight (2,2,1,1): identity mixing
  params[0]->value.at(0, 0, 0, 0) = 1;
  params[0]->value.at(0, 1, 0, 0) = 0;
  params[0]->value.at(1, 0, 0, 0) = 0;
  params[0]->value.at(1, 1, 0, 0) = 1;
  const Tensor4<double> x = randn<double>(2, 2, 5, 5, 2);
  const Tensor4<double> y = conv.forward({&x}, false);
  for (size_t i = 0; i < x.count(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv2d: all-ones 3x3 kernel sums the input") {
  std::mt19937_64 rng(1);
  Conv2d<double> conv("c", 1, 1, 3, 1, 0, false, rng);
  conv.params()[0]->value.flat().setConstant(1.0);
  Tensor4<double> x(1, 1, 3, 3);
  for (int i = 0; i < 9; ++i) x.data()[i] = i + 1;
  const Tensor4<double> y = conv.forward({&x}, false);
  CHECK(y.count() == 1);
  CHECK(y.data()[0] == doctest::Approx(45.0));
}

TEST_CASE("conv2d matches the naive oracle (stride 2, padding 1, with bias)") {
  std::mt19937_64 rng(3);
  Conv2d<double> conv("c", 2, 3, 3, 2, 1, true, rng);
  conv.params()[1]->value.flat().setRandom();
  const Tensor4<double> x = randn<double>(1, 2, 5, 5, 4);
  const Tensor4<double> y = conv.forward({&x}, false);

  std::vector<double> bias(3);
  for (int i = 0; i < 3; ++i) bias[static_cast<size_t>(i)] = conv.params()[1]->value.data()[i];
  const Tensor4<double> expect = conv_oracle(x, conv.params()[0]->value, bias, 2, 1);
  REQUIRE(y.same_shape(expect));
  for (size_t i = 0; i < y.count(); ++i)
    CHECK(y.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-6));
}

TEST_CASE("conv2d backward: zero upstream and bias sums") {
  std::mt19937_64 rng(5);
  Conv2d<double> conv("c", 2, 3, 3, 1, 1, true, rng);
  const Tensor4<double> x = randn<double>(2, 2, 6, 6, 6);
  const Tensor4<double> y = conv.forward({&x}, false);

  Tensor4<double> gx = Tensor4<double>::zeros_like(x);
  std::vector<Tensor4<double>*> grad_in{&gx};

  Tensor4<double> zero = Tensor4<double>::zeros_like(y);
  conv.backward({&x}, y, zero, grad_in);
  for (auto* p : conv.params())
    for (size_t i = 0; i < p->value.count(); ++i) CHECK(p->value.grad_data()[i] == 0.0);
  for (size_t i = 0; i < gx.count(); ++i) CHECK(gx.data()[i] == 0.0);

  const Tensor4<double> g = randn<double>(2, 3, 6, 6, 7);
  conv.backward({&x}, y, g, grad_in);
  for (int oc = 0; oc < 3; ++oc) {
    double expect = 0.0;
    for (int n = 0; n < 2; ++n)
      for (int yy = 0; yy < 6; ++yy)
        for (int xx = 0; xx < 6; ++xx) expect += g.at(n, oc, yy, xx);
    CHECK(conv.params()[1]->value.grad_data()[oc] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("conv_transpose: stride-1 1x1 identity") {
  std::mt19937_64 rng(8);
  ConvTranspose2d<double> convt("ct", 1, 1, 1, 1, 0, 0, false, rng);
  convt.params()[0]->value.data()[0] = 1.0;
  const Tensor4<double> x = randn<double>(1, 1, 4, 4, 9);
  const Tensor4<double> y = convt.forward({&x}, false);
  for (size_t i = 0; i < x.count(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv_transpose: k2 s2 doubling matches the scatter oracle") {
  std::mt19937_64 rng(10);
  ConvTranspose2d<double> convt("ct", 2, 3, 2, 2, 0, 0, true, rng);
  convt.params()[1]->value.flat().setRandom();
  const Tensor4<double> x = randn<double>(1, 2, 2, 2, 11);
  const Tensor4<double> y = convt.forward({&x}, false);
  CHECK(y.h() == 4);
  CHECK(y.w() == 4);

  std::vector<double> bias(3);
  for (int i = 0; i < 3; ++i) bias[static_cast<size_t>(i)] = convt.params()[1]->value.data()[i];
  const Tensor4<double> expect = convt_oracle(x, convt.params()[0]->value, bias, 2, 0, 0);
  REQUIRE(y.same_shape(expect));
  for (size_t i = 0; i < y.count(); ++i)
    CHECK(y.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-9));
}

TEST_CASE("conv_transpose: adjoint identity <conv(x), y> = <x, convT(y)>") {
  std::mt19937_64 rng(12);
  Conv2d<double> conv("c", 3, 2, 3, 2, 1, false, rng);
  ConvTranspose2d<double> convt("ct", 2, 3, 3, 2, 1, 1, false, rng);
  // Same weight tensor in both roles: convT weight (in=2, out=3, k, k) takes
  // conv's (out=2, in=3, k, k) values transposed across the channel axes.
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 3; ++b)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx)
          convt.params()[0]->value.at(a, b, ky, kx) = conv.params()[0]->value.at(a, b, ky, kx);

  const Tensor4<double> x = randn<double>(1, 3, 8, 8, 13);
  const Tensor4<double> y = randn<double>(1, 2, 4, 4, 14);
  const Tensor4<double> cx = conv.forward({&x}, false);   // (1,2,4,4)
  const Tensor4<double> cty = convt.forward({&y}, false); // (1,3,8,8)
  double lhs = 0.0, rhs = 0.0;
  for (size_t i = 0; i < cx.count(); ++i) lhs += cx.data()[i] * y.data()[i];
  for (size_t i = 0; i < x.count(); ++i) rhs += x.data()[i] * cty.data()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("conv_transpose: stride-2 3x3 with output padding doubles dims") {
  std::mt19937_64 rng(15);
  ConvTranspose2d<double> convt("ct", 2, 2, 3, 2, 1, 1, false, rng);
  const Tensor4<double> x = randn<double>(1, 2, 6, 6, 16);
  const Tensor4<double> y = convt.forward({&x}, false);
  CHECK(y.h() == 12);
  CHECK(y.w() == 12);
  const Tensor4<double> expect = convt_oracle(x, convt.params()[0]->value, {}, 2, 1, 1);
  for (size_t i = 0; i < y.count(); ++i)
    CHECK(y.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-9));
}

TEST_CASE("batchnorm: pass-through and constant channels") {
  BatchNorm2d<double> bn("bn", 2);
  // Standardized input stays (approximately) itself under (1,0) affine.
  Tensor4<double> x(1, 2, 1, 4);
  const double vals[4] = {-1.0, 1.0, -1.0, 1.0};  // mean 0, var 1
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i) x.at(0, c, 0, i) = vals[i];
  const Tensor4<double> y = bn.forward({&x}, true);
  for (size_t i = 0; i < x.count(); ++i)
    CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-4));

  // Constant channel collapses to the shift parameter.
  BatchNorm2d<double> bn2("bn2", 1);
  bn2.params()[1]->value.data()[0] = 0.25;  // beta
  Tensor4<double> c(1, 1, 2, 2, 3.0);
  const Tensor4<double> yc = bn2.forward({&c}, true);
  for (size_t i = 0; i < yc.count(); ++i)
    CHECK(yc.data()[i] == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("batchnorm: train-mode output is standardized per channel") {
  BatchNorm2d<double> bn("bn", 3);
  const Tensor4<double> x = randn<double>(2, 3, 8, 8, 17, 2.5);
  const Tensor4<double> y = bn.forward({&x}, true);
  for (int c = 0; c < 3; ++c) {
    double sum = 0, sq = 0;
    const long m = 2 * 8 * 8;
    for (int n = 0; n < 2; ++n)
      for (int yy = 0; yy < 8; ++yy)
        for (int xx = 0; xx < 8; ++xx) {
          sum += y.at(n, c, yy, xx);
          sq += y.at(n, c, yy, xx) * y.at(n, c, yy, xx);
        }
    const double mean = sum / m;
    const double var = sq / m - mean * mean;
    CHECK(std::abs(mean) <= 1e-4);
    CHECK(std::abs(var - 1.0) <= 1e-4);
  }
}

TEST_CASE("batchnorm: degenerate train batch rejected, eval mode uses running stats") {
  BatchNorm2d<double> bn("bn", 1);
  Tensor4<double> single(1, 1, 1, 1, 5.0);
  CHECK_THROWS_AS(bn.forward({&single}, true), std::invalid_argument);
  // Fresh layer in eval mode: running stats are (0,1), so output = input.
  const Tensor4<double> y = bn.forward({&single}, false);
  CHECK(y.data()[0] == doctest::Approx(5.0).epsilon(1e-5));
}

TEST_CASE("relu and maxpool basics") {
  ReLU<double> relu;
  Tensor4<double> pos(1, 1, 2, 2, 0.7);
  const Tensor4<double> y = relu.forward({&pos}, false);
  for (size_t i = 0; i < y.count(); ++i) CHECK(y.data()[i] == 0.7);

  MaxPool2d<double> pool(2, 2);
  Tensor4<double> x(1, 1, 2, 2);
  x.data()[0] = 1;
  x.data()[1] = 2;
  x.data()[2] = 3;
  x.data()[3] = 4;
  const Tensor4<double> p = pool.forward({&x}, false);
  CHECK(p.count() == 1);
  CHECK(p.data()[0] == 4.0);
}

TEST_CASE("finite differences: every op on random 2x3x8x8 inputs") {
  const double h = 1e-3, tol = 1e-6;
  std::mt19937_64 rng(100);

  auto check = [&](Graph<double>& g, const std::vector<Tensor4<double>>& inputs, bool training) {
    const auto report = grad_check(g, inputs, h, tol, training);
    CAPTURE(report.to_text());
    CHECK(report.pass);
  };

  {
    Graph<double> g = single_layer_graph<double, Conv2d<double>>(1, "c", 3, 4, 3, 1, 1, true, rng);
    check(g, {randn<double>(2, 3, 8, 8, 101)}, false);
  }
  {
    Graph<double> g = single_layer_graph<double, Conv2d<double>>(1, "c", 3, 2, 3, 2, 0, true, rng);
    check(g, {randn<double>(2, 3, 8, 8, 102)}, false);
  }
  {
    Graph<double> g =
        single_layer_graph<double, ConvTranspose2d<double>>(1, "ct", 3, 2, 3, 2, 1, 1, true, rng);
    check(g, {randn<double>(2, 3, 8, 8, 103)}, false);
  }
  {
    Graph<double> g =
        single_layer_graph<double, ConvTranspose2d<double>>(1, "ct", 3, 2, 2, 2, 0, 0, false, rng);
    check(g, {randn<double>(2, 3, 8, 8, 104)}, false);
  }
  {
    Graph<double> g = single_layer_graph<double, BatchNorm2d<double>>(1, "bn", 3);
    check(g, {randn<double>(2, 3, 8, 8, 105)}, true);  // batch statistics path
    Graph<double> ge = single_layer_graph<double, BatchNorm2d<double>>(1, "bn", 3);
    check(ge, {randn<double>(2, 3, 8, 8, 106)}, false);  // running statistics path
  }
  {
    Graph<double> g = single_layer_graph<double, ReLU<double>>(1);
    // keep pre-activations away from the kink by more than h
    Tensor4<double> x = randn<double>(2, 3, 8, 8, 107);
    for (size_t i = 0; i < x.count(); ++i)
      if (std::abs(x.data()[i]) < 2 * h) x.data()[i] = 4 * h;
    check(g, {x}, false);
  }
  {
    Graph<double> g = single_layer_graph<double, Sigmoid<double>>(1);
    check(g, {randn<double>(2, 3, 8, 8, 108)}, false);
  }
  {
    Graph<double> g = single_layer_graph<double, MaxPool2d<double>>(1, 2, 2, 0);
    check(g, {randn<double>(2, 3, 8, 8, 109)}, false);
  }
  {
    Graph<double> g = single_layer_graph<double, MaxPool2d<double>>(1, 3, 2, 1);
    check(g, {randn<double>(2, 3, 8, 8, 110)}, false);
  }
  {
    Graph<double> g = single_layer_graph<double, AdaptiveAvgPool2d<double>>(1, 3, 3);
    check(g, {randn<double>(2, 3, 8, 8, 111)}, false);
  }
  {
    Graph<double> g = single_layer_graph<double, UpsampleBilinear<double>>(1, 13, 11);
    check(g, {randn<double>(2, 3, 8, 8, 112)}, false);
  }
  {
    Graph<double> g = single_layer_graph<double, AddSkip<double>>(2);
    check(g, {randn<double>(2, 3, 8, 8, 113), randn<double>(2, 3, 8, 8, 114)}, false);
  }
  {
    Graph<double> g = single_layer_graph<double, Concat<double>>(2);
    check(g, {randn<double>(2, 3, 8, 8, 115), randn<double>(2, 2, 8, 8, 116)}, false);
  }
  {
    // Image formation with inputs placed well inside the clamp interval:
    // raw = (I - A)/t' + A stays within [0.27, 0.73] for these ranges, so no
    // finite-difference step can cross the clamp kink.
    Graph<double> g = single_layer_graph<double, ImageFormation<double>>(3, 0.05);
    const Tensor4<double> I = random_uniform<double>(2, 3, 8, 8, 0.45, 0.55, 117);
    const Tensor4<double> t = random_uniform<double>(2, 1, 8, 8, 0.55, 0.70, 118);
    const Tensor4<double> A = random_uniform<double>(2, 3, 8, 8, 0.45, 0.55, 119);
    // 1/t curvature makes h = 1e-3 truncation visible at the 1e-6 tolerance;
    // a smaller step isolates the analytic gradient.
    const auto report = grad_check(g, {I, t, A}, 1e-4, tol);
    CAPTURE(report.to_text());
    CHECK(report.pass);
  }
}

TEST_CASE("relu is exact under finite differences away from the kink") {
  // Piecewise-linear region: numeric and analytic agree to machine noise.
  Graph<double> g;
  const int in = g.add_input("x");
  std::mt19937_64 rng(200);
  const int c = g.add("conv", std::make_unique<Conv2d<double>>("c", 2, 2, 3, 1, 1, false, rng),
                      {in});
  const int r = g.add("relu", std::make_unique<ReLU<double>>(), {c});
  g.mark_tap("out", r);
  Tensor4<double> x = randn<double>(1, 2, 6, 6, 201);
  x.flat() = x.flat().abs() + 0.5;  // positive inputs, positive-leaning activations
  const auto report = grad_check(g, {x}, 1e-4, 1e-7);
  CAPTURE(report.to_text());
  CHECK(report.pass);
}

TEST_CASE("graph: fan-out accumulates gradients") {
  // y = x + x doubles the gradient.
  Graph<double> g;
  const int in = g.add_input("x");
  const int add = g.add("add", std::make_unique<AddSkip<double>>(), {in, in});
  g.mark_tap("out", add);
  const Tensor4<double> x = randn<double>(1, 1, 2, 2, 300);
  g.forward({&x}, false);
  Tensor4<double> seed(1, 1, 2, 2, 1.0);
  g.backward({{add, &seed}}, true);
  for (size_t i = 0; i < x.count(); ++i) CHECK(g.input_grad(0).data()[i] == 2.0);
}

TEST_CASE("param_count formulas") {
  std::mt19937_64 rng(400);
  Conv2d<double> conv("c", 3, 64, 7, 2, 3, true, rng);
  CHECK(conv.param_count() == 64 * (3 * 49 + 1));  // 9472

  BatchNorm2d<double> bn("bn", 64);
  CHECK(bn.param_count() == 128);  // affine only; running stats excluded

  Graph<double> g;
  const int in = g.add_input("x");
  int n = g.add("conv", std::make_unique<Conv2d<double>>("c", 3, 64, 7, 2, 3, true, rng), {in});
  n = g.add("bn", std::make_unique<BatchNorm2d<double>>("bn", 64), {n});
  g.mark_tap("out", n);
  CHECK(g.param_count() == 9472 + 128);
}

TEST_CASE("deterministic forward: same input, same bits") {
  std::mt19937_64 rng(500);
  Graph<double> g;
  const int in = g.add_input("x");
  int n = g.add("conv", std::make_unique<Conv2d<double>>("c", 3, 8, 3, 1, 1, true, rng), {in});
  n = g.add("sig", std::make_unique<Sigmoid<double>>(), {n});
  g.mark_tap("out", n);
  const Tensor4<double> x = randn<double>(1, 3, 8, 8, 501);
  g.forward({&x}, false);
  Tensor4<double> first = g.tap_value("out");
  g.forward({&x}, false);
  const Tensor4<double>& second = g.tap_value("out");
  for (size_t i = 0; i < first.count(); ++i) CHECK(first.data()[i] == second.data()[i]);
}
