#pragma once

#include "fdz/graph.hpp"
#include "fdz/image.hpp"
#include "fdz/image_ops.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>

namespace fdz::models {

using nn::Graph;
using nn::Param;
using nn::Tensor4;

enum class EncoderKind { basic, bottleneck };
enum class ModelKind { fastnet, dualfastnet };

// Configuration for the FastNet family. basic is the narrow residual block
// (two 3x3 convolutions); bottleneck is the 1x1/3x3/1x1 block with expansion
// factor 4. Reference-scale widths use base_width 64 with blocks [2,2,2,2]
// (basic) or [3,4,6,3] (bottleneck); desk-scale tests shrink base_width.
struct FastNetConfig {
  EncoderKind encoder_kind = EncoderKind::basic;
  std::array<int, 4> blocks_per_stage{2, 2, 2, 2};
  int base_width = 64;
  int feature_channels = 32;
  std::vector<int> refinement_scales{1, 2, 4, 8};
  float t_min = 0.05f;  // transmission floor inside image formation (dual only)
  std::uint64_t init_seed = 0;

  void validate() const {
    for (int b : blocks_per_stage)
      if (b < 1) throw std::invalid_argument("FastNetConfig: blocks_per_stage must be >= 1");
    if (base_width < 4) throw std::invalid_argument("FastNetConfig: base_width must be >= 4");
    if (feature_channels < 4)
      throw std::invalid_argument("FastNetConfig: feature_channels must be >= 4");
    if (feature_channels % 4 != 0)
      throw std::invalid_argument("FastNetConfig: feature_channels must be divisible by 4");
    if (refinement_scales.empty())
      throw std::invalid_argument("FastNetConfig: refinement_scales must be nonempty");
    if (!(t_min > 0.f)) throw std::invalid_argument("FastNetConfig: t_min must be > 0");
  }

  static FastNetConfig reference_small() { return {}; }
  static FastNetConfig reference_big() {
    FastNetConfig c;
    c.encoder_kind = EncoderKind::bottleneck;
    c.blocks_per_stage = {3, 4, 6, 3};
    return c;
  }
  static FastNetConfig toy(int width = 8) {
    FastNetConfig c;
    c.base_width = width;
    c.blocks_per_stage = {1, 1, 1, 1};
    return c;
  }

  bool operator==(const FastNetConfig& o) const {
    return encoder_kind == o.encoder_kind && blocks_per_stage == o.blocks_per_stage &&
           base_width == o.base_width && feature_channels == o.feature_channels &&
           refinement_scales == o.refinement_scales && t_min == o.t_min;
  }
};

// A built network: the executable graph plus enough structure to count
// parameters per component and to freeze components during stage-wise
// training. Taps:
//   fastnet:     "refined"
//   dualfastnet: "refined", "t_hat", "a_hat", "j_hat"
template <typename S>
struct Model {
  ModelKind kind = ModelKind::fastnet;
  FastNetConfig cfg;
  Graph<S> graph;
  // Component name -> parameter element count ("encdec" / "refine" for
  // fastnet; "trans" / "air" / "refine" for dual).
  std::map<std::string, size_t> component_params;

  size_t param_count() { return graph.param_count(); }

  std::vector<Param<S>*> params_with_prefix(const std::string& prefix) {
    std::vector<Param<S>*> out;
    for (auto* p : graph.params())
      if (p->name.rfind(prefix, 0) == 0) out.push_back(p);
    return out;
  }
};

namespace detail {

template <typename S>
struct Builder {
  Graph<S>& g;
  std::mt19937_64 rng;

  int conv(const std::string& name, int in_c, int out_c, int k, int s, int p, bool bias,
           int from) {
    return g.add(name, std::make_unique<nn::Conv2d<S>>(name, in_c, out_c, k, s, p, bias, rng),
                 {from});
  }
  int convt(const std::string& name, int in_c, int out_c, int k, int s, int p, int op, bool bias,
            int from) {
    return g.add(name,
                 std::make_unique<nn::ConvTranspose2d<S>>(name, in_c, out_c, k, s, p, op, bias, rng),
                 {from});
  }
  int bn(const std::string& name, int c, int from) {
    return g.add(name, std::make_unique<nn::BatchNorm2d<S>>(name, c), {from});
  }
  int relu(const std::string& name, int from) {
    return g.add(name, std::make_unique<nn::ReLU<S>>(), {from});
  }
  int sigmoid(const std::string& name, int from) {
    return g.add(name, std::make_unique<nn::Sigmoid<S>>(), {from});
  }
  int add_skip(const std::string& name, int a, int b) {
    return g.add(name, std::make_unique<nn::AddSkip<S>>(), {a, b});
  }

  int conv_bn_relu(const std::string& prefix, int in_c, int out_c, int k, int s, int p, int from) {
    int n = conv(prefix + ".conv", in_c, out_c, k, s, p, false, from);
    n = bn(prefix + ".bn", out_c, n);
    return relu(prefix + ".relu", n);
  }

  int basic_block(const std::string& prefix, int in_c, int out_c, int stride, int from) {
    int n = conv(prefix + ".conv1", in_c, out_c, 3, stride, 1, false, from);
    n = bn(prefix + ".bn1", out_c, n);
    n = relu(prefix + ".relu1", n);
    n = conv(prefix + ".conv2", out_c, out_c, 3, 1, 1, false, n);
    n = bn(prefix + ".bn2", out_c, n);
    int shortcut = from;
    if (stride != 1 || in_c != out_c) {
      shortcut = conv(prefix + ".proj.conv", in_c, out_c, 1, stride, 0, false, from);
      shortcut = bn(prefix + ".proj.bn", out_c, shortcut);
    }
    n = add_skip(prefix + ".add", n, shortcut);
    return relu(prefix + ".relu2", n);
  }

  int bottleneck_block(const std::string& prefix, int in_c, int mid_c, int stride, int from) {
    const int out_c = mid_c * 4;
    int n = conv(prefix + ".conv1", in_c, mid_c, 1, 1, 0, false, from);
    n = bn(prefix + ".bn1", mid_c, n);
    n = relu(prefix + ".relu1", n);
    n = conv(prefix + ".conv2", mid_c, mid_c, 3, stride, 1, false, n);
    n = bn(prefix + ".bn2", mid_c, n);
    n = relu(prefix + ".relu2", n);
    n = conv(prefix + ".conv3", mid_c, out_c, 1, 1, 0, false, n);
    n = bn(prefix + ".bn3", out_c, n);
    int shortcut = from;
    if (stride != 1 || in_c != out_c) {
      shortcut = conv(prefix + ".proj.conv", in_c, out_c, 1, stride, 0, false, from);
      shortcut = bn(prefix + ".proj.bn", out_c, shortcut);
    }
    n = add_skip(prefix + ".add", n, shortcut);
    return relu(prefix + ".relu3", n);
  }

  // LinkNet decoder block: 1x1 reduce to in/4, 3x3 transposed conv (stride 2
  // doubles the grid; stride 1 keeps it), 1x1 expand to out.
  int decoder_block(const std::string& prefix, int in_c, int out_c, int stride, int from) {
    const int mid = in_c / 4;
    int n = conv(prefix + ".reduce.conv", in_c, mid, 1, 1, 0, false, from);
    n = bn(prefix + ".reduce.bn", mid, n);
    n = relu(prefix + ".reduce.relu", n);
    n = convt(prefix + ".up.conv", mid, mid, 3, stride, 1, stride == 2 ? 1 : 0, false, n);
    n = bn(prefix + ".up.bn", mid, n);
    n = relu(prefix + ".up.relu", n);
    n = conv(prefix + ".expand.conv", mid, out_c, 1, 1, 0, false, n);
    n = bn(prefix + ".expand.bn", out_c, n);
    return relu(prefix + ".expand.relu", n);
  }

  struct EncoderOut {
    int e0 = 0;  // post-pool stem features
    std::array<int, 4> nodes{};
    std::array<int, 4> channels{};
  };

  // Stem plus residual stages 1..through_stage.
  EncoderOut encoder(const std::string& prefix, const FastNetConfig& cfg, int input_node,
                     int through_stage = 4) {
    const int w = cfg.base_width;
    const bool basic = cfg.encoder_kind == EncoderKind::basic;

    int n = conv(prefix + ".stem.conv", 3, w, 7, 2, 3, false, input_node);
    n = bn(prefix + ".stem.bn", w, n);
    n = relu(prefix + ".stem.relu", n);
    EncoderOut out;
    out.e0 = g.add(prefix + ".stem.pool", std::make_unique<nn::MaxPool2d<S>>(3, 2, 1), {n});

    int cur = out.e0;
    int cur_c = w;
    for (int s = 0; s < through_stage; ++s) {
      const int width = w << s;
      const int out_c = basic ? width : width * 4;
      const int stage_stride = s == 0 ? 1 : 2;
      for (int b = 0; b < cfg.blocks_per_stage[static_cast<size_t>(s)]; ++b) {
        const std::string bp =
            prefix + ".enc" + std::to_string(s + 1) + ".block" + std::to_string(b);
        const int stride = b == 0 ? stage_stride : 1;
        cur = basic ? basic_block(bp, cur_c, out_c, stride, cur)
                    : bottleneck_block(bp, cur_c, width, stride, cur);
        cur_c = out_c;
      }
      out.nodes[static_cast<size_t>(s)] = cur;
      out.channels[static_cast<size_t>(s)] = out_c;
    }
    return out;
  }

  // Full encoder-decoder trunk. Returns the head output node (out_channels
  // channels at input resolution, linear).
  int encoder_decoder(const std::string& prefix, const FastNetConfig& cfg, int out_channels,
                      int input_node) {
    const int w = cfg.base_width;
    const EncoderOut enc = encoder(prefix, cfg, input_node);
    const int e0 = enc.e0;
    const auto& enc_nodes = enc.nodes;
    const auto& enc_channels = enc.channels;

    // Decoder k consumes stage k's features and is summed with the previous
    // stage's output (stage 0 = the post-pool stem features).
    int d = enc_nodes[3];
    int d_c = enc_channels[3];
    for (int k = 4; k >= 1; --k) {
      const int out_c = k >= 2 ? enc_channels[static_cast<size_t>(k - 2)] : w;
      const int stride = k >= 2 ? 2 : 1;
      const std::string dp = prefix + ".dec" + std::to_string(k);
      d = decoder_block(dp, d_c, out_c, stride, d);
      const int skip = k >= 2 ? enc_nodes[static_cast<size_t>(k - 2)] : e0;
      d = add_skip(dp + ".skip", d, skip);
      d_c = out_c;
    }

    // Full-resolution head: two stride-2 transposed convolutions bring the
    // quarter-resolution decoder output back to the input grid.
    int h = convt(prefix + ".head.up1.conv", d_c, cfg.feature_channels, 3, 2, 1, 1, false, d);
    h = bn(prefix + ".head.up1.bn", cfg.feature_channels, h);
    h = relu(prefix + ".head.up1.relu", h);
    h = conv(prefix + ".head.mid.conv", cfg.feature_channels, cfg.feature_channels, 3, 1, 1, false,
             h);
    h = bn(prefix + ".head.mid.bn", cfg.feature_channels, h);
    h = relu(prefix + ".head.mid.relu", h);
    return convt(prefix + ".head.up2.conv", cfg.feature_channels, out_channels, 3, 2, 1, 1, true,
                 h);
  }

  // Pyramid refinement: pool the features to each coarse grid, embed with a
  // 1x1 convolution, resize back to the feature resolution, concatenate with
  // the unpooled features, fuse to 3 channels, sigmoid.
  int refinement(const std::string& prefix, const FastNetConfig& cfg, int in_channels,
                 int features) {
    const int reduced = cfg.feature_channels / 4;
    std::vector<int> branches{features};
    for (int scale : cfg.refinement_scales) {
      const std::string sp = prefix + ".scale" + std::to_string(scale);
      int n = g.add(sp + ".pool", std::make_unique<nn::AdaptiveAvgPool2d<S>>(scale, scale),
                    {features});
      n = conv(sp + ".conv", in_channels, reduced, 1, 1, 0, true, n);
      n = g.add(sp + ".upsample", std::make_unique<nn::UpsampleBilinear<S>>(), {n, features});
      branches.push_back(n);
    }
    int n = g.add(prefix + ".concat", std::make_unique<nn::Concat<S>>(), branches);
    const int cat_c = in_channels + reduced * static_cast<int>(cfg.refinement_scales.size());
    n = conv(prefix + ".fuse.conv", cat_c, 3, 3, 1, 1, true, n);
    return sigmoid(prefix + ".fuse.sigmoid", n);
  }
};

template <typename S>
size_t prefix_param_count(Graph<S>& g, const std::string& prefix) {
  size_t n = 0;
  for (auto* p : g.params())
    if (p->name.rfind(prefix, 0) == 0) n += p->value.count();
  return n;
}

}  // namespace detail

// Single encoder-decoder feeding its full-resolution features into the
// pyramid refinement head.
template <typename S>
Model<S> build_fastnet(const FastNetConfig& cfg) {
  cfg.validate();
  Model<S> m;
  m.kind = ModelKind::fastnet;
  m.cfg = cfg;
  detail::Builder<S> b{m.graph, std::mt19937_64(cfg.init_seed)};
  const int input = m.graph.add_input("input");
  const int features = b.encoder_decoder("encdec", cfg, cfg.feature_channels, input);
  const int refined = b.refinement("refine", cfg, cfg.feature_channels, features);
  m.graph.mark_tap("refined", refined);
  m.component_params["encdec"] = detail::prefix_param_count(m.graph, "encdec");
  m.component_params["refine"] = detail::prefix_param_count(m.graph, "refine");
  return m;
}

// Two encoder-decoder branches estimate the transmission map (1 channel) and
// atmospheric light (3 channels); the haze equation inverts them into a
// dehazed estimate that is concatenated with the input and refined.
template <typename S>
Model<S> build_dualfastnet(const FastNetConfig& cfg) {
  cfg.validate();
  Model<S> m;
  m.kind = ModelKind::dualfastnet;
  m.cfg = cfg;
  detail::Builder<S> b{m.graph, std::mt19937_64(cfg.init_seed)};
  const int input = m.graph.add_input("input");

  const int t_logits = b.encoder_decoder("trans", cfg, 1, input);
  const int t_hat = b.sigmoid("trans.out.sigmoid", t_logits);
  const int a_logits = b.encoder_decoder("air", cfg, 3, input);
  const int a_hat = b.sigmoid("air.out.sigmoid", a_logits);

  const int j_hat = m.graph.add(
      "formation", std::make_unique<nn::ImageFormation<S>>(static_cast<S>(cfg.t_min)),
      {input, t_hat, a_hat});
  const int cat =
      m.graph.add("formation.concat", std::make_unique<nn::Concat<S>>(), std::vector<int>{j_hat, input});
  const int refined = b.refinement("refine", cfg, 6, cat);

  m.graph.mark_tap("t_hat", t_hat);
  m.graph.mark_tap("a_hat", a_hat);
  m.graph.mark_tap("j_hat", j_hat);
  m.graph.mark_tap("refined", refined);
  m.component_params["trans"] = detail::prefix_param_count(m.graph, "trans");
  m.component_params["air"] = detail::prefix_param_count(m.graph, "air");
  m.component_params["refine"] = detail::prefix_param_count(m.graph, "refine");
  return m;
}

template <typename S>
Model<S> build_model(ModelKind kind, const FastNetConfig& cfg) {
  return kind == ModelKind::fastnet ? build_fastnet<S>(cfg) : build_dualfastnet<S>(cfg);
}

// Encoder fragment through stage 2 with the same layer names as the full
// model, exposing a "features" tap. Used to snapshot a frozen feature
// extractor for the content loss.
template <typename S>
Graph<S> build_encoder_fragment(const FastNetConfig& cfg, const std::string& prefix) {
  cfg.validate();
  Graph<S> g;
  detail::Builder<S> b{g, std::mt19937_64(cfg.init_seed)};
  const int input = g.add_input("input");
  const auto enc = b.encoder(prefix, cfg, input, 2);
  g.mark_tap("features", enc.nodes[1]);
  return g;
}

inline int pad_to_multiple(int v, int m) { return (v + m - 1) / m * m; }

// Runs the graph on a batch. H and W must be divisible by 32; the error
// message reports the padded size to use.
template <typename S>
void forward_batch(Model<S>& m, const Tensor4<S>& batch, bool training = false) {
  if (batch.h() % 32 != 0 || batch.w() % 32 != 0)
    throw std::invalid_argument(
        "forward: input dims must be divisible by 32; pad " + std::to_string(batch.h()) + "x" +
        std::to_string(batch.w()) + " to " + std::to_string(pad_to_multiple(batch.h(), 32)) + "x" +
        std::to_string(pad_to_multiple(batch.w(), 32)));
  if (batch.c() != 3) throw std::invalid_argument("forward: expected 3-channel input");
  m.graph.forward({&batch}, training);
}

// Moves batchnorm running statistics off their degenerate initial values by
// running a few train-mode forwards. A freshly built graph parks many
// activations exactly on rectifier kinks (zero-mean statistics, zero shifts),
// which is a hostile operating point for finite-difference verification.
template <typename S>
void warm_batchnorm_stats(Model<S>& m, int hw = 32, int iters = 2, std::uint64_t seed = 77) {
  for (int i = 0; i < iters; ++i) {
    const Tensor4<S> x =
        nn::random_uniform<S>(2, 3, hw, hw, S(0.1), S(0.9), seed + static_cast<std::uint64_t>(i));
    forward_batch(m, x, true);
  }
}

// Image <-> tensor bridges. Grayscale images are replicated to 3 channels on
// the way in.
template <typename S>
Tensor4<S> image_to_tensor(const Image& img) {
  Tensor4<S> t(1, 3, img.height(), img.width());
  for (int c = 0; c < 3; ++c) {
    const int src_c = img.channels() == 3 ? c : 0;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        t.at(0, c, y, x) = static_cast<S>(img.at(y, x, src_c));
  }
  return t;
}

template <typename S>
Image tensor_to_image(const Tensor4<S>& t, int item = 0) {
  if (t.c() != 1 && t.c() != 3) throw std::invalid_argument("tensor_to_image: need 1 or 3 channels");
  Image img(t.h(), t.w(), t.c());
  for (int c = 0; c < t.c(); ++c)
    for (int y = 0; y < t.h(); ++y)
      for (int x = 0; x < t.w(); ++x)
        img.at(y, x, c) = std::clamp(static_cast<float>(t.at(item, c, y, x)), 0.f, 1.f);
  return img;
}

// Dehazes an image of arbitrary size: reflect-pads up to the next multiple of
// 32, runs an eval-mode forward pass, crops back.
template <typename S>
Image dehaze_image(Model<S>& m, const Image& input) {
  const int h = input.height(), w = input.width();
  const int ph = pad_to_multiple(h, 32), pw = pad_to_multiple(w, 32);
  const Image padded = (ph == h && pw == w) ? input : pad_reflect(input, 0, ph - h, 0, pw - w);
  const Tensor4<S> t = image_to_tensor<S>(padded);
  forward_batch(m, t, false);
  Image out = tensor_to_image(m.graph.tap_value("refined"));
  if (ph != h || pw != w) out = crop(out, 0, 0, h, w);
  return out;
}

}  // namespace fdz::models
