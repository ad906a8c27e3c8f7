#pragma once

#include "fdz/graph.hpp"
#include "fdz/metrics.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace fdz::losses {

using nn::Graph;
using nn::Tensor4;

enum class LossKind { mse, l1, ssim, content };

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "l1") return LossKind::l1;
  if (s == "ssim") return LossKind::ssim;
  if (s == "content") return LossKind::content;
  throw std::invalid_argument("unknown loss kind: " + s);
}

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::mse: return "mse";
    case LossKind::l1: return "l1";
    case LossKind::ssim: return "ssim";
    case LossKind::content: return "content";
  }
  return "?";
}

struct LossSpec {
  LossKind kind = LossKind::mse;
  double weight = 1.0;
  SsimParams ssim;  // used when kind == ssim

  LossSpec() = default;
  LossSpec(LossKind k, double w = 1.0) : kind(k), weight(w) {}
};

// Targets a composite objective can attach to. `refined` is the network
// output; the remaining three exist only on the dual model.
enum class LossTarget { refined, dehazed, transmission, airlight };

inline std::string to_string(LossTarget t) {
  switch (t) {
    case LossTarget::refined: return "refined";
    case LossTarget::dehazed: return "dehazed";
    case LossTarget::transmission: return "transmission";
    case LossTarget::airlight: return "airlight";
  }
  return "?";
}

struct CompositeSpec {
  std::vector<std::pair<LossTarget, LossSpec>> terms;

  // MSE on the refined output only.
  static CompositeSpec mse_x1() { return {{{LossTarget::refined, {LossKind::mse}}}}; }
  // Unit-weight MSE on refined output, dehazed estimate, transmission map and
  // atmospheric light simultaneously.
  static CompositeSpec mse_x4() {
    return {{{LossTarget::refined, {LossKind::mse}},
             {LossTarget::dehazed, {LossKind::mse}},
             {LossTarget::transmission, {LossKind::mse}},
             {LossTarget::airlight, {LossKind::mse}}}};
  }
  static CompositeSpec single(LossKind kind) { return {{{LossTarget::refined, {kind}}}}; }
};

// Frozen feature extractor for the content loss: a snapshot of a model's
// encoder through stage 2, taken at fine-tune start. Parameters never update;
// gradients flow through it to the prediction only.
template <typename S>
class ContentExtractor {
 public:
  ContentExtractor() = default;
  // graph must expose a "features" tap.
  explicit ContentExtractor(std::shared_ptr<Graph<S>> graph) : graph_(std::move(graph)) {}

  bool empty() const { return !graph_; }

  Tensor4<S> features(const Tensor4<S>& x) {
    graph_->forward({&x}, false);
    return graph_->tap_value("features");
  }
  // dL/dx given dL/dfeatures.
  Tensor4<S> input_gradient(const Tensor4<S>& x, const Tensor4<S>& dfeat) {
    graph_->forward({&x}, false);
    graph_->backward({{graph_->tap_node("features"), &dfeat}}, true);
    return graph_->input_grad(0);
  }

 private:
  std::shared_ptr<Graph<S>> graph_;
};

template <typename S>
struct LossValue {
  double value = 0.0;
  Tensor4<S> grad;  // d(loss)/d(pred)
};

namespace detail {

template <typename S>
LossValue<S> mse_loss(const Tensor4<S>& pred, const Tensor4<S>& truth) {
  LossValue<S> out;
  out.grad = Tensor4<S>::zeros_like(pred);
  const double n = static_cast<double>(pred.count());
  double sum = 0.0;
  for (size_t i = 0; i < pred.count(); ++i) {
    const double d = static_cast<double>(pred.data()[i]) - truth.data()[i];
    sum += d * d;
    out.grad.data()[i] = static_cast<S>(2.0 * d / n);
  }
  out.value = sum / n;
  return out;
}

template <typename S>
LossValue<S> l1_loss(const Tensor4<S>& pred, const Tensor4<S>& truth) {
  LossValue<S> out;
  out.grad = Tensor4<S>::zeros_like(pred);
  const double n = static_cast<double>(pred.count());
  double sum = 0.0;
  for (size_t i = 0; i < pred.count(); ++i) {
    const double d = static_cast<double>(pred.data()[i]) - truth.data()[i];
    sum += std::abs(d);
    // subgradient 0 at exact ties
    out.grad.data()[i] = static_cast<S>(d > 0 ? 1.0 / n : (d < 0 ? -1.0 / n : 0.0));
  }
  out.value = sum / n;
  return out;
}

// Gaussian-window SSIM over a batch with its analytic gradient with respect
// to the prediction. Channels are reduced by the mean before windowing, so
// the per-channel gradient is the grayscale gradient divided by the channel
// count. Returns the loss 1 - mean SSIM.
template <typename S>
LossValue<S> ssim_loss(const Tensor4<S>& pred, const Tensor4<S>& truth, const SsimParams& p);

}  // namespace detail

// Single-term loss with its gradient with respect to pred. The content
// extractor is required only for LossKind::content.
template <typename S>
LossValue<S> loss_forward_backward(const Tensor4<S>& pred, const Tensor4<S>& truth,
                                   const LossSpec& spec,
                                   ContentExtractor<S>* extractor = nullptr) {
  if (!pred.same_shape(truth)) throw std::invalid_argument("loss: shape mismatch");
  LossValue<S> out;
  switch (spec.kind) {
    case LossKind::mse:
      out = detail::mse_loss(pred, truth);
      break;
    case LossKind::l1:
      out = detail::l1_loss(pred, truth);
      break;
    case LossKind::ssim:
      out = detail::ssim_loss(pred, truth, spec.ssim);
      break;
    case LossKind::content: {
      if (!extractor || extractor->empty())
        throw std::invalid_argument("content loss requires a frozen feature extractor");
      const Tensor4<S> fp = extractor->features(pred);
      const Tensor4<S> ft = extractor->features(truth);
      LossValue<S> feat = detail::mse_loss(fp, ft);
      out.value = feat.value;
      out.grad = extractor->input_gradient(pred, feat.grad);
      break;
    }
  }
  if (spec.weight != 1.0) {
    out.value *= spec.weight;
    out.grad.flat() *= static_cast<S>(spec.weight);
  }
  return out;
}

// Weighted sum over named targets. Returns the scalar and one gradient per
// target present in the spec.
template <typename S>
std::pair<double, std::map<LossTarget, Tensor4<S>>> composite_loss(
    const std::map<LossTarget, const Tensor4<S>*>& outputs,
    const std::map<LossTarget, const Tensor4<S>*>& truths, const CompositeSpec& spec,
    ContentExtractor<S>* extractor = nullptr) {
  if (spec.terms.empty()) throw std::invalid_argument("composite_loss: empty spec");
  double total = 0.0;
  std::map<LossTarget, Tensor4<S>> grads;
  for (const auto& [target, term] : spec.terms) {
    auto po = outputs.find(target);
    auto pt = truths.find(target);
    if (po == outputs.end() || pt == truths.end())
      throw std::invalid_argument("composite_loss: missing target " + to_string(target));
    LossValue<S> lv = loss_forward_backward(*po->second, *pt->second, term, extractor);
    total += lv.value;
    auto it = grads.find(target);
    if (it == grads.end())
      grads.emplace(target, std::move(lv.grad));
    else
      it->second.flat() += lv.grad.flat();
  }
  return {total, std::move(grads)};
}

// ---- SSIM loss implementation ----

namespace detail {

template <typename S>
struct GaussianValid {
  int window;
  std::vector<double> k;

  GaussianValid(int window, double sigma) : window(window), k(window) {
    double sum = 0.0;
    for (int i = 0; i < window; ++i) {
      const double d = i - window / 2;
      k[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
      sum += k[static_cast<size_t>(i)];
    }
    for (double& v : k) v /= sum;
  }

  // Valid-mode separable correlation, per item, single channel.
  void filter(const std::vector<double>& src, int h, int w, std::vector<double>& dst) const {
    const int ow = w - window + 1, oh = h - window + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int i = 0; i < window; ++i) s += k[static_cast<size_t>(i)] * src[static_cast<size_t>(y) * w + x + i];
        tmp[static_cast<size_t>(y) * ow + x] = s;
      }
    dst.assign(static_cast<size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = 0.0;
        for (int i = 0; i < window; ++i) s += k[static_cast<size_t>(i)] * tmp[(static_cast<size_t>(y) + i) * ow + x];
        dst[static_cast<size_t>(y) * ow + x] = s;
      }
  }

  // Adjoint of filter: scatter window-grid values back onto the pixel grid.
  void scatter(const std::vector<double>& src, int h, int w, std::vector<double>& dst) const {
    const int ow = w - window + 1, oh = h - window + 1;
    dst.assign(static_cast<size_t>(h) * w, 0.0);
    std::vector<double> tmp(static_cast<size_t>(h) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const double v = src[static_cast<size_t>(y) * ow + x];
        for (int i = 0; i < window; ++i) tmp[(static_cast<size_t>(y) + i) * ow + x] += k[static_cast<size_t>(i)] * v;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        const double v = tmp[static_cast<size_t>(y) * ow + x];
        for (int i = 0; i < window; ++i) dst[static_cast<size_t>(y) * w + x + i] += k[static_cast<size_t>(i)] * v;
      }
  }
};

template <typename S>
LossValue<S> ssim_loss(const Tensor4<S>& pred, const Tensor4<S>& truth, const SsimParams& p) {
  p.validate();
  if (pred.h() < p.window || pred.w() < p.window)
    throw std::invalid_argument("ssim loss: tensor smaller than the window");
  const int h = pred.h(), w = pred.w(), C = pred.c();
  const int oh = h - p.window + 1, ow = w - p.window + 1;
  const size_t npix = static_cast<size_t>(h) * w;
  const size_t nwin = static_cast<size_t>(oh) * ow;
  const double c1 = (p.k1 * p.L) * (p.k1 * p.L);
  const double c2 = (p.k2 * p.L) * (p.k2 * p.L);
  const GaussianValid<S> filt(p.window, p.sigma);

  LossValue<S> out;
  out.grad = Tensor4<S>::zeros_like(pred);
  double total = 0.0;

  std::vector<double> x(npix), y(npix), xx(npix), yy(npix), xy(npix);
  std::vector<double> mx, my, sxx, syy, sxy;
  std::vector<double> d_mu(nwin), d_sxx(nwin), d_sxy(nwin);
  std::vector<double> g_mu, g_sxx, g_sxy;

  for (int item = 0; item < pred.n(); ++item) {
    // channel-mean grayscale
    for (size_t i = 0; i < npix; ++i) {
      double ax = 0.0, ay = 0.0;
      for (int c = 0; c < C; ++c) {
        ax += pred.data()[pred.offset(item, c, 0, 0) + i];
        ay += truth.data()[truth.offset(item, c, 0, 0) + i];
      }
      x[i] = ax / C;
      y[i] = ay / C;
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    filt.filter(x, h, w, mx);
    filt.filter(y, h, w, my);
    filt.filter(xx, h, w, sxx);
    filt.filter(yy, h, w, syy);
    filt.filter(xy, h, w, sxy);

    for (size_t i = 0; i < nwin; ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      const double a1 = 2.0 * mx[i] * my[i] + c1;
      const double a2 = 2.0 * cxy + c2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + c1;
      const double b2 = vx + vy + c2;
      const double ssim_ij = (a1 * a2) / (b1 * b2);
      total += ssim_ij;

      // Partials with respect to the filtered moments of the prediction.
      const double inv = 1.0 / (b1 * b2);
      const double dS_dA1 = a2 * inv;
      const double dS_dA2 = a1 * inv;
      const double dS_dB1 = -ssim_ij / b1;
      const double dS_dB2 = -ssim_ij / b2;
      d_mu[i] = dS_dA1 * 2.0 * my[i] + dS_dA2 * (-2.0 * my[i]) + dS_dB1 * 2.0 * mx[i] +
                dS_dB2 * (-2.0 * mx[i]);
      d_sxx[i] = dS_dB2;        // via vx = sxx - mx^2
      d_sxy[i] = dS_dA2 * 2.0;  // via cxy = sxy - mx*my
    }

    filt.scatter(d_mu, h, w, g_mu);
    filt.scatter(d_sxx, h, w, g_sxx);
    filt.scatter(d_sxy, h, w, g_sxy);

    // d(mean ssim)/d(gray pixel), then spread across channels. The leading
    // minus sign turns the similarity gradient into the loss gradient.
    const double norm = -1.0 / (static_cast<double>(pred.n()) * static_cast<double>(nwin));
    for (size_t i = 0; i < npix; ++i) {
      const double gpix = g_mu[i] + g_sxx[i] * 2.0 * x[i] + g_sxy[i] * y[i];
      const S gc = static_cast<S>(norm * gpix / C);
      for (int c = 0; c < C; ++c) out.grad.data()[pred.offset(item, c, 0, 0) + i] += gc;
    }
  }

  out.value = 1.0 - total / (static_cast<double>(pred.n()) * static_cast<double>(nwin));
  return out;
}

}  // namespace detail

}  // namespace fdz::losses
