#pragma once

#include "fdz/tensor.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace fdz::nn {

template <typename S>
struct Param {
  std::string name;
  Tensor4<S> value;
};

// A differentiable graph node. Inputs arrive as pointers into the graph's
// activation store; backward adds into pre-zeroed input-gradient buffers so
// fan-out accumulates naturally. Layers may cache forward context; a layer
// instance therefore serves exactly one graph position and calls must be
// externally synchronized.
template <typename S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual const char* kind() const = 0;
  virtual Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool training) = 0;
  virtual void backward(const std::vector<const Tensor4<S>*>& in, const Tensor4<S>& out,
                        const Tensor4<S>& grad_out, const std::vector<Tensor4<S>*>& grad_in) = 0;
  virtual std::vector<Param<S>*> params() { return {}; }
  // Non-learnable persistent state (running statistics); serialized with
  // checkpoints but excluded from parameter counts.
  virtual std::vector<Param<S>*> state() { return {}; }

  size_t param_count() {
    size_t n = 0;
    for (auto* p : params()) n += p->value.count();
    return n;
  }
};

inline int conv_out_dim(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }
inline int conv_transpose_out_dim(int in, int k, int s, int p, int op) {
  return (in - 1) * s - 2 * p + k + op;
}

namespace detail {

template <typename S>
using MatCM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using MapRM =
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMapRM =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Patch matrix for one item: rows = C*k*k, cols = out_h*out_w.
template <typename S>
void im2col(const S* src, int c, int h, int w, int k, int stride, int pad, MatCM<S>& col) {
  const int oh = conv_out_dim(h, k, stride, pad);
  const int ow = conv_out_dim(w, k, stride, pad);
  col.setZero(c * k * k, static_cast<Eigen::Index>(oh) * ow);
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const int row = (ch * k + ky) * k + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int sy = oy * stride - pad + ky;
          if (sy < 0 || sy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int sx = ox * stride - pad + kx;
            if (sx < 0 || sx >= w) continue;
            col(row, static_cast<Eigen::Index>(oy) * ow + ox) =
                src[(static_cast<size_t>(ch) * h + sy) * w + sx];
          }
        }
      }
}

// Adjoint of im2col: scatter-add patch columns back onto the image grid.
template <typename S>
void col2im(const MatCM<S>& col, int c, int h, int w, int k, int stride, int pad, S* dst) {
  const int oh = conv_out_dim(h, k, stride, pad);
  const int ow = conv_out_dim(w, k, stride, pad);
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const int row = (ch * k + ky) * k + kx;
        for (int oy = 0; oy < oh; ++oy) {
          const int sy = oy * stride - pad + ky;
          if (sy < 0 || sy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int sx = ox * stride - pad + kx;
            if (sx < 0 || sx >= w) continue;
            dst[(static_cast<size_t>(ch) * h + sy) * w + sx] +=
                col(row, static_cast<Eigen::Index>(oy) * ow + ox);
          }
        }
      }
}

template <typename S>
void he_uniform_fill(Tensor4<S>& t, int fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> d(-bound, bound);
  for (size_t i = 0; i < t.count(); ++i) t.data()[i] = static_cast<S>(d(rng));
}

}  // namespace detail

// Cross-correlation (no kernel flip) plus optional bias.
// Weight layout: (out_c, in_c, k, k).
template <typename S>
class Conv2d final : public Layer<S> {
 public:
  Conv2d(std::string name, int in_c, int out_c, int k, int stride, int pad, bool bias,
         std::mt19937_64& rng)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad), has_bias_(bias) {
    weight_.name = name + ".weight";
    weight_.value = Tensor4<S>(out_c, in_c, k, k);
    detail::he_uniform_fill(weight_.value, in_c * k * k, rng);
    if (has_bias_) {
      bias_.name = name + ".bias";
      bias_.value = Tensor4<S>(1, out_c, 1, 1);
    }
  }

  const char* kind() const override { return "conv"; }

  Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool) override {
    const Tensor4<S>& x = *in[0];
    if (x.c() != in_c_) throw std::invalid_argument("conv: channel mismatch");
    const int oh = conv_out_dim(x.h(), k_, stride_, pad_);
    const int ow = conv_out_dim(x.w(), k_, stride_, pad_);
    if (oh < 1 || ow < 1) throw std::invalid_argument("conv: output would be empty");
    Tensor4<S> y(x.n(), out_c_, oh, ow);
    detail::ConstMapRM<S> wmat(weight_.value.data(), out_c_, in_c_ * k_ * k_);
    detail::MatCM<S> col;
    for (int item = 0; item < x.n(); ++item) {
      detail::im2col(x.data() + x.offset(item, 0, 0, 0), in_c_, x.h(), x.w(), k_, stride_, pad_,
                     col);
      detail::MapRM<S> ymat(y.data() + y.offset(item, 0, 0, 0), out_c_,
                            static_cast<Eigen::Index>(oh) * ow);
      ymat.noalias() = wmat * col;
      if (has_bias_)
        for (int oc = 0; oc < out_c_; ++oc) ymat.row(oc).array() += bias_.value.data()[oc];
    }
    return y;
  }

  void backward(const std::vector<const Tensor4<S>*>& in, const Tensor4<S>& out,
                const Tensor4<S>& g, const std::vector<Tensor4<S>*>& grad_in) override {
    const Tensor4<S>& x = *in[0];
    weight_.value.ensure_grad();
    if (has_bias_) bias_.value.ensure_grad();
    detail::ConstMapRM<S> wmat(weight_.value.data(), out_c_, in_c_ * k_ * k_);
    detail::MapRM<S> dw(weight_.value.grad_data(), out_c_, in_c_ * k_ * k_);
    const Eigen::Index opix = static_cast<Eigen::Index>(out.h()) * out.w();
    detail::MatCM<S> col, dcol;
    for (int item = 0; item < x.n(); ++item) {
      detail::ConstMapRM<S> gmat(g.data() + g.offset(item, 0, 0, 0), out_c_, opix);
      detail::im2col(x.data() + x.offset(item, 0, 0, 0), in_c_, x.h(), x.w(), k_, stride_, pad_,
                     col);
      dw.noalias() += gmat * col.transpose();
      if (has_bias_)
        for (int oc = 0; oc < out_c_; ++oc) bias_.value.grad_data()[oc] += gmat.row(oc).sum();
      if (grad_in[0]) {
        dcol.noalias() = wmat.transpose() * gmat;
        detail::col2im(dcol, in_c_, x.h(), x.w(), k_, stride_, pad_,
                       grad_in[0]->data() + grad_in[0]->offset(item, 0, 0, 0));
      }
    }
  }

  std::vector<Param<S>*> params() override {
    std::vector<Param<S>*> p{&weight_};
    if (has_bias_) p.push_back(&bias_);
    return p;
  }

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  bool has_bias_;
  Param<S> weight_, bias_;
};

// Transposed convolution: the adjoint of Conv2d(k, stride, pad) as a linear
// map. Output dims (in-1)*stride - 2*pad + k + output_padding; the extra
// output_padding term resolves the output-size ambiguity of strided
// convolution. Weight layout: (in_c, out_c, k, k).
template <typename S>
class ConvTranspose2d final : public Layer<S> {
 public:
  ConvTranspose2d(std::string name, int in_c, int out_c, int k, int stride, int pad, int out_pad,
                  bool bias, std::mt19937_64& rng)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad), out_pad_(out_pad),
        has_bias_(bias) {
    if (out_pad < 0 || out_pad >= stride)
      throw std::invalid_argument("conv_transpose: output_padding must be in [0, stride)");
    weight_.name = name + ".weight";
    weight_.value = Tensor4<S>(in_c, out_c, k, k);
    detail::he_uniform_fill(weight_.value, out_c * k * k, rng);
    if (has_bias_) {
      bias_.name = name + ".bias";
      bias_.value = Tensor4<S>(1, out_c, 1, 1);
    }
  }

  const char* kind() const override { return "conv_transpose"; }

  Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool) override {
    const Tensor4<S>& x = *in[0];
    if (x.c() != in_c_) throw std::invalid_argument("conv_transpose: channel mismatch");
    const int oh = conv_transpose_out_dim(x.h(), k_, stride_, pad_, out_pad_);
    const int ow = conv_transpose_out_dim(x.w(), k_, stride_, pad_, out_pad_);
    if (oh < 1 || ow < 1) throw std::invalid_argument("conv_transpose: output would be empty");
    Tensor4<S> y(x.n(), out_c_, oh, ow);
    detail::ConstMapRM<S> wmat(weight_.value.data(), in_c_, out_c_ * k_ * k_);
    const Eigen::Index ipix = static_cast<Eigen::Index>(x.h()) * x.w();
    detail::MatCM<S> dcol;
    for (int item = 0; item < x.n(); ++item) {
      detail::ConstMapRM<S> xmat(x.data() + x.offset(item, 0, 0, 0), in_c_, ipix);
      dcol.noalias() = wmat.transpose() * xmat;
      detail::col2im(dcol, out_c_, oh, ow, k_, stride_, pad_, y.data() + y.offset(item, 0, 0, 0));
      if (has_bias_) {
        detail::MapRM<S> ymat(y.data() + y.offset(item, 0, 0, 0), out_c_,
                              static_cast<Eigen::Index>(oh) * ow);
        for (int oc = 0; oc < out_c_; ++oc) ymat.row(oc).array() += bias_.value.data()[oc];
      }
    }
    return y;
  }

  void backward(const std::vector<const Tensor4<S>*>& in, const Tensor4<S>& out,
                const Tensor4<S>& g, const std::vector<Tensor4<S>*>& grad_in) override {
    const Tensor4<S>& x = *in[0];
    weight_.value.ensure_grad();
    if (has_bias_) bias_.value.ensure_grad();
    detail::ConstMapRM<S> wmat(weight_.value.data(), in_c_, out_c_ * k_ * k_);
    detail::MapRM<S> dw(weight_.value.grad_data(), in_c_, out_c_ * k_ * k_);
    const Eigen::Index ipix = static_cast<Eigen::Index>(x.h()) * x.w();
    detail::MatCM<S> gcol;
    for (int item = 0; item < x.n(); ++item) {
      detail::ConstMapRM<S> xmat(x.data() + x.offset(item, 0, 0, 0), in_c_, ipix);
      detail::im2col(g.data() + g.offset(item, 0, 0, 0), out_c_, out.h(), out.w(), k_, stride_,
                     pad_, gcol);
      dw.noalias() += xmat * gcol.transpose();
      if (has_bias_) {
        detail::ConstMapRM<S> gmat(g.data() + g.offset(item, 0, 0, 0), out_c_,
                                   static_cast<Eigen::Index>(out.h()) * out.w());
        for (int oc = 0; oc < out_c_; ++oc) bias_.value.grad_data()[oc] += gmat.row(oc).sum();
      }
      if (grad_in[0]) {
        detail::MapRM<S> dx(grad_in[0]->data() + grad_in[0]->offset(item, 0, 0, 0), in_c_, ipix);
        dx.noalias() += wmat * gcol;
      }
    }
  }

  std::vector<Param<S>*> params() override {
    std::vector<Param<S>*> p{&weight_};
    if (has_bias_) p.push_back(&bias_);
    return p;
  }

 private:
  int in_c_, out_c_, k_, stride_, pad_, out_pad_;
  bool has_bias_;
  Param<S> weight_, bias_;
};

// Per-channel batch standardization with affine scale/shift. Training mode
// normalizes by batch statistics (eps 1e-5) and updates running statistics
// with momentum 0.1 (unbiased variance, matching the usual framework
// convention); eval mode normalizes by the running statistics.
template <typename S>
class BatchNorm2d final : public Layer<S> {
 public:
  BatchNorm2d(std::string name, int c, S eps = S(1e-5), S momentum = S(0.1))
      : c_(c), eps_(eps), momentum_(momentum) {
    gamma_.name = name + ".weight";
    gamma_.value = Tensor4<S>(1, c, 1, 1, S(1));
    beta_.name = name + ".bias";
    beta_.value = Tensor4<S>(1, c, 1, 1, S(0));
    running_mean_.name = name + ".running_mean";
    running_mean_.value = Tensor4<S>(1, c, 1, 1, S(0));
    running_var_.name = name + ".running_var";
    running_var_.value = Tensor4<S>(1, c, 1, 1, S(1));
  }

  const char* kind() const override { return "batchnorm"; }

  Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool training) override {
    const Tensor4<S>& x = *in[0];
    if (x.c() != c_) throw std::invalid_argument("batchnorm: channel mismatch");
    const long m = static_cast<long>(x.n()) * x.h() * x.w();
    if (training && m < 2) throw std::invalid_argument("batchnorm: degenerate batch in train mode");
    trained_ = training;
    Tensor4<S> y(x.n(), x.c(), x.h(), x.w());
    xhat_ = Tensor4<S>::zeros_like(x);
    inv_std_.assign(c_, S(0));

    for (int c = 0; c < c_; ++c) {
      S mean, var;
      if (training) {
        double sum = 0.0, sq = 0.0;
        for (int n = 0; n < x.n(); ++n) {
          const S* p = x.data() + x.offset(n, c, 0, 0);
          for (long i = 0; i < static_cast<long>(x.h()) * x.w(); ++i) {
            sum += p[i];
            sq += static_cast<double>(p[i]) * p[i];
          }
        }
        mean = static_cast<S>(sum / m);
        var = static_cast<S>(sq / m - (sum / m) * (sum / m));
        if (var < 0) var = 0;
        running_mean_.value.data()[c] =
            (S(1) - momentum_) * running_mean_.value.data()[c] + momentum_ * mean;
        const S var_unbiased = m > 1 ? var * static_cast<S>(m) / static_cast<S>(m - 1) : var;
        running_var_.value.data()[c] =
            (S(1) - momentum_) * running_var_.value.data()[c] + momentum_ * var_unbiased;
      } else {
        mean = running_mean_.value.data()[c];
        var = running_var_.value.data()[c];
      }
      const S istd = S(1) / std::sqrt(var + eps_);
      inv_std_[c] = istd;
      const S gm = gamma_.value.data()[c];
      const S bt = beta_.value.data()[c];
      for (int n = 0; n < x.n(); ++n) {
        const S* p = x.data() + x.offset(n, c, 0, 0);
        S* ph = xhat_.data() + xhat_.offset(n, c, 0, 0);
        S* py = y.data() + y.offset(n, c, 0, 0);
        for (long i = 0; i < static_cast<long>(x.h()) * x.w(); ++i) {
          ph[i] = (p[i] - mean) * istd;
          py[i] = gm * ph[i] + bt;
        }
      }
    }
    return y;
  }

  void backward(const std::vector<const Tensor4<S>*>& in, const Tensor4<S>&, const Tensor4<S>& g,
                const std::vector<Tensor4<S>*>& grad_in) override {
    const Tensor4<S>& x = *in[0];
    gamma_.value.ensure_grad();
    beta_.value.ensure_grad();
    const long m = static_cast<long>(x.n()) * x.h() * x.w();
    for (int c = 0; c < c_; ++c) {
      double sum_g = 0.0, sum_gx = 0.0;
      for (int n = 0; n < x.n(); ++n) {
        const S* pg = g.data() + g.offset(n, c, 0, 0);
        const S* ph = xhat_.data() + xhat_.offset(n, c, 0, 0);
        for (long i = 0; i < static_cast<long>(x.h()) * x.w(); ++i) {
          sum_g += pg[i];
          sum_gx += static_cast<double>(pg[i]) * ph[i];
        }
      }
      gamma_.value.grad_data()[c] += static_cast<S>(sum_gx);
      beta_.value.grad_data()[c] += static_cast<S>(sum_g);
      if (!grad_in[0]) continue;
      const S gm = gamma_.value.data()[c];
      const S istd = inv_std_[c];
      const S mg = static_cast<S>(sum_g / m);
      const S mgx = static_cast<S>(sum_gx / m);
      for (int n = 0; n < x.n(); ++n) {
        const S* pg = g.data() + g.offset(n, c, 0, 0);
        const S* ph = xhat_.data() + xhat_.offset(n, c, 0, 0);
        S* pd = grad_in[0]->data() + grad_in[0]->offset(n, c, 0, 0);
        if (trained_) {
          for (long i = 0; i < static_cast<long>(x.h()) * x.w(); ++i)
            pd[i] += gm * istd * (pg[i] - mg - ph[i] * mgx);
        } else {
          for (long i = 0; i < static_cast<long>(x.h()) * x.w(); ++i) pd[i] += gm * istd * pg[i];
        }
      }
    }
  }

  std::vector<Param<S>*> params() override { return {&gamma_, &beta_}; }
  std::vector<Param<S>*> state() override { return {&running_mean_, &running_var_}; }

 private:
  int c_;
  S eps_, momentum_;
  bool trained_ = false;
  Param<S> gamma_, beta_, running_mean_, running_var_;
  Tensor4<S> xhat_;
  std::vector<S> inv_std_;
};

template <typename S>
class ReLU final : public Layer<S> {
 public:
  const char* kind() const override { return "relu"; }
  Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool) override {
    const Tensor4<S>& x = *in[0];
    Tensor4<S> y = x;
    for (size_t i = 0; i < y.count(); ++i)
      if (y.data()[i] < S(0)) y.data()[i] = S(0);
    return y;
  }
  void backward(const std::vector<const Tensor4<S>*>& in, const Tensor4<S>&, const Tensor4<S>& g,
                const std::vector<Tensor4<S>*>& grad_in) override {
    if (!grad_in[0]) return;
    const Tensor4<S>& x = *in[0];
    for (size_t i = 0; i < x.count(); ++i)
      if (x.data()[i] > S(0)) grad_in[0]->data()[i] += g.data()[i];
  }
};

template <typename S>
class Sigmoid final : public Layer<S> {
 public:
  const char* kind() const override { return "sigmoid"; }
  Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool) override {
    const Tensor4<S>& x = *in[0];
    Tensor4<S> y = x;
    for (size_t i = 0; i < y.count(); ++i) {
      const S v = x.data()[i];
      if (v >= S(0)) {
        y.data()[i] = S(1) / (S(1) + std::exp(-v));
      } else {
        const S e = std::exp(v);
        y.data()[i] = e / (S(1) + e);
      }
    }
    return y;
  }
  void backward(const std::vector<const Tensor4<S>*>&, const Tensor4<S>& out, const Tensor4<S>& g,
                const std::vector<Tensor4<S>*>& grad_in) override {
    if (!grad_in[0]) return;
    for (size_t i = 0; i < out.count(); ++i) {
      const S y = out.data()[i];
      grad_in[0]->data()[i] += g.data()[i] * y * (S(1) - y);
    }
  }
};

// Max pooling with implicit -inf padding. Ties resolve to the first maximum
// in scan order; the argmax is cached for the backward pass.
template <typename S>
class MaxPool2d final : public Layer<S> {
 public:
  MaxPool2d(int k, int stride, int pad = 0) : k_(k), stride_(stride), pad_(pad) {}
  const char* kind() const override { return "maxpool"; }

  Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool) override {
    const Tensor4<S>& x = *in[0];
    const int oh = conv_out_dim(x.h(), k_, stride_, pad_);
    const int ow = conv_out_dim(x.w(), k_, stride_, pad_);
    Tensor4<S> y(x.n(), x.c(), oh, ow);
    argmax_.assign(y.count(), 0);
    size_t oi = 0;
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < x.c(); ++c)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox, ++oi) {
            S best = -std::numeric_limits<S>::infinity();
            size_t best_idx = 0;
            for (int ky = 0; ky < k_; ++ky) {
              const int sy = oy * stride_ - pad_ + ky;
              if (sy < 0 || sy >= x.h()) continue;
              for (int kx = 0; kx < k_; ++kx) {
                const int sx = ox * stride_ - pad_ + kx;
                if (sx < 0 || sx >= x.w()) continue;
                const size_t idx = x.offset(n, c, sy, sx);
                if (x.data()[idx] > best) {
                  best = x.data()[idx];
                  best_idx = idx;
                }
              }
            }
            y.data()[oi] = best;
            argmax_[oi] = best_idx;
          }
    return y;
  }

  void backward(const std::vector<const Tensor4<S>*>&, const Tensor4<S>& out, const Tensor4<S>& g,
                const std::vector<Tensor4<S>*>& grad_in) override {
    if (!grad_in[0]) return;
    for (size_t i = 0; i < out.count(); ++i) grad_in[0]->data()[argmax_[i]] += g.data()[i];
  }

 private:
  int k_, stride_, pad_;
  std::vector<size_t> argmax_;
};

// Adaptive average pooling over per-output cells [floor(i*H/O), ceil((i+1)*H/O)).
template <typename S>
class AdaptiveAvgPool2d final : public Layer<S> {
 public:
  AdaptiveAvgPool2d(int oh, int ow) : oh_(oh), ow_(ow) {}
  const char* kind() const override { return "adaptive_avgpool"; }

  Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool) override {
    const Tensor4<S>& x = *in[0];
    Tensor4<S> y(x.n(), x.c(), oh_, ow_);
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < x.c(); ++c)
        for (int oy = 0; oy < oh_; ++oy) {
          const int y0 = (oy * x.h()) / oh_;
          const int y1 = ((oy + 1) * x.h() + oh_ - 1) / oh_;
          for (int ox = 0; ox < ow_; ++ox) {
            const int x0 = (ox * x.w()) / ow_;
            const int x1 = ((ox + 1) * x.w() + ow_ - 1) / ow_;
            double sum = 0.0;
            for (int sy = y0; sy < y1; ++sy)
              for (int sx = x0; sx < x1; ++sx) sum += x.at(n, c, sy, sx);
            y.at(n, c, oy, ox) = static_cast<S>(sum / ((y1 - y0) * (x1 - x0)));
          }
        }
    return y;
  }

  void backward(const std::vector<const Tensor4<S>*>& in, const Tensor4<S>&, const Tensor4<S>& g,
                const std::vector<Tensor4<S>*>& grad_in) override {
    if (!grad_in[0]) return;
    const Tensor4<S>& x = *in[0];
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < x.c(); ++c)
        for (int oy = 0; oy < oh_; ++oy) {
          const int y0 = (oy * x.h()) / oh_;
          const int y1 = ((oy + 1) * x.h() + oh_ - 1) / oh_;
          for (int ox = 0; ox < ow_; ++ox) {
            const int x0 = (ox * x.w()) / ow_;
            const int x1 = ((ox + 1) * x.w() + ow_ - 1) / ow_;
            const S share = g.at(n, c, oy, ox) / static_cast<S>((y1 - y0) * (x1 - x0));
            for (int sy = y0; sy < y1; ++sy)
              for (int sx = x0; sx < x1; ++sx) grad_in[0]->at(n, c, sy, sx) += share;
          }
        }
  }

 private:
  int oh_, ow_;
};

// Bilinear upsampling with the half-pixel (align-corners = false) convention.
// Target size is either fixed at construction or, when a second input is
// given, taken from that input's spatial dims (the reference carries shape
// only and receives no gradient).
template <typename S>
class UpsampleBilinear final : public Layer<S> {
 public:
  UpsampleBilinear(int oh, int ow) : oh_(oh), ow_(ow) {}
  UpsampleBilinear() = default;  // size from reference input
  const char* kind() const override { return "upsample_bilinear"; }

  Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool) override {
    const Tensor4<S>& x = *in[0];
    const int oh = in.size() > 1 ? in[1]->h() : oh_;
    const int ow = in.size() > 1 ? in[1]->w() : ow_;
    if (oh < 1 || ow < 1) throw std::invalid_argument("upsample_bilinear: no target size");
    Tensor4<S> y(x.n(), x.c(), oh, ow);
    apply<false>(x, y, nullptr, nullptr, oh, ow);
    return y;
  }

  void backward(const std::vector<const Tensor4<S>*>& in, const Tensor4<S>& out,
                const Tensor4<S>& g, const std::vector<Tensor4<S>*>& grad_in) override {
    if (!grad_in[0]) return;
    apply<true>(*in[0], const_cast<Tensor4<S>&>(g), grad_in[0], &g, out.h(), out.w());
  }

 private:
  // Shared index/weight walk: forward gathers, backward scatters.
  template <bool Backward>
  void apply(const Tensor4<S>& x, Tensor4<S>& y, Tensor4<S>* dx, const Tensor4<S>* g, int oh_,
             int ow_) const {
    const double ry = static_cast<double>(x.h()) / oh_;
    const double rx = static_cast<double>(x.w()) / ow_;
    for (int oy = 0; oy < oh_; ++oy) {
      const double sy = (oy + 0.5) * ry - 0.5;
      int y0 = static_cast<int>(std::floor(sy));
      const S wy = static_cast<S>(sy - y0);
      const int y1 = std::min(y0 + 1, x.h() - 1);
      y0 = std::clamp(y0, 0, x.h() - 1);
      for (int ox = 0; ox < ow_; ++ox) {
        const double sx = (ox + 0.5) * rx - 0.5;
        int x0 = static_cast<int>(std::floor(sx));
        const S wx = static_cast<S>(sx - x0);
        const int x1 = std::min(x0 + 1, x.w() - 1);
        x0 = std::clamp(x0, 0, x.w() - 1);
        const S w00 = (S(1) - wy) * (S(1) - wx), w01 = (S(1) - wy) * wx;
        const S w10 = wy * (S(1) - wx), w11 = wy * wx;
        for (int n = 0; n < x.n(); ++n)
          for (int c = 0; c < x.c(); ++c) {
            if constexpr (Backward) {
              const S gv = g->at(n, c, oy, ox);
              dx->at(n, c, y0, x0) += w00 * gv;
              dx->at(n, c, y0, x1) += w01 * gv;
              dx->at(n, c, y1, x0) += w10 * gv;
              dx->at(n, c, y1, x1) += w11 * gv;
            } else {
              y.at(n, c, oy, ox) = w00 * x.at(n, c, y0, x0) + w01 * x.at(n, c, y0, x1) +
                                   w10 * x.at(n, c, y1, x0) + w11 * x.at(n, c, y1, x1);
            }
          }
      }
    }
  }

  int oh_ = 0, ow_ = 0;
};

// Elementwise sum of two stage-matched tensors.
template <typename S>
class AddSkip final : public Layer<S> {
 public:
  const char* kind() const override { return "add_skip"; }
  Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool) override {
    if (!in[0]->same_shape(*in[1])) throw std::invalid_argument("add_skip: shape mismatch");
    Tensor4<S> y = *in[0];
    y.flat() += in[1]->flat();
    return y;
  }
  void backward(const std::vector<const Tensor4<S>*>&, const Tensor4<S>&, const Tensor4<S>& g,
                const std::vector<Tensor4<S>*>& grad_in) override {
    for (auto* gi : grad_in)
      if (gi) gi->flat() += g.flat();
  }
};

// Channel concatenation of any number of spatially matched inputs.
template <typename S>
class Concat final : public Layer<S> {
 public:
  const char* kind() const override { return "concat"; }
  Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool) override {
    int total_c = 0;
    for (auto* t : in) {
      if (t->n() != in[0]->n() || t->h() != in[0]->h() || t->w() != in[0]->w())
        throw std::invalid_argument("concat: spatial shape mismatch");
      total_c += t->c();
    }
    Tensor4<S> y(in[0]->n(), total_c, in[0]->h(), in[0]->w());
    for (int n = 0; n < y.n(); ++n) {
      int c0 = 0;
      for (auto* t : in) {
        std::copy(t->data() + t->offset(n, 0, 0, 0),
                  t->data() + t->offset(n, 0, 0, 0) + static_cast<size_t>(t->c()) * t->h() * t->w(),
                  y.data() + y.offset(n, c0, 0, 0));
        c0 += t->c();
      }
    }
    return y;
  }
  void backward(const std::vector<const Tensor4<S>*>& in, const Tensor4<S>&, const Tensor4<S>& g,
                const std::vector<Tensor4<S>*>& grad_in) override {
    for (int n = 0; n < g.n(); ++n) {
      int c0 = 0;
      for (size_t i = 0; i < in.size(); ++i) {
        const size_t chunk = static_cast<size_t>(in[i]->c()) * in[i]->h() * in[i]->w();
        if (grad_in[i]) {
          const S* src = g.data() + g.offset(n, c0, 0, 0);
          S* dst = grad_in[i]->data() + grad_in[i]->offset(n, 0, 0, 0);
          for (size_t j = 0; j < chunk; ++j) dst[j] += src[j];
        }
        c0 += in[i]->c();
      }
    }
  }
};

// Differentiable haze-equation inversion: inputs (I, t, A) with t a
// single-channel map broadcast across I's channels. Produces
// clamp((I - A*(1-t')) / t', 0, 1) with t' = max(t, t_min). Gradients flow to
// t and A (and I) only where the clamp is inactive; the t' floor zeroes the
// transmission gradient below t_min.
template <typename S>
class ImageFormation final : public Layer<S> {
 public:
  explicit ImageFormation(S t_min) : t_min_(t_min) {}
  const char* kind() const override { return "image_formation"; }

  Tensor4<S> forward(const std::vector<const Tensor4<S>*>& in, bool) override {
    const Tensor4<S>& I = *in[0];
    const Tensor4<S>& t = *in[1];
    const Tensor4<S>& A = *in[2];
    if (t.c() != 1 || !I.same_shape(A) || t.n() != I.n() || t.h() != I.h() || t.w() != I.w())
      throw std::invalid_argument("image_formation: shape mismatch");
    Tensor4<S> y(I.n(), I.c(), I.h(), I.w());
    raw_ = Tensor4<S>::zeros_like(y);
    for (int n = 0; n < I.n(); ++n)
      for (int c = 0; c < I.c(); ++c)
        for (int py = 0; py < I.h(); ++py)
          for (int px = 0; px < I.w(); ++px) {
            const S tp = std::max(t.at(n, 0, py, px), t_min_);
            const S raw = (I.at(n, c, py, px) - A.at(n, c, py, px) * (S(1) - tp)) / tp;
            raw_.at(n, c, py, px) = raw;
            y.at(n, c, py, px) = std::clamp(raw, S(0), S(1));
          }
    return y;
  }

  void backward(const std::vector<const Tensor4<S>*>& in, const Tensor4<S>&, const Tensor4<S>& g,
                const std::vector<Tensor4<S>*>& grad_in) override {
    const Tensor4<S>& I = *in[0];
    const Tensor4<S>& t = *in[1];
    const Tensor4<S>& A = *in[2];
    for (int n = 0; n < I.n(); ++n)
      for (int py = 0; py < I.h(); ++py)
        for (int px = 0; px < I.w(); ++px) {
          const S tv = t.at(n, 0, py, px);
          const S tp = std::max(tv, t_min_);
          S dt_sum = S(0);
          for (int c = 0; c < I.c(); ++c) {
            const S raw = raw_.at(n, c, py, px);
            if (raw <= S(0) || raw >= S(1)) continue;
            const S gv = g.at(n, c, py, px);
            if (grad_in[0]) grad_in[0]->at(n, c, py, px) += gv / tp;
            if (grad_in[2]) grad_in[2]->at(n, c, py, px) += gv * (S(1) - S(1) / tp);
            // raw = (I - A)/t' + A, so d(raw)/dt' = -(I - A)/t'^2.
            dt_sum += gv * (-(I.at(n, c, py, px) - A.at(n, c, py, px)) / (tp * tp));
          }
          if (grad_in[1] && tv > t_min_) grad_in[1]->at(n, 0, py, px) += dt_sum;
        }
  }

 private:
  S t_min_;
  Tensor4<S> raw_;
};

}  // namespace fdz::nn
