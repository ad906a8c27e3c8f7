#pragma once

#include "fdz/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fdz::training {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers for one parameter tensor.
template <typename S>
struct AdamSlot {
  std::vector<S> m, v;
};

// Bias-corrected Adam over a fixed parameter list. The step counter is shared
// so one step() call advances every tensor consistently.
template <typename S>
class Adam {
 public:
  Adam(std::vector<nn::Param<S>*> params, AdamConfig cfg)
      : params_(std::move(params)), cfg_(cfg), slots_(params_.size()) {
    for (size_t i = 0; i < params_.size(); ++i) {
      slots_[i].m.assign(params_[i]->value.count(), S(0));
      slots_[i].v.assign(params_[i]->value.count(), S(0));
    }
  }

  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  long step_count() const { return t_; }

  // Applies one update from the gradients currently stored on the parameter
  // tensors. Throws on non-finite gradients.
  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      nn::Param<S>& p = *params_[i];
      p.value.ensure_grad();
      AdamSlot<S>& s = slots_[i];
      for (size_t j = 0; j < p.value.count(); ++j) {
        const double g = static_cast<double>(p.value.grad_data()[j]);
        if (!std::isfinite(g))
          throw std::runtime_error("adam: non-finite gradient in " + p.name);
        const double m = cfg_.beta1 * s.m[j] + (1.0 - cfg_.beta1) * g;
        const double v = cfg_.beta2 * s.v[j] + (1.0 - cfg_.beta2) * g * g;
        s.m[j] = static_cast<S>(m);
        s.v[j] = static_cast<S>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        p.value.data()[j] -= static_cast<S>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

 private:
  std::vector<nn::Param<S>*> params_;
  AdamConfig cfg_;
  std::vector<AdamSlot<S>> slots_;
  long t_ = 0;
};

}  // namespace fdz::training
