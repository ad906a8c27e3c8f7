#pragma once

#include "fdz/adam.hpp"
#include "fdz/checkpoint.hpp"
#include "fdz/losses.hpp"
#include "fdz/metrics.hpp"
#include "fdz/models.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

namespace fdz::training {

using losses::CompositeSpec;
using losses::LossKind;
using losses::LossSpec;
using losses::LossTarget;
using models::Model;
using nn::Tensor4;

// One training sample. Transmission and airlight truths are present only for
// synthesized datasets and are required by the MSE-x-4 and stage-wise
// regimes.
struct Sample {
  Image hazy;
  Image clean;
  std::optional<Raster> transmission;  // 1 channel
  std::optional<Image> airlight;       // 3 channels
};

struct TrainConfig {
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 1;
  int max_epochs = 100;
  int early_stop_patience = 10;
  std::uint64_t seed = 0;
  CompositeSpec objective = CompositeSpec::mse_x1();
  // Optional second phase: continue from the best-loss checkpoint with this
  // loss on the refined output (optimizer state reset).
  std::optional<LossSpec> refinement;
  int refinement_max_epochs = 0;  // 0 = same as max_epochs
  std::string checkpoint_dir;     // empty = keep snapshots in memory only

  void validate() const {
    if (!(lr > 0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
    if (early_stop_patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
  }

  AdamConfig adam() const { return {lr, adam_beta1, adam_beta2, adam_eps}; }
};

struct EpochRecord {
  int epoch = 0;
  std::string phase;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_psnr;  // empty = identical to truth
  double val_ssim = 0.0;
  bool improved_loss = false;
  bool improved_ssim = false;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> phases;  // e.g. "MSE" or "stage1..stage4"
  std::string stop_reason;          // early_stop | max_epochs | diverged

  int epochs_run() const { return static_cast<int>(epochs.size()); }

  std::string to_records() const {
    std::ostringstream os;
    for (const auto& e : epochs) {
      os << "epoch=" << e.epoch << "\tphase=" << e.phase << "\ttrain_loss=" << e.train_loss
         << "\tval_loss=" << e.val_loss << "\tval_psnr=";
      if (e.val_psnr)
        os << *e.val_psnr;
      else
        os << "inf";
      os << "\tval_ssim=" << e.val_ssim << "\timproved_loss=" << e.improved_loss
         << "\timproved_ssim=" << e.improved_ssim << "\n";
    }
    os << "stop_reason=" << stop_reason << "\n";
    return os.str();
  }
};

// Strict-improvement early stopping: stops after exactly `patience`
// consecutive non-improving observations.
class EarlyStopTracker {
 public:
  explicit EarlyStopTracker(int patience) : patience_(patience) {}

  struct Result {
    bool improved = false;
    bool stop = false;
  };

  Result observe(double val_loss) {
    Result r;
    if (val_loss < best_) {
      best_ = val_loss;
      bad_ = 0;
      r.improved = true;
    } else {
      ++bad_;
      r.stop = bad_ >= patience_;
    }
    return r;
  }

  double best() const { return best_; }

 private:
  int patience_;
  int bad_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

// Value snapshot of every parameter and state tensor, in graph order.
template <typename S>
struct ParamSnapshot {
  std::vector<std::vector<S>> values;
  bool empty() const { return values.empty(); }
};

template <typename S>
ParamSnapshot<S> capture_snapshot(Model<S>& m) {
  ParamSnapshot<S> snap;
  for (auto* p : m.graph.params())
    snap.values.emplace_back(p->value.data(), p->value.data() + p->value.count());
  for (auto* p : m.graph.state())
    snap.values.emplace_back(p->value.data(), p->value.data() + p->value.count());
  return snap;
}

template <typename S>
void restore_snapshot(Model<S>& m, const ParamSnapshot<S>& snap) {
  size_t i = 0;
  auto restore = [&](nn::Param<S>* p) {
    if (i >= snap.values.size() || snap.values[i].size() != p->value.count())
      throw std::invalid_argument("restore_snapshot: shape mismatch");
    std::copy(snap.values[i].begin(), snap.values[i].end(), p->value.data());
    ++i;
  };
  for (auto* p : m.graph.params()) restore(p);
  for (auto* p : m.graph.state()) restore(p);
  if (i != snap.values.size()) throw std::invalid_argument("restore_snapshot: tensor count mismatch");
}

template <typename S>
struct TrainResult {
  TrainHistory history;
  ParamSnapshot<S> best_loss;
  ParamSnapshot<S> best_ssim;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double best_val_ssim = -1.0;
};

template <typename S>
struct TrainOptions {
  CompositeSpec objective = CompositeSpec::mse_x1();
  std::vector<std::string> trainable_prefixes;  // empty = every parameter
  std::set<int> gradient_barriers;
  losses::ContentExtractor<S>* extractor = nullptr;
  std::string phase = "train";
};

namespace detail {

template <typename S>
Tensor4<S> stack_images(const std::vector<const Image*>& imgs) {
  const Image& first = *imgs[0];
  Tensor4<S> t(static_cast<int>(imgs.size()), 3, first.height(), first.width());
  for (size_t i = 0; i < imgs.size(); ++i) {
    if (!imgs[i]->same_shape(first))
      throw std::invalid_argument("batch: images in a batch must share dimensions");
    const Tensor4<S> one = models::image_to_tensor<S>(*imgs[i]);
    std::copy(one.data(), one.data() + one.count(), t.data() + t.offset(static_cast<int>(i), 0, 0, 0));
  }
  return t;
}

template <typename S>
Tensor4<S> stack_transmissions(const std::vector<const Sample*>& batch) {
  const Raster& first = *batch[0]->transmission;
  Tensor4<S> t(static_cast<int>(batch.size()), 1, first.height(), first.width());
  for (size_t i = 0; i < batch.size(); ++i) {
    if (!batch[i]->transmission)
      throw std::invalid_argument("batch: sample lacks a transmission truth");
    const Raster& r = *batch[i]->transmission;
    for (int y = 0; y < r.height(); ++y)
      for (int x = 0; x < r.width(); ++x) t.at(static_cast<int>(i), 0, y, x) = static_cast<S>(r.at(y, x));
  }
  return t;
}

// Truth tensors for every target the objective touches.
template <typename S>
std::map<LossTarget, Tensor4<S>> assemble_truths(const std::vector<const Sample*>& batch,
                                                 const CompositeSpec& spec) {
  std::map<LossTarget, Tensor4<S>> truths;
  std::vector<const Image*> cleans;
  for (const Sample* s : batch) cleans.push_back(&s->clean);
  for (const auto& [target, term] : spec.terms) {
    if (truths.count(target)) continue;
    switch (target) {
      case LossTarget::refined:
      case LossTarget::dehazed:
        truths.emplace(target, stack_images<S>(cleans));
        break;
      case LossTarget::transmission:
        truths.emplace(target, stack_transmissions<S>(batch));
        break;
      case LossTarget::airlight: {
        std::vector<const Image*> lights;
        for (const Sample* s : batch) {
          if (!s->airlight) throw std::invalid_argument("batch: sample lacks an airlight truth");
          lights.push_back(&*s->airlight);
        }
        truths.emplace(target, stack_images<S>(lights));
        break;
      }
    }
  }
  return truths;
}

inline const char* tap_for_target(LossTarget t) {
  switch (t) {
    case LossTarget::refined: return "refined";
    case LossTarget::dehazed: return "j_hat";
    case LossTarget::transmission: return "t_hat";
    case LossTarget::airlight: return "a_hat";
  }
  return "refined";
}

// Forward + composite loss; seeds the per-tap gradients when train is set.
template <typename S>
double run_batch(Model<S>& m, const std::vector<const Sample*>& batch,
                 const TrainOptions<S>& opt, bool training, bool do_backward) {
  std::vector<const Image*> hazies;
  for (const Sample* s : batch) hazies.push_back(&s->hazy);
  const Tensor4<S> input = stack_images<S>(hazies);
  models::forward_batch(m, input, training);

  std::map<LossTarget, Tensor4<S>> truths = assemble_truths<S>(batch, opt.objective);
  std::map<LossTarget, const Tensor4<S>*> outputs, truth_ptrs;
  for (const auto& [target, tensor] : truths) {
    const char* tap = tap_for_target(target);
    if (!m.graph.has_tap(tap))
      throw std::invalid_argument(std::string("objective targets '") + tap +
                                  "' but the model does not expose it");
    outputs.emplace(target, &m.graph.tap_value(tap));
    truth_ptrs.emplace(target, &tensor);
  }
  auto [loss, grads] = losses::composite_loss<S>(outputs, truth_ptrs, opt.objective, opt.extractor);
  if (do_backward) {
    std::vector<std::pair<int, const Tensor4<S>*>> seeds;
    for (const auto& [target, g] : grads)
      seeds.emplace_back(m.graph.tap_node(tap_for_target(target)), &g);
    m.graph.backward(seeds, false);
  }
  return loss;
}

template <typename S>
std::vector<nn::Param<S>*> trainable_params(Model<S>& m, const TrainOptions<S>& opt) {
  if (opt.trainable_prefixes.empty()) return m.graph.params();
  std::vector<nn::Param<S>*> out;
  for (auto* p : m.graph.params())
    for (const auto& prefix : opt.trainable_prefixes)
      if (p->name.rfind(prefix, 0) == 0) {
        out.push_back(p);
        break;
      }
  return out;
}

}  // namespace detail

// The epoch loop: seeded shuffle, batched forward/backward, Adam updates,
// per-epoch validation, two best-checkpoint slots (validation loss and
// validation SSIM), early stopping on validation-loss convergence.
// Single-threaded and deterministic for a fixed seed and data order.
template <typename S>
TrainResult<S> train_with_options(Model<S>& model, const std::vector<Sample>& train_set,
                                  const std::vector<Sample>& val_set, const TrainConfig& cfg,
                                  const TrainOptions<S>& opt) {
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("train: datasets must be nonempty");

  TrainResult<S> result;
  result.history.phases.push_back(opt.phase);
  Adam<S> adam(detail::trainable_params(model, opt), cfg.adam());
  model.graph.set_gradient_barriers(opt.gradient_barriers);
  EarlyStopTracker stopper(cfg.early_stop_patience);
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  result.history.stop_reason = "max_epochs";
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double train_loss_sum = 0.0;
    long batches = 0;
    bool diverged = false;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      std::vector<const Sample*> batch;
      for (size_t i = start; i < std::min(order.size(), start + static_cast<size_t>(cfg.batch_size)); ++i)
        batch.push_back(&train_set[order[i]]);
      model.graph.zero_param_grads();
      const double loss = detail::run_batch(model, batch, opt, true, true);
      if (!std::isfinite(loss)) {
        diverged = true;
        break;
      }
      adam.step();
      train_loss_sum += loss;
      ++batches;
    }
    if (diverged) {
      result.history.stop_reason = "diverged";
      break;
    }

    // Validation pass (eval mode, batch of one).
    double val_loss_sum = 0.0;
    double ssim_sum = 0.0;
    double psnr_sum = 0.0;
    int psnr_finite = 0;
    for (const Sample& s : val_set) {
      val_loss_sum += detail::run_batch(model, {&s}, opt, false, false);
      const Image out = models::tensor_to_image(model.graph.tap_value("refined"));
      ssim_sum += ssim(out, s.clean);
      if (auto db = psnr(out, s.clean)) {
        psnr_sum += *db;
        ++psnr_finite;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = opt.phase;
    rec.train_loss = batches ? train_loss_sum / batches : 0.0;
    rec.val_loss = val_loss_sum / static_cast<double>(val_set.size());
    rec.val_ssim = ssim_sum / static_cast<double>(val_set.size());
    if (psnr_finite > 0) rec.val_psnr = psnr_sum / psnr_finite;

    const auto es = stopper.observe(rec.val_loss);
    rec.improved_loss = es.improved;
    if (es.improved) {
      result.best_loss = capture_snapshot(model);
      result.best_val_loss = rec.val_loss;
      if (!cfg.checkpoint_dir.empty())
        save_checkpoint(model, cfg.checkpoint_dir + "/" + opt.phase + "_best_loss.fdhz");
    }
    if (rec.val_ssim > result.best_val_ssim) {
      rec.improved_ssim = true;
      result.best_ssim = capture_snapshot(model);
      result.best_val_ssim = rec.val_ssim;
      if (!cfg.checkpoint_dir.empty())
        save_checkpoint(model, cfg.checkpoint_dir + "/" + opt.phase + "_best_ssim.fdhz");
    }
    result.history.epochs.push_back(rec);
    if (es.stop) {
      result.history.stop_reason = "early_stop";
      break;
    }
  }
  model.graph.clear_gradient_barriers();
  return result;
}

template <typename S>
TrainResult<S> train(Model<S>& model, const std::vector<Sample>& train_set,
                     const std::vector<Sample>& val_set, const TrainConfig& cfg) {
  TrainOptions<S> opt;
  opt.objective = cfg.objective;
  opt.phase = "base";
  return train_with_options(model, train_set, val_set, cfg, opt);
}

template <typename S>
losses::ContentExtractor<S> snapshot_content_extractor(Model<S>& model);

// Continues training from a checkpoint with a refinement loss on the refined
// output. Optimizer state starts fresh; a content refinement snapshots the
// model's own stage-2 encoder as the frozen feature extractor.
template <typename S>
TrainResult<S> fine_tune(Model<S>& model, const ParamSnapshot<S>& checkpoint,
                         const LossSpec& refinement, const TrainConfig& cfg,
                         const std::vector<Sample>& train_set,
                         const std::vector<Sample>& val_set, const std::string& phase_name) {
  restore_snapshot(model, checkpoint);
  TrainOptions<S> opt;
  opt.objective = CompositeSpec{{{LossTarget::refined, refinement}}};
  opt.phase = phase_name;
  losses::ContentExtractor<S> extractor;
  if (refinement.kind == LossKind::content) {
    extractor = snapshot_content_extractor(model);
    opt.extractor = &extractor;
  }
  TrainConfig ft = cfg;
  if (cfg.refinement_max_epochs > 0) ft.max_epochs = cfg.refinement_max_epochs;
  return train_with_options(model, train_set, val_set, ft, opt);
}

// Builds the frozen content-loss feature extractor from the model's own
// encoder (stage-2 output), parameters copied by name.
template <typename S>
losses::ContentExtractor<S> snapshot_content_extractor(Model<S>& model) {
  const std::string prefix = model.kind == models::ModelKind::fastnet ? "encdec" : "trans";
  auto fragment = std::make_shared<nn::Graph<S>>(
      models::build_encoder_fragment<S>(model.cfg, prefix));
  std::map<std::string, nn::Param<S>*> source;
  for (auto* p : model.graph.params()) source[p->name] = p;
  for (auto* p : model.graph.state()) source[p->name] = p;
  auto copy_from_source = [&](nn::Param<S>* dst) {
    auto it = source.find(dst->name);
    if (it == source.end())
      throw std::logic_error("content extractor: missing source tensor " + dst->name);
    std::copy(it->second->value.data(), it->second->value.data() + it->second->value.count(),
              dst->value.data());
  };
  for (auto* p : fragment->params()) copy_from_source(p);
  for (auto* p : fragment->state()) copy_from_source(p);
  return losses::ContentExtractor<S>(fragment);
}

// Invoked after each stage completes (model holds that stage's best-loss
// parameters). Lets callers verify stage isolation without interrupting the
// protocol.
template <typename S>
using StageObserver = std::function<void(int stage, Model<S>& model, const TrainResult<S>& result)>;

// The four-stage protocol for the dual model: transmission branch alone,
// airlight branch alone, refinement head with both branches frozen, then
// end-to-end fine-tuning. Each stage runs the standard loop with its own
// early stopping.
template <typename S>
std::pair<TrainResult<S>, TrainHistory> train_stagewise(
    Model<S>& model, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
    const TrainConfig& cfg, const std::type_identity_t<StageObserver<S>>& observer = {}) {
  if (model.kind != models::ModelKind::dualfastnet)
    throw std::invalid_argument("train_stagewise: requires the dual model");
  for (const Sample& s : train_set)
    if (!s.transmission || !s.airlight)
      throw std::invalid_argument("train_stagewise: samples must carry t and A truths");

  TrainHistory combined;
  TrainResult<S> last;
  for (int stage = 1; stage <= 4; ++stage) {
    TrainOptions<S> opt;
    opt.phase = "stage" + std::to_string(stage);
    switch (stage) {
      case 1:
        opt.objective = CompositeSpec{{{LossTarget::transmission, {LossKind::mse}}}};
        opt.trainable_prefixes = {"trans."};
        break;
      case 2:
        opt.objective = CompositeSpec{{{LossTarget::airlight, {LossKind::mse}}}};
        opt.trainable_prefixes = {"air."};
        break;
      case 3:
        opt.objective = CompositeSpec{{{LossTarget::refined, {LossKind::mse}}}};
        opt.trainable_prefixes = {"refine."};
        opt.gradient_barriers = {model.graph.tap_node("t_hat"), model.graph.tap_node("a_hat")};
        break;
      case 4:
        opt.objective = CompositeSpec{{{LossTarget::refined, {LossKind::mse}}}};
        break;
    }
    last = train_with_options(model, train_set, val_set, cfg, opt);
    combined.phases.push_back(opt.phase);
    for (const auto& e : last.history.epochs) combined.epochs.push_back(e);
    combined.stop_reason = last.history.stop_reason;
    // Later stages continue from the best-loss parameters of this stage.
    if (!last.best_loss.empty()) restore_snapshot(model, last.best_loss);
    if (observer) observer(stage, model, last);
  }
  return {last, combined};
}

}  // namespace fdz::training
