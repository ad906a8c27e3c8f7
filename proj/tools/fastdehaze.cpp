// fastdehaze: command-line front end for haze synthesis, training,
// dehazing, evaluation, parameter accounting, gradient checking, and
// throughput benchmarking.

#include <CLI11.hpp>

#include "fdz/bench.hpp"
#include "fdz/config.hpp"
#include "fdz/dataset.hpp"
#include "fdz/fmap.hpp"
#include "fdz/gradcheck.hpp"
#include "fdz/training.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace fdz;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  bool seed_given = false;  // --seed on the command line beats a config value
  std::string config_path;
  KeyValueConfig config;

  void load_config() {
    if (config_path.empty()) {
      if (const char* env = std::getenv("FASTDEHAZE_CONFIG")) config_path = env;
    }
    if (!config_path.empty()) config = KeyValueConfig::parse_file(config_path);
    const std::uint64_t config_seed = config.get_u64("seed", seed);
    if (!seed_given) seed = config_seed;
  }
};

models::ModelKind parse_model_kind(const std::string& name) {
  if (name == "fastnet") return models::ModelKind::fastnet;
  if (name == "dualfastnet" || name == "dual") return models::ModelKind::dualfastnet;
  throw CLI::ValidationError("--model", "expected fastnet or dualfastnet, got " + name);
}

// Model configuration assembled from the config file with flags on top.
struct ModelFlags {
  std::string model = "fastnet";
  std::string encoder = "basic";
  int base_width = 0;
  std::string blocks;
  int feature_channels = 0;
  std::string scales;

  void attach(CLI::App* cmd) {
    cmd->add_option("--model", model, "fastnet | dualfastnet")->capture_default_str();
    cmd->add_option("--encoder", encoder, "basic | bottleneck");
    cmd->add_option("--base-width", base_width, "encoder base width (reference scale 64)");
    cmd->add_option("--blocks", blocks, "residual blocks per stage, e.g. 2,2,2,2");
    cmd->add_option("--feature-channels", feature_channels, "channels into the refinement head");
    cmd->add_option("--scales", scales, "refinement pooling grids, e.g. 1,2,4,8");
  }

  static std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> out;
    std::istringstream is(text);
    std::string part;
    while (std::getline(is, part, ','))
      try {
        out.push_back(std::stoi(part));
      } catch (const std::exception&) {
        throw CLI::ValidationError(what, "expected a comma-separated integer list");
      }
    if (out.empty()) throw CLI::ValidationError(what, "empty list");
    return out;
  }

  std::pair<models::ModelKind, models::FastNetConfig> resolve(
      const GlobalOpts& g, const CLI::App* cmd, models::FastNetConfig cfg = {}) const {
    std::string kind_name = g.config.get_string("model", "fastnet");
    std::string encoder_name = g.config.get_string("encoder", "basic");
    cfg.base_width = g.config.get_int("base_width", cfg.base_width);
    cfg.feature_channels = g.config.get_int("feature_channels", cfg.feature_channels);
    std::vector<int> blocks_list =
        g.config.get_int_list("blocks", {cfg.blocks_per_stage.begin(), cfg.blocks_per_stage.end()});
    cfg.refinement_scales = g.config.get_int_list("scales", cfg.refinement_scales);
    cfg.t_min = static_cast<float>(g.config.get_double("t_min", cfg.t_min));

    if (cmd->count("--model")) kind_name = model;
    if (cmd->count("--encoder")) encoder_name = encoder;
    if (cmd->count("--base-width")) cfg.base_width = base_width;
    if (cmd->count("--feature-channels")) cfg.feature_channels = feature_channels;
    if (cmd->count("--blocks")) blocks_list = parse_int_list(blocks, "--blocks");
    if (cmd->count("--scales")) cfg.refinement_scales = parse_int_list(scales, "--scales");

    if (encoder_name == "basic") {
      cfg.encoder_kind = models::EncoderKind::basic;
    } else if (encoder_name == "bottleneck") {
      cfg.encoder_kind = models::EncoderKind::bottleneck;
    } else {
      throw CLI::ValidationError("--encoder", "expected basic or bottleneck");
    }
    if (blocks_list.size() != 4)
      throw CLI::ValidationError("--blocks", "expected exactly four stage counts");
    std::copy(blocks_list.begin(), blocks_list.end(), cfg.blocks_per_stage.begin());
    cfg.init_seed = g.seed;
    return {parse_model_kind(kind_name), cfg};
  }
};

training::TrainConfig resolve_train_config(const GlobalOpts& g) {
  training::TrainConfig tc;
  tc.lr = g.config.get_double("lr", tc.lr);
  tc.adam_beta1 = g.config.get_double("adam_beta1", tc.adam_beta1);
  tc.adam_beta2 = g.config.get_double("adam_beta2", tc.adam_beta2);
  tc.adam_eps = g.config.get_double("adam_eps", tc.adam_eps);
  tc.batch_size = g.config.get_int("batch_size", tc.batch_size);
  tc.max_epochs = g.config.get_int("max_epochs", tc.max_epochs);
  tc.early_stop_patience = g.config.get_int("patience", tc.early_stop_patience);
  tc.refinement_max_epochs = g.config.get_int("refinement_epochs", 0);
  tc.seed = g.seed;
  return tc;
}

void consume_objective_keys(const KeyValueConfig& config) {
  config.get_string("objective", "base");
  config.get_string("base_loss", "mse");
  config.get_string("refinement_loss", "none");
}
void consume_objective_keys(const GlobalOpts& g) { consume_objective_keys(g.config); }

std::vector<std::pair<int, int>> parse_resolutions(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::istringstream is(text);
  std::string part;
  while (std::getline(is, part, ',')) {
    const size_t x = part.find('x');
    if (x == std::string::npos)
      throw CLI::ValidationError("--resolutions", "expected WxH entries, e.g. 64x64,128x128");
    try {
      out.emplace_back(std::stoi(part.substr(x + 1)), std::stoi(part.substr(0, x)));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--resolutions", "expected WxH entries");
    }
  }
  if (out.empty()) throw CLI::ValidationError("--resolutions", "empty list");
  return out;
}

std::string format_eval_row(const std::string& model, const std::optional<double>& psnr_db,
                            double ssim_value, const std::string& params) {
  char buf[160];
  if (psnr_db)
    std::snprintf(buf, sizeof(buf), "model=%s\tpsnr_db=%.2f\tssim=%.4f\tparams=%s", model.c_str(),
                  *psnr_db, ssim_value, params.c_str());
  else
    std::snprintf(buf, sizeof(buf), "model=%s\tpsnr_db=inf\tssim=%.4f\tparams=%s", model.c_str(),
                  ssim_value, params.c_str());
  return buf;
}

// ---- subcommands ----

int cmd_synth(const GlobalOpts& g, const std::string& clean_dir, const std::string& depth_dir,
              const std::string& out_dir, int variations, int gen_scenes,
              const std::string& size, double train_frac, double val_frac) {
  if (gen_scenes > 0) {
    int h = 64, w = 64;
    if (!size.empty()) {
      const size_t x = size.find('x');
      if (x == std::string::npos) throw CLI::ValidationError("--size", "expected WxH");
      w = std::stoi(size.substr(0, x));
      h = std::stoi(size.substr(x + 1));
    }
    data::generate_desk_scenes(gen_scenes, h, w, g.seed, clean_dir, depth_dir);
    std::printf("generated %d procedural scenes (%dx%d) in %s, %s\n", gen_scenes, w, h,
                clean_dir.c_str(), depth_dir.c_str());
  }
  data::SynthesisSpec spec;
  spec.out_dir = out_dir;
  spec.variations = variations;
  spec.seed = g.seed;
  spec.train_frac = train_frac;
  spec.val_frac = val_frac;
  const data::Manifest m = data::synthesize_dataset(clean_dir, depth_dir, spec);
  std::printf("wrote %zu records to %s/manifest.tsv\n", m.records.size(), out_dir.c_str());
  return 0;
}

int cmd_train(const GlobalOpts& g, const CLI::App* cmd, const ModelFlags& mf,
              const std::string& manifest_path, const std::string& out_dir,
              std::string regime, std::string base_loss_name, std::string refinement_name,
              double lr_flag, int epochs_flag, int patience_flag, int batch_flag,
              const std::string& init_checkpoint) {
  auto [kind, cfg] = mf.resolve(g, cmd);
  training::TrainConfig tc = resolve_train_config(g);
  if (cmd->count("--lr")) tc.lr = lr_flag;
  if (cmd->count("--epochs")) tc.max_epochs = epochs_flag;
  if (cmd->count("--patience")) tc.early_stop_patience = patience_flag;
  if (cmd->count("--batch-size")) tc.batch_size = batch_flag;
  if (!cmd->count("--regime")) regime = g.config.get_string("objective", regime);
  if (!cmd->count("--base-loss")) base_loss_name = g.config.get_string("base_loss", base_loss_name);
  if (!cmd->count("--refinement-loss"))
    refinement_name = g.config.get_string("refinement_loss", refinement_name);
  g.config.reject_unknown_keys();
  fs::create_directories(out_dir);
  tc.checkpoint_dir = out_dir;

  const data::Manifest manifest = data::read_manifest(manifest_path);
  const auto train_set = data::load_split(manifest, "train");
  auto val_set = data::load_split(manifest, "val");
  if (val_set.empty()) val_set = train_set;
  std::printf("loaded %zu training and %zu validation samples\n", train_set.size(),
              val_set.size());

  auto model = models::build_model<float>(kind, cfg);
  std::printf("built %s with %zu parameters\n",
              kind == models::ModelKind::fastnet ? "fastnet" : "dualfastnet",
              model.param_count());
  if (!init_checkpoint.empty()) {
    training::load_checkpoint(model, init_checkpoint);
    std::printf("imported weights from %s\n", init_checkpoint.c_str());
  }

  training::TrainHistory history;
  if (regime == "stagewise") {
    auto [last, combined] = training::train_stagewise(model, train_set, val_set, tc);
    history = std::move(combined);
    if (!last.best_loss.empty()) training::restore_snapshot(model, last.best_loss);
    training::save_checkpoint(model, out_dir + "/final.fdhz");
  } else {
    if (regime == "mse_x4") {
      tc.objective = losses::CompositeSpec::mse_x4();
    } else if (regime == "base") {
      tc.objective = losses::CompositeSpec::single(losses::loss_kind_from_string(base_loss_name));
    } else {
      throw CLI::ValidationError("--regime", "expected base, mse_x4, or stagewise");
    }
    auto result = training::train(model, train_set, val_set, tc);
    history = result.history;
    if (refinement_name != "none" && !refinement_name.empty()) {
      const losses::LossSpec refinement{losses::loss_kind_from_string(refinement_name)};
      auto ft = training::fine_tune(model, result.best_loss, refinement, tc, train_set, val_set,
                                    base_loss_name + " -> " + refinement_name);
      for (const auto& e : ft.history.epochs) history.epochs.push_back(e);
      history.stop_reason = ft.history.stop_reason;
      if (!ft.best_ssim.empty()) training::restore_snapshot(model, ft.best_ssim);
    } else if (!result.best_ssim.empty()) {
      training::restore_snapshot(model, result.best_ssim);
    }
    training::save_checkpoint(model, out_dir + "/final.fdhz");
  }

  std::ofstream hist(out_dir + "/history.txt");
  hist << history.to_records();
  std::printf("ran %d epochs (%s); checkpoints in %s\n", history.epochs_run(),
              history.stop_reason.c_str(), out_dir.c_str());
  return 0;
}

int cmd_dehaze(const std::string& checkpoint, const std::vector<std::string>& inputs,
               std::string out_dir) {
  const auto [kind, cfg] = training::peek_checkpoint(checkpoint);
  auto model = models::build_model<float>(kind, cfg);
  training::load_checkpoint(model, checkpoint);
  for (const std::string& path : inputs) {
    const Image hazy = load_image(path);
    const Image dehazed = models::dehaze_image(model, hazy);
    const fs::path src(path);
    const fs::path dir = out_dir.empty() ? src.parent_path() : fs::path(out_dir);
    if (!dir.empty()) fs::create_directories(dir);
    const std::string out = (dir / (src.stem().string() + "_dehazed.png")).string();
    save_image(dehazed, out);
    std::printf("%s -> %s\n", path.c_str(), out.c_str());
  }
  return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& checkpoint, bool identity,
             const std::string& manifest_path, const std::string& split,
             const std::string& report_path) {
  const data::Manifest manifest = data::read_manifest(manifest_path);
  const auto samples = data::load_split(manifest, split);
  if (samples.empty()) throw std::invalid_argument("eval: no samples in split " + split);

  std::string model_name = "input";
  std::string params = "-";
  std::vector<std::pair<Image, Image>> pairs;
  if (identity) {
    for (const auto& s : samples) pairs.emplace_back(s.hazy, s.clean);
  } else {
    const auto [kind, cfg] = training::peek_checkpoint(checkpoint);
    auto model = models::build_model<float>(kind, cfg);
    training::load_checkpoint(model, checkpoint);
    model_name = kind == models::ModelKind::fastnet ? "fastnet" : "dualfastnet";
    params = std::to_string(model.param_count());
    for (const auto& s : samples)
      pairs.emplace_back(models::dehaze_image(model, s.hazy), s.clean);
  }
  (void)g;
  const QualityReport report = evaluate_pairs(pairs);
  std::optional<double> psnr_mean;
  if (report.psnr_inf_count < static_cast<int>(pairs.size())) psnr_mean = report.psnr_mean;
  std::printf("%s\n", format_eval_row(model_name, psnr_mean, report.ssim_mean, params).c_str());
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    f << report.to_records();
  }
  return 0;
}

int cmd_bench(const GlobalOpts& g, const CLI::App* cmd, const ModelFlags& mf,
              const std::string& checkpoint, const std::string& resolutions,
              const std::string& batches, int runs, int warmup, const std::string& report_path) {
  bench::BenchSpec spec;
  if (!checkpoint.empty()) {
    const auto [kind, cfg] = training::peek_checkpoint(checkpoint);
    spec.kind = kind;
    spec.cfg = cfg;
    spec.checkpoint = checkpoint;
  } else {
    std::tie(spec.kind, spec.cfg) = mf.resolve(g, cmd);
  }
  resolve_train_config(g);  // a shared config file may carry training keys
  consume_objective_keys(g);
  g.config.reject_unknown_keys();
  spec.resolutions = parse_resolutions(resolutions);
  spec.batch_sizes = ModelFlags::parse_int_list(batches, "--batches");
  spec.runs = runs;
  spec.warmup = warmup;
  spec.seed = g.seed;
  const bench::BenchReport report = bench::run_bench(spec);
  std::printf("%s", report.to_table().c_str());
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    f << report.to_records();
  }
  return 0;
}

int cmd_params(const GlobalOpts& g, const CLI::App* cmd, const ModelFlags& mf,
               const std::string& scale) {
  models::ModelKind kind;
  models::FastNetConfig cfg;
  long reference = 0;
  if (scale == "small") {
    kind = models::ModelKind::fastnet;
    cfg = models::FastNetConfig::reference_small();
    reference = 11'554'167;
  } else if (scale == "big") {
    kind = models::ModelKind::fastnet;
    cfg = models::FastNetConfig::reference_big();
    reference = 28'782'647;
  } else if (scale == "dual") {
    kind = models::ModelKind::dualfastnet;
    cfg = models::FastNetConfig::reference_small();
    reference = 23'072'725;
  } else if (scale.empty()) {
    std::tie(kind, cfg) = mf.resolve(g, cmd);
  } else {
    throw CLI::ValidationError("--scale", "expected small, big, or dual");
  }
  if (scale.empty()) {
    resolve_train_config(g);
    consume_objective_keys(g);
    g.config.reject_unknown_keys();
  }

  auto model = models::build_model<float>(kind, cfg);
  for (const auto& [component, count] : model.component_params)
    std::printf("component %-8s %12zu\n", component.c_str(), count);
  const long total = static_cast<long>(model.param_count());
  std::printf("total %20ld\n", total);
  if (reference > 0) {
    const double pct = 100.0 * (total - reference) / reference;
    std::printf("reference %16ld\n", reference);
    std::printf("delta %20ld (%+.3f%%)\n", total - reference, pct);
    std::printf("refinement budget %8zu vs 35609\n", model.component_params.at("refine"));
  }
  return 0;
}

int cmd_gradcheck(const GlobalOpts& g, const CLI::App* cmd, const ModelFlags& mf, double h,
                  double tol, int per_tensor, int hw) {
  // Defaults to the toy scale; reference-scale checks take hours of forwards.
  auto [kind, cfg] = mf.resolve(g, cmd, models::FastNetConfig::toy());
  resolve_train_config(g);
  consume_objective_keys(g);
  g.config.reject_unknown_keys();
  auto model = models::build_model<double>(kind, cfg);
  models::warm_batchnorm_stats(model);
  const auto input = nn::random_uniform<double>(1, 3, hw, hw, 0.35, 0.65, g.seed + 1);
  const auto report = nn::grad_check(model.graph, {input}, h, tol, false,
                                     static_cast<size_t>(per_tensor), g.seed + 2);
  std::printf("%s", report.to_text().c_str());
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-image dehazing toolkit: synthesis, training, evaluation, benchmarks"};
  app.require_subcommand(1);
  app.fallthrough();  // global --seed/--config may follow the subcommand
  GlobalOpts global;
  app.add_option("--seed", global.seed, "global random seed")->capture_default_str();
  app.add_option("--config", global.config_path,
                 "key = value config file (FASTDEHAZE_CONFIG sets the default)");

  // synth
  auto* synth = app.add_subcommand("synth", "synthesize a hazy dataset from clean+depth pairs");
  std::string clean_dir, depth_dir, out_dir, size;
  int variations = 4, gen_scenes = 0;
  double train_frac = 0.8, val_frac = 0.1;
  synth->add_option("--clean", clean_dir, "directory of clean PNG images")->required();
  synth->add_option("--depth", depth_dir, "directory of matching FMAP depth maps")->required();
  synth->add_option("--out", out_dir, "output dataset directory")->required();
  synth->add_option("--variations", variations, "haze draws per scene")->capture_default_str();
  synth->add_option("--gen-scenes", gen_scenes,
                    "first generate this many procedural scenes into --clean/--depth");
  synth->add_option("--size", size, "procedural scene size WxH (default 64x64)");
  synth->add_option("--train-frac", train_frac, "scene fraction for the train split")
      ->capture_default_str();
  synth->add_option("--val-frac", val_frac, "scene fraction for the val split")
      ->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model on a synthesized dataset");
  ModelFlags train_mf;
  train_mf.attach(train_cmd);
  std::string manifest_path, train_out = "runs/latest", regime = "base";
  std::string base_loss_name = "mse", refinement_name = "none";
  double lr_flag = 1e-3;
  int epochs_flag = 100, patience_flag = 10, batch_flag = 1;
  train_cmd->add_option("--manifest", manifest_path, "dataset manifest")->required();
  train_cmd->add_option("--out", train_out, "output directory for checkpoints and history")
      ->capture_default_str();
  train_cmd->add_option("--regime", regime, "base | mse_x4 | stagewise")->capture_default_str();
  train_cmd->add_option("--base-loss", base_loss_name, "mse | l1 | ssim | content")
      ->capture_default_str();
  train_cmd->add_option("--refinement-loss", refinement_name,
                        "none | mse | l1 | ssim | content (fine-tune after the base phase)")
      ->capture_default_str();
  train_cmd->add_option("--lr", lr_flag, "learning rate");
  train_cmd->add_option("--epochs", epochs_flag, "max epochs");
  train_cmd->add_option("--patience", patience_flag, "early-stop patience");
  train_cmd->add_option("--batch-size", batch_flag, "batch size");
  std::string init_checkpoint;
  train_cmd->add_option("--init-checkpoint", init_checkpoint,
                        "start from these weights instead of random initialization");

  // dehaze
  auto* dehaze = app.add_subcommand("dehaze", "dehaze images with a trained checkpoint");
  std::string ckpt_path, dehaze_out;
  std::vector<std::string> dehaze_inputs;
  dehaze->add_option("--checkpoint", ckpt_path, "FDHZ checkpoint")->required();
  dehaze->add_option("--out", dehaze_out, "output directory (default: alongside inputs)");
  dehaze->add_option("inputs", dehaze_inputs, "hazy images (PNG or PPM)")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate PSNR/SSIM against ground truth");
  std::string eval_ckpt, eval_manifest, eval_split = "test", eval_report;
  bool eval_identity = false;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "FDHZ checkpoint");
  eval_cmd->add_flag("--identity", eval_identity,
                     "score the hazy inputs themselves (no model)");
  eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest")->required();
  eval_cmd->add_option("--split", eval_split, "train | val | test | all")->capture_default_str();
  eval_cmd->add_option("--report", eval_report, "write per-image records to this file");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "forward-pass throughput sweep");
  ModelFlags bench_mf;
  bench_mf.attach(bench_cmd);
  std::string bench_ckpt, resolutions = "64x64,128x128", batches = "1,8", bench_report;
  int runs = 20, warmup = 3;
  bench_cmd->add_option("--checkpoint", bench_ckpt, "benchmark a trained checkpoint");
  bench_cmd->add_option("--resolutions", resolutions, "sweep sizes, e.g. 512x512,1024x1024")
      ->capture_default_str();
  bench_cmd->add_option("--batches", batches, "sweep batch sizes")->capture_default_str();
  bench_cmd->add_option("--runs", runs, "timed iterations per cell")->capture_default_str();
  bench_cmd->add_option("--warmup", warmup, "untimed warmup iterations")->capture_default_str();
  bench_cmd->add_option("--report", bench_report, "write per-cell records to this file");

  // params
  auto* params_cmd = app.add_subcommand("params", "parameter accounting per component");
  ModelFlags params_mf;
  params_mf.attach(params_cmd);
  std::string scale;
  params_cmd->add_option("--scale", scale,
                         "small | big | dual: reference-scale config with reference deltas");

  // gradcheck
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  ModelFlags gc_mf;
  gc_mf.attach(gc_cmd);
  double gc_h = 1e-4, gc_tol = 1e-4;
  int gc_per_tensor = 16, gc_hw = 32;
  gc_cmd->add_option("--step", gc_h, "base finite-difference step")->capture_default_str();
  gc_cmd->add_option("--tol", gc_tol, "max relative error")->capture_default_str();
  gc_cmd->add_option("--per-tensor", gc_per_tensor, "elements checked per tensor")
      ->capture_default_str();
  gc_cmd->add_option("--input-size", gc_hw, "square input size (multiple of 32)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
    global.seed_given = app.count("--seed") > 0;
    global.load_config();

    if (*synth)
      return cmd_synth(global, clean_dir, depth_dir, out_dir, variations, gen_scenes, size,
                       train_frac, val_frac);
    if (*train_cmd)
      return cmd_train(global, train_cmd, train_mf, manifest_path, train_out, regime,
                       base_loss_name, refinement_name, lr_flag, epochs_flag, patience_flag,
                       batch_flag, init_checkpoint);
    if (*dehaze) return cmd_dehaze(ckpt_path, dehaze_inputs, dehaze_out);
    if (*eval_cmd) {
      if (!eval_identity && eval_ckpt.empty())
        throw CLI::ValidationError("eval", "provide --checkpoint or --identity");
      return cmd_eval(global, eval_ckpt, eval_identity, eval_manifest, eval_split, eval_report);
    }
    if (*bench_cmd)
      return cmd_bench(global, bench_cmd, bench_mf, bench_ckpt, resolutions, batches, runs,
                       warmup, bench_report);
    if (*params_cmd) return cmd_params(global, params_cmd, params_mf, scale);
    if (*gc_cmd) return cmd_gradcheck(global, gc_cmd, gc_mf, gc_h, gc_tol, gc_per_tensor, gc_hw);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help text, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const file_not_found& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const data::dataset_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
