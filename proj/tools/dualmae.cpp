#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "dualmae/config.hpp"
#include "dualmae/costmodel.hpp"
#include "dualmae/data.hpp"
#include "dualmae/masking.hpp"
#include "dualmae/model.hpp"
#include "dualmae/training.hpp"

namespace {

using namespace dualmae;

ModelConfig resolve_model(const Config& c) {
  Variant v = ModelConfig::variant_from_string(c.get_string("model.variant"));
  ModelConfig cfg = ModelConfig::preset(v);
  cfg.frames = c.get_int_or("model.frames", cfg.frames);
  cfg.height = c.get_int_or("model.height", cfg.height);
  cfg.width = c.get_int_or("model.width", cfg.width);
  cfg.channels = c.get_int_or("model.channels", cfg.channels);
  cfg.patch = c.get_int_or("model.patch", cfg.patch);
  cfg.tubelet = c.get_int_or("model.tubelet", cfg.tubelet);
  cfg.enc_depth = c.get_int_or("model.enc_depth", cfg.enc_depth);
  cfg.enc_dim = c.get_int_or("model.enc_dim", cfg.enc_dim);
  cfg.enc_heads = c.get_int_or("model.enc_heads", cfg.enc_heads);
  cfg.enc_mlp = c.get_int_or("model.enc_mlp", cfg.enc_mlp);
  cfg.dec_depth = c.get_int_or("model.dec_depth", cfg.dec_depth);
  cfg.dec_dim = c.get_int_or("model.dec_dim", cfg.dec_dim);
  cfg.dec_heads = c.get_int_or("model.dec_heads", cfg.dec_heads);
  cfg.dec_mlp = c.get_int_or("model.dec_mlp", cfg.dec_mlp);
  cfg.validate();
  return cfg;
}

DualMaskConfig resolve_dual(const Config& c, const ModelConfig& cfg) {
  DualMaskConfig dual;
  dual.rho = c.get_double("mask.rho");
  dual.rho_d = c.get_double("mask.rho_d");
  dual.cell = c.get_int("mask.cell");
  dual.validate(cfg.grid());
  return dual;
}

DenominatorMode resolve_denominator(const Config& c) {
  std::string mode = c.get_string("loss.denominator");
  if (mode == "kept") return DenominatorMode::DecoderKept;
  if (mode == "exact") return DenominatorMode::ExactCount;
  throw ConfigError("loss.denominator must be 'kept' or 'exact'");
}

int cmd_cost(const Config& c) {
  ModelConfig cfg = resolve_model(c);
  DualMaskConfig dual = resolve_dual(c, cfg);
  CostReport report = pipeline_cost(cfg, dual, dual.rho_d > 0.0);
  std::cout << format_cost_table(report, cfg, dual) << "\n" << format_cost_record(report);
  return 0;
}

int cmd_mask(const Config& c, uint64_t seed, const std::string& out_dir) {
  ModelConfig cfg = resolve_model(c);
  DualMaskConfig dual = resolve_dual(c, cfg);
  TokenGrid grid = cfg.grid();

  Rng rng(seed);
  Rng enc_rng = rng.split(1);
  MaskMap enc = tube_mask(grid, dual.rho, enc_rng);

  std::string strategy = c.get_string("mask.strategy");
  MaskMap dec;
  if (strategy == "running-cell") {
    dec = running_cell_mask(grid, dual.rho_d, dual.cell);
  } else if (strategy == "frame") {
    dec = frame_mask(grid, dual.rho_d);
  } else if (strategy == "random") {
    Rng dec_rng = rng.split(2);
    dec = random_mask(grid, dual.rho_d, dec_rng);
  } else {
    throw ConfigError("mask.strategy must be running-cell, frame, or random");
  }

  std::string enc_grid = render_mask(enc);
  std::string dec_grid = render_mask(dec);
  std::string loss_grid = render_index_set(grid, loss_index_set(enc, dec));
  std::cout << "encoder-visible (tube, rho " << dual.rho << ")\n" << enc_grid << "\n";
  std::cout << "decoder-kept (" << strategy << ", rho_d " << dual.rho_d << ")\n" << dec_grid << "\n";
  std::cout << "loss-set (decoder-kept minus encoder-visible)\n" << loss_grid;

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir + "/masks");
    for (auto& [name, text] : {std::pair<std::string, std::string&>{"encoder.txt", enc_grid},
                               {"decoder.txt", dec_grid},
                               {"loss.txt", loss_grid}}) {
      std::ofstream out(out_dir + "/masks/" + name);
      if (!out) throw IoError("cannot write mask grid under " + out_dir);
      out << text;
    }
  }
  return 0;
}

int cmd_manifest(const Config& c) {
  std::string path = c.get_string("data.manifest");
  if (path.empty()) throw ConfigError("manifest command requires data.manifest = PATH");
  DatasetManifest manifest = load_manifest_tsv(path);

  std::vector<std::pair<std::string, int64_t>> counts;
  for (const ClipRecord& r : manifest.records) {
    auto it = std::find_if(counts.begin(), counts.end(),
                           [&](const auto& kv) { return kv.first == r.source; });
    if (it == counts.end())
      counts.emplace_back(r.source, 1);
    else
      it->second += 1;
  }

  std::cout << "Source" << std::string(18, ' ') << "Clips\n";
  int64_t total = 0;
  for (auto& [source, n] : counts) {
    std::cout << source;
    for (size_t pad = source.size(); pad < 24; ++pad) std::cout << ' ';
    std::cout << n << "\n";
    total += n;
  }
  std::cout << "total";
  for (size_t pad = 5; pad < 24; ++pad) std::cout << ' ';
  std::cout << total << "\n";
  std::cout << "labels: " << manifest.label_space.size() << "\n";
  return 0;
}

int cmd_stage(Stage stage, const Config& c, uint64_t seed, const std::string& out_dir) {
  StageOptions opts;
  opts.model = resolve_model(c);
  opts.dual = resolve_dual(c, opts.model);
  opts.seed = seed;
  opts.denominator = resolve_denominator(c);
  opts.num_classes = c.get_int("data.classes");

  const bool supervised = stage == Stage::Posttrain || stage == Stage::Finetune;
  double default_lr = stage == Stage::Pretrain ? 1.5e-4
                      : stage == Stage::Finetune ? 3e-4
                                                 : 1e-3;
  opts.sched.base_lr = c.get_double_or("train.base_lr", default_lr);
  opts.sched.batch_size = c.get_int("train.batch_size");
  opts.sched.total_epochs = c.get_int("train.epochs");
  opts.sched.warmup_epochs = c.get_int("train.warmup_epochs");
  opts.sched.steps_per_epoch = c.get_int("train.steps_per_epoch");
  opts.sched.min_lr = c.get_double("train.min_lr");
  opts.sched.weight_decay = c.get_double("train.weight_decay");
  opts.sched.beta1 = c.get_double("train.beta1");
  opts.sched.beta2 = c.get_double_or("train.beta2", stage == Stage::Pretrain ? 0.95 : 0.999);
  opts.sched.layer_decay = c.get_double_or(
      "train.layer_decay", stage == Stage::Pretrain ? 1.0 : supervised ? 0.9 : 0.75);
  double clip = c.get_double_or("train.clip_grad", stage == Stage::Pretrain ? 0.02
                                                  : stage == Stage::Distill ? 1.0
                                                                            : 0.0);
  if (clip > 0.0) opts.sched.clip_grad = clip;

  opts.label_smoothing = c.get_double("train.label_smoothing");
  opts.mixup_alpha = c.get_double_or("train.mixup", supervised ? 0.8 : 0.0);
  opts.temperature = c.get_double("train.temperature");
  opts.repeated_augmentation = c.get_int_or(
      "train.repeated_augmentation", stage == Stage::Pretrain ? 4 : supervised ? 2 : 1);
  opts.default_stride = c.get_int("data.stride");
  opts.stride_overrides = c.get_overrides("data.stride_overrides");
  opts.flip = c.get_bool_or("data.flip", stage != Stage::Pretrain);
  opts.init_checkpoint = c.get_string("stage.init");
  opts.teacher_checkpoint = c.get_string("stage.teacher");

  DatasetManifest manifest;
  std::string manifest_path = c.get_string("data.manifest");
  if (!manifest_path.empty()) {
    manifest = load_manifest_tsv(manifest_path);
  } else {
    manifest = synthetic_manifest(c.get_int("data.clips"), c.get_int("data.classes"),
                                  c.get_int("data.duration"), c.get_string("data.source"));
  }

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream snapshot(out_dir + "/config.txt");
    if (!snapshot) throw IoError("cannot write config snapshot under " + out_dir);
    snapshot << c.snapshot();
  }

  StageResult result = run_stage(stage, manifest, opts, out_dir);
  std::cout << stage_name(stage) << ": steps=" << result.losses.size()
            << " initial_loss=" << result.initial_loss << " final_loss=" << result.final_loss
            << "\ncheckpoint=" << result.checkpoint_path << "\nmetrics=" << result.metrics_path
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dualmae: dual-masked video autoencoder toolkit (cost model, masking maps, "
               "manifests, progressive training on synthetic clips)"};
  app.require_subcommand(1);
  app.footer(Config::help_text());

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> sets;
  uint64_t seed = 0;

  const std::map<std::string, std::string> commands = {
      {"cost", "analytic FLOPs/params/memory for a (variant, rho, rho_d) pipeline"},
      {"mask", "render encoder/decoder/loss masking maps as text grids"},
      {"manifest", "validate a manifest TSV and print per-source counts"},
      {"pretrain", "self-supervised dual-masked reconstruction stage"},
      {"posttrain", "supervised post-pre-training from a pretrain checkpoint"},
      {"finetune", "supervised fine-tuning from a posttrain checkpoint"},
      {"distill", "KL distillation of a student from a teacher checkpoint"},
  };
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "config file (key = value lines)");
    sub->add_option("--set", sets, "override a config key, KEY=VALUE (repeatable)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "rng seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    dualmae::Config config = dualmae::Config::load(config_path, sets);
    const std::string cmd = app.get_subcommands().front()->get_name();
    std::string stage_out = out_dir.empty() ? "out-" + cmd : out_dir;
    if (cmd == "cost") return cmd_cost(config);
    if (cmd == "mask") return cmd_mask(config, seed, out_dir);
    if (cmd == "manifest") return cmd_manifest(config);
    return cmd_stage(dualmae::stage_from_string(cmd), config, seed, stage_out);
  } catch (const dualmae::TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const dualmae::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const dualmae::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
