#include "dualmae/training.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace dualmae {

namespace {

constexpr double kAdamEps = 1e-8;

}  // namespace

double TrainSchedule::peak_lr() const { return scaled_lr(base_lr, batch_size); }

void TrainSchedule::validate() const {
  if (base_lr <= 0) throw ConfigError("schedule: base_lr must be positive");
  if (batch_size < 1) throw ConfigError("schedule: batch_size must be >= 1");
  if (steps_per_epoch < 1) throw ConfigError("schedule: steps_per_epoch must be >= 1");
  if (total_epochs < 1) throw ConfigError("schedule: total_epochs must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs > total_epochs)
    throw ConfigError("schedule: warmup_epochs must be in [0, total_epochs]");
  if (min_lr < 0) throw ConfigError("schedule: min_lr must be nonnegative");
  if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1)
    throw ConfigError("schedule: betas must be in (0, 1)");
  if (layer_decay <= 0 || layer_decay > 1)
    throw ConfigError("schedule: layer_decay must be in (0, 1]");
  if (clip_grad && *clip_grad <= 0) throw ConfigError("schedule: clip_grad must be positive");
}

double scaled_lr(double base_lr, int64_t batch_size) {
  if (batch_size < 1) throw ConfigError("scaled_lr: batch_size must be >= 1");
  return base_lr * static_cast<double>(batch_size) / 256.0;
}

double lr_at(int64_t step, const TrainSchedule& sched) {
  sched.validate();
  if (step < 0 || step >= sched.total_steps()) throw ContractError("lr_at: step out of range");
  const double peak = sched.peak_lr();
  const int64_t warmup = sched.warmup_steps();
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  const int64_t span = sched.total_steps() - 1 - warmup;
  double progress = span > 0 ? static_cast<double>(step - warmup) / static_cast<double>(span) : 1.0;
  progress = std::min(1.0, std::max(0.0, progress));
  return sched.min_lr + 0.5 * (peak - sched.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

double layer_lr_scale(int64_t layer_index, int64_t num_layers, double decay) {
  if (layer_index < 0 || layer_index > num_layers)
    throw ContractError("layer_lr_scale: layer_index out of range");
  return std::pow(decay, static_cast<double>(num_layers - layer_index));
}

OptimState OptimState::init(const std::vector<Param>& params) {
  OptimState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Param& p : params) {
    s.m.emplace_back(static_cast<size_t>(p.tensor.size()), 0.0);
    s.v.emplace_back(static_cast<size_t>(p.tensor.size()), 0.0);
  }
  return s;
}

double clip_gradients(std::vector<Param>& params, double max_norm) {
  if (max_norm <= 0) throw ConfigError("clip_gradients: max_norm must be positive");
  double sq = 0.0;
  for (Param& p : params)
    for (double g : p.tensor.grad()) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (Param& p : params) {
      auto node = p.tensor.node();
      for (double& g : node->grad) g *= scale;
    }
  }
  return norm;
}

void adamw_step(std::vector<Param>& params, OptimState& state, double lr,
                const TrainSchedule& sched) {
  if (params.size() != state.m.size()) throw ContractError("adamw_step: optimizer state mismatch");
  state.step += 1;

  int64_t num_layers = 0;
  for (const Param& p : params) num_layers = std::max(num_layers, p.layer_index);

  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto grad = params[pi].tensor.grad();
    for (double g : grad)
      if (!std::isfinite(g))
        throw TrainingError("non-finite gradient at step " + std::to_string(state.step) +
                            " in parameter '" + params[pi].name + "'");
  }
  if (sched.clip_grad) clip_gradients(params, *sched.clip_grad);

  const double bc1 = 1.0 - std::pow(sched.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(sched.beta2, static_cast<double>(state.step));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = params[pi];
    const double lr_p = lr * layer_lr_scale(p.layer_index, num_layers, sched.layer_decay);
    auto grad = p.tensor.grad();
    auto data = p.tensor.mutable_data();
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    if (grad.empty()) continue;  // no gradient flowed this step
    for (size_t i = 0; i < data.size(); ++i) {
      double g = grad[i];
      m[i] = sched.beta1 * m[i] + (1.0 - sched.beta1) * g;
      v[i] = sched.beta2 * v[i] + (1.0 - sched.beta2) * g * g;
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      data[i] -= lr_p * (m_hat / (std::sqrt(v_hat) + kAdamEps) + sched.weight_decay * data[i]);
    }
  }
}

Tensor smoothed_ce(const Tensor& logits, int64_t target_class, double smoothing) {
  if (logits.rank() != 1) throw ShapeError("smoothed_ce: logits must be rank 1");
  const int64_t k = logits.size();
  if (k < 2) throw ShapeError("smoothed_ce: need at least two classes");
  if (target_class < 0 || target_class >= k) throw IndexError("smoothed_ce: target out of range");
  if (smoothing < 0 || smoothing >= 1) throw ConfigError("smoothed_ce: smoothing must be in [0, 1)");

  std::vector<double> q(static_cast<size_t>(k), smoothing / static_cast<double>(k - 1));
  q[static_cast<size_t>(target_class)] = 1.0 - smoothing;
  Tensor weights = Tensor::from_data({k}, std::move(q));
  return scale(sum_all(mul(log_softmax(logits), weights)), -1.0);
}

double sample_beta(double alpha, Rng& rng) {
  if (alpha <= 0) throw ConfigError("sample_beta: alpha must be positive");
  // Johnk's sampler
  for (;;) {
    double x = std::pow(rng.next_double(), 1.0 / alpha);
    double y = std::pow(rng.next_double(), 1.0 / alpha);
    if (x + y <= 1.0 && x + y > 0.0) return x / (x + y);
  }
}

MixupBatch mixup_batch_with(const std::vector<Tensor>& batch, const std::vector<int64_t>& labels,
                            double lambda, const std::vector<int64_t>& perm) {
  if (batch.size() != labels.size() || batch.size() != perm.size())
    throw ContractError("mixup: batch, labels, perm sizes disagree");
  MixupBatch out;
  out.lambda = lambda;
  out.labels_a = labels;
  out.labels_b.reserve(labels.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    int64_t j = perm[i];
    if (j < 0 || j >= static_cast<int64_t>(batch.size()))
      throw IndexError("mixup: partner index out of range");
    out.labels_b.push_back(labels[static_cast<size_t>(j)]);
    if (lambda == 1.0) {
      out.clips.push_back(batch[i]);
      continue;
    }
    const Tensor& a = batch[i];
    const Tensor& b = batch[static_cast<size_t>(j)];
    if (a.shape() != b.shape()) throw ShapeError("mixup: clip shapes disagree");
    std::vector<double> blend(a.data().size());
    for (size_t e = 0; e < blend.size(); ++e)
      blend[e] = lambda * a.data()[e] + (1.0 - lambda) * b.data()[e];
    out.clips.push_back(Tensor::from_data(a.shape(), std::move(blend)));
  }
  return out;
}

MixupBatch mixup_batch(const std::vector<Tensor>& batch, const std::vector<int64_t>& labels,
                       double alpha, Rng& rng) {
  double lambda = sample_beta(alpha, rng);
  std::vector<int64_t> perm(batch.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int64_t>(i);
  for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.next_below(i)]);
  return mixup_batch_with(batch, labels, lambda, perm);
}

Tensor distill_loss(const Tensor& student_logits, const Tensor& teacher_logits,
                    double temperature) {
  if (temperature <= 0) throw ConfigError("distill_loss: temperature must be positive");
  if (student_logits.shape() != teacher_logits.shape())
    throw ShapeError("distill_loss: class counts disagree");

  // teacher terms are constants; only the student path carries gradient
  Tensor teacher_scaled = Tensor::from_data(teacher_logits.shape(),
                                            {teacher_logits.data().begin(), teacher_logits.data().end()});
  Tensor log_p_t = log_softmax(scale(teacher_scaled, 1.0 / temperature));
  std::vector<double> p_t(log_p_t.data().size());
  for (size_t i = 0; i < p_t.size(); ++i) p_t[i] = std::exp(log_p_t.data()[i]);
  Tensor p_teacher = Tensor::from_data(teacher_logits.shape(), std::move(p_t));

  Tensor log_p_s = log_softmax(scale(student_logits, 1.0 / temperature));
  Tensor cross = sum_all(mul(p_teacher, log_p_s));
  Tensor entropy_term = sum_all(mul(p_teacher, log_p_t));  // constant
  return scale(sub(entropy_term, cross), temperature * temperature);
}

Stage stage_from_string(const std::string& name) {
  if (name == "pretrain") return Stage::Pretrain;
  if (name == "posttrain") return Stage::Posttrain;
  if (name == "finetune") return Stage::Finetune;
  if (name == "distill") return Stage::Distill;
  throw ConfigError("unknown stage '" + name + "'");
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::Pretrain: return "pretrain";
    case Stage::Posttrain: return "posttrain";
    case Stage::Finetune: return "finetune";
    case Stage::Distill: return "distill";
  }
  return "?";
}

namespace {

int64_t argmax(const Tensor& logits) {
  auto d = logits.data();
  int64_t best = 0;
  for (size_t i = 1; i < d.size(); ++i)
    if (d[i] > d[static_cast<size_t>(best)]) best = static_cast<int64_t>(i);
  return best;
}

Tensor mean_of(std::vector<Tensor> losses) {
  Tensor total = losses.front();
  for (size_t i = 1; i < losses.size(); ++i) total = add(total, losses[i]);
  return scale(total, 1.0 / static_cast<double>(losses.size()));
}

// Round-robin walk over epoch plans; a fresh shuffled plan per epoch, with
// every record visited `repeats` times per epoch.
struct PlanCursor {
  const std::vector<size_t>& train_idx;
  int64_t repeats;
  Rng epochs_rng;
  std::vector<int64_t> plan;
  size_t at = 0;
  int64_t epoch = -1;

  size_t next() {
    if (plan.empty() || at >= plan.size()) {
      ++epoch;
      Rng r = epochs_rng.split(static_cast<uint64_t>(epoch));
      plan = epoch_plan(static_cast<int64_t>(train_idx.size()), repeats, r);
      at = 0;
    }
    return train_idx[static_cast<size_t>(plan[at++])];
  }
};

}  // namespace

StageResult run_stage(Stage stage, const DatasetManifest& manifest, const StageOptions& opts,
                      const std::string& out_dir) {
  opts.model.validate();
  opts.sched.validate();
  manifest.validate();
  if (opts.model.height != opts.model.width)
    throw ConfigError("run_stage: square inputs required (height == width)");

  const bool supervised = stage == Stage::Posttrain || stage == Stage::Finetune;
  auto train_idx = manifest.train_indices();
  if (train_idx.empty()) throw ConfigError("run_stage: manifest has no train records");

  if (supervised) {
    for (size_t i : train_idx) {
      const ClipRecord& r = manifest.records[i];
      if (!r.label)
        throw ConfigError(stage_name(stage) + " requires labeled records, but '" + r.video_id +
                          "' has no label");
      if (*r.label >= opts.num_classes)
        throw ConfigError("label of '" + r.video_id + "' exceeds num_classes");
    }
  }
  if (stage == Stage::Distill && opts.teacher_checkpoint.empty())
    throw ConfigError("distill requires a teacher checkpoint");

  std::filesystem::create_directories(out_dir);
  std::filesystem::create_directories(out_dir + "/checkpoints");

  Rng root(opts.seed);
  Rng rng_init = root.split(1);
  Rng rng_mask = root.split(2);
  Rng rng_epochs = root.split(3);
  Rng rng_crops = root.split(4);
  Rng rng_mix = root.split(5);

  AutoencoderState auto_state;
  ClassifierState cls_state;
  ClassifierState teacher_state;
  std::vector<Param> params;
  std::vector<Param> teacher_params;

  if (stage == Stage::Pretrain) {
    auto_state = AutoencoderState::init(opts.model, rng_init);
    params = auto_state.params();
    if (!opts.init_checkpoint.empty()) {
      Checkpoint ckpt = load_checkpoint(opts.init_checkpoint);
      check_config_match(opts.model, ckpt.cfg);
      load_params(params, ckpt);
    }
  } else {
    cls_state = ClassifierState::init(opts.model, opts.num_classes, rng_init);
    params = cls_state.params();
    if (!opts.init_checkpoint.empty()) {
      Checkpoint ckpt = load_checkpoint(opts.init_checkpoint);
      check_config_match(opts.model, ckpt.cfg);
      if (stage == Stage::Posttrain) {
        // the pre-trained encoder; the head stays fresh
        load_params_prefix(params, ckpt, {"embed.", "enc."});
      } else {
        load_params_prefix(params, ckpt, {"embed.", "enc."});
        const Tensor* head = ckpt.find("head.w");
        if (head && head->shape() == cls_state.head_w.shape())
          load_params_prefix(params, ckpt, {"head."});
      }
    }
    if (stage == Stage::Distill) {
      Checkpoint teacher_ckpt = load_checkpoint(opts.teacher_checkpoint);
      check_config_match(opts.model, teacher_ckpt.cfg);
      Rng teacher_rng = root.split(6);
      teacher_state = ClassifierState::init(opts.model, opts.num_classes, teacher_rng);
      teacher_params = teacher_state.params();
      load_params(teacher_params, teacher_ckpt);
      set_requires_grad(teacher_params, false);
    }
  }

  const std::string metrics_path = out_dir + "/metrics.jsonl";
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) throw IoError("cannot open metrics file: " + metrics_path);

  ClipSpec spec{opts.model.channels, 16, opts.model.height, opts.model.width};
  PlanCursor cursor{train_idx, std::max<int64_t>(1, opts.repeated_augmentation), rng_epochs, {}, 0, -1};

  OptimState optim = OptimState::init(params);
  StageResult result;
  const int64_t total_steps = opts.sched.total_steps();
  PretrainDiagnostics last_diag;

  for (int64_t step = 0; step < total_steps; ++step) {
    // assemble the batch
    std::vector<Tensor> clips;
    std::vector<int64_t> labels;
    clips.reserve(static_cast<size_t>(opts.sched.batch_size));
    for (int64_t b = 0; b < opts.sched.batch_size; ++b) {
      const ClipRecord& record = manifest.records[cursor.next()];
      Tensor full = clip_for_record(record, spec, opts.num_classes);
      SamplerConfig sampler{opts.model.frames,
                            stride_for_source(record.source, opts.default_stride, opts.stride_overrides),
                            opts.model.height, opts.flip};
      Rng crop_rng = rng_crops.split(static_cast<uint64_t>(step * opts.sched.batch_size + b));
      clips.push_back(sample_clip(full, sampler, crop_rng));
      labels.push_back(record.label.value_or(0));
    }

    zero_grads(params);
    std::vector<Tensor> losses;
    losses.reserve(clips.size());
    double batch_correct = 0.0;

    if (stage == Stage::Pretrain) {
      for (const Tensor& clip : clips) {
        PretrainOutput out =
            forward_pretrain(clip, opts.model, opts.dual, auto_state, rng_mask, opts.denominator);
        losses.push_back(out.loss);
        last_diag = out.diag;
      }
    } else if (supervised) {
      if (opts.mixup_alpha > 0.0) {
        MixupBatch mb = mixup_batch(clips, labels, opts.mixup_alpha, rng_mix);
        for (size_t i = 0; i < mb.clips.size(); ++i) {
          Tensor logits = forward_classify(mb.clips[i], opts.model, cls_state);
          Tensor l = add(scale(smoothed_ce(logits, mb.labels_a[i], opts.label_smoothing), mb.lambda),
                         scale(smoothed_ce(logits, mb.labels_b[i], opts.label_smoothing),
                               1.0 - mb.lambda));
          losses.push_back(l);
          if (argmax(logits) == mb.labels_a[i]) batch_correct += 1.0;
        }
      } else {
        for (size_t i = 0; i < clips.size(); ++i) {
          Tensor logits = forward_classify(clips[i], opts.model, cls_state);
          losses.push_back(smoothed_ce(logits, labels[i], opts.label_smoothing));
          if (argmax(logits) == labels[i]) batch_correct += 1.0;
        }
      }
    } else {  // distill
      for (size_t i = 0; i < clips.size(); ++i) {
        Tensor teacher_logits = forward_classify(clips[i], opts.model, teacher_state);
        Tensor student_logits = forward_classify(clips[i], opts.model, cls_state);
        losses.push_back(distill_loss(student_logits, teacher_logits, opts.temperature));
        if (argmax(student_logits) == argmax(teacher_logits)) batch_correct += 1.0;
      }
    }

    Tensor batch_loss = mean_of(std::move(losses));
    double loss_value = batch_loss.value();
    if (!std::isfinite(loss_value))
      throw TrainingError("non-finite loss at step " + std::to_string(step));
    batch_loss.backward();

    double lr = lr_at(step, opts.sched);
    adamw_step(params, optim, lr, opts.sched);

    if (step == 0) result.initial_loss = loss_value;
    result.final_loss = loss_value;
    result.losses.push_back(loss_value);

    nlohmann::json extra;
    if (stage == Stage::Pretrain) {
      extra["n_tokens"] = last_diag.n_tokens;
      extra["enc_visible"] = last_diag.n_enc_visible;
      extra["dec_len"] = last_diag.dec_len;
      extra["loss_set"] = last_diag.loss_set_size;
    } else {
      extra["acc"] = batch_correct / static_cast<double>(clips.size());
    }
    nlohmann::json line = {{"stage", stage_name(stage)},
                           {"step", step},
                           {"lr", lr},
                           {"loss", loss_value},
                           {"extra", extra}};
    metrics << line.dump() << "\n";
  }
  metrics.flush();
  if (!metrics) throw IoError("failed writing metrics: " + metrics_path);

  result.metrics_path = metrics_path;
  result.checkpoint_path = out_dir + "/checkpoints/" + stage_name(stage) + ".ckpt";
  save_checkpoint(result.checkpoint_path, opts.model, params);
  return result;
}

}  // namespace dualmae
