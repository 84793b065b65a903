#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualmae/checkpoint.hpp"
#include "dualmae/data.hpp"
#include "dualmae/masking.hpp"
#include "dualmae/model.hpp"

namespace dualmae {

struct TrainSchedule {
  double base_lr = 1.5e-4;
  int64_t batch_size = 256;
  int64_t warmup_epochs = 1;
  int64_t total_epochs = 10;
  int64_t steps_per_epoch = 10;
  double min_lr = 1e-6;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double layer_decay = 1.0;
  std::optional<double> clip_grad;

  int64_t warmup_steps() const { return warmup_epochs * steps_per_epoch; }
  int64_t total_steps() const { return total_epochs * steps_per_epoch; }
  double peak_lr() const;
  void validate() const;
};

// Linear lr scaling rule: base_lr * batch_size / 256.
double scaled_lr(double base_lr, int64_t batch_size);

// Linear ramp 0 -> peak over the warmup steps, then cosine from peak to
// min_lr; exact at the junction and at the final step.
double lr_at(int64_t step, const TrainSchedule& sched);

// decay^(num_layers - layer_index); the head (index num_layers) gets 1.
double layer_lr_scale(int64_t layer_index, int64_t num_layers, double decay);

struct OptimState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  int64_t step = 0;

  static OptimState init(const std::vector<Param>& params);
};

// Scales all gradients by max_norm / norm when the global norm exceeds
// max_norm. Returns the pre-clip norm.
double clip_gradients(std::vector<Param>& params, double max_norm);

// Bias-corrected AdamW with decoupled weight decay and layer-wise lr scaling
// (per Param::layer_index). Clips first when sched.clip_grad is set. A
// non-finite gradient raises TrainingError naming the step and parameter.
void adamw_step(std::vector<Param>& params, OptimState& state, double lr,
                const TrainSchedule& sched);

// Cross-entropy against the smoothed one-hot target: 1-s on the target
// class, s/(K-1) elsewhere. logits: [K].
Tensor smoothed_ce(const Tensor& logits, int64_t target_class, double smoothing);

// Beta(alpha, alpha) via Johnk's rejection sampler.
double sample_beta(double alpha, Rng& rng);

struct MixupBatch {
  std::vector<Tensor> clips;
  std::vector<int64_t> labels_a;
  std::vector<int64_t> labels_b;
  double lambda = 1.0;
};

// Deterministic core: blend each clip with its permuted partner at a given
// lambda. The random wrapper draws lambda ~ Beta(alpha, alpha) and a
// uniformly random partner permutation.
MixupBatch mixup_batch_with(const std::vector<Tensor>& batch, const std::vector<int64_t>& labels,
                            double lambda, const std::vector<int64_t>& perm);
MixupBatch mixup_batch(const std::vector<Tensor>& batch, const std::vector<int64_t>& labels,
                       double alpha, Rng& rng);

// T^2 * KL(softmax(teacher/T) || softmax(student/T)); gradient flows to the
// student only.
Tensor distill_loss(const Tensor& student_logits, const Tensor& teacher_logits, double temperature);

enum class Stage { Pretrain, Posttrain, Finetune, Distill };
Stage stage_from_string(const std::string& name);
std::string stage_name(Stage stage);

struct StageOptions {
  ModelConfig model;
  DualMaskConfig dual;
  TrainSchedule sched;
  uint64_t seed = 0;
  int64_t num_classes = 2;
  double label_smoothing = 0.1;
  double mixup_alpha = 0.0;  // 0 disables mixup
  double temperature = 3.0;
  int64_t repeated_augmentation = 1;
  int64_t default_stride = 4;
  std::map<std::string, int64_t> stride_overrides;
  bool flip = false;
  std::string init_checkpoint;     // posttrain <- pretrain, finetune <- posttrain, distill student init
  std::string teacher_checkpoint;  // distill only
  DenominatorMode denominator = DenominatorMode::DecoderKept;
};

struct StageResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> losses;  // one per step
  std::string checkpoint_path;
  std::string metrics_path;
};

// Runs one progressive-training stage over the manifest's train records,
// writing per-step JSONL metrics and a final checkpoint under out_dir.
// Deterministic given (options, manifest): same seed, same bytes.
StageResult run_stage(Stage stage, const DatasetManifest& manifest, const StageOptions& opts,
                      const std::string& out_dir);

}  // namespace dualmae
