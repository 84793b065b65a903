#pragma once

#include <string>

#include "dualmae/masking.hpp"
#include "dualmae/model.hpp"

namespace dualmae {

// Analytic compute/parameter/memory estimate for one pre-training pipeline.
// FLOPs figures are multiply-accumulate (MAC) counts; norms, softmax, and
// bias adds are excluded. activation_mem is a relative unit (values x widths
// summed over stages), meaningful only as a ratio between configurations.
struct CostReport {
  int64_t n_tokens = 0;
  int64_t enc_visible = 0;
  int64_t dec_len = 0;  // arch-table nominal; rho_d = 0 collapses to n_tokens
  double embed_flops = 0;
  double enc_flops = 0;
  double dec_flops = 0;
  double projector_flops = 0;  // encoder->decoder projection + output projection
  double total_flops = 0;
  int64_t params = 0;
  double activation_mem = 0;
};

// MACs of one transformer block on n tokens of width d with an mlp hidden
// width: qkv+out projections 4nd^2, attention 2n^2d, mlp 2ndm.
double flops_block(double n, double d, double mlp);

// Sequence lengths follow the masking module's rounding rules. With decoder
// masking off (or rho_d = 0) the decoder runs over all N tokens; with it on,
// the decoder length is the arch-table nominal t * (k_e + k_d) and the output
// projection covers the t * k_d decoder-kept tokens. The live pipeline's
// deduplicated length differs from the nominal by the tube/cell overlap,
// which forward_pretrain reports.
CostReport pipeline_cost(const ModelConfig& cfg, const DualMaskConfig& dual, bool decoder_masking);

// activation_mem(dual masking) / activation_mem(encoder-only masking).
double memory_ratio(const ModelConfig& cfg, const DualMaskConfig& dual);

std::string format_cost_table(const CostReport& report, const ModelConfig& cfg,
                              const DualMaskConfig& dual);
std::string format_cost_record(const CostReport& report);

}  // namespace dualmae
