#include "dualmae/costmodel.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace dualmae {

namespace {

// Stored activations per block in relative units: block input, qkv, attention
// probabilities (heads * n^2), attention output, mlp hidden, mlp output.
double act_block(double n, double d, double heads, double mlp) {
  return 6.0 * n * d + heads * n * n + n * mlp;
}

double activation_units(const ModelConfig& cfg, int64_t n_e, int64_t dec_len, int64_t out_tokens) {
  double act = static_cast<double>(cfg.n_tokens()) * cfg.cube_dim();  // cubified input
  act += static_cast<double>(cfg.n_tokens()) * cfg.enc_dim;           // embedded tokens
  act += static_cast<double>(cfg.enc_depth) *
         act_block(static_cast<double>(n_e), static_cast<double>(cfg.enc_dim),
                   static_cast<double>(cfg.enc_heads), static_cast<double>(cfg.enc_mlp));
  act += static_cast<double>(n_e) * cfg.dec_dim;  // projected encoder output
  act += static_cast<double>(cfg.dec_depth) *
         act_block(static_cast<double>(dec_len), static_cast<double>(cfg.dec_dim),
                   static_cast<double>(cfg.dec_heads), static_cast<double>(cfg.dec_mlp));
  act += static_cast<double>(out_tokens) * cfg.cube_dim();  // reconstructed cubes
  return act;
}

}  // namespace

double flops_block(double n, double d, double mlp) {
  return 4.0 * n * d * d + 2.0 * n * n * d + 2.0 * n * d * mlp;
}

CostReport pipeline_cost(const ModelConfig& cfg, const DualMaskConfig& dual, bool decoder_masking) {
  cfg.validate();
  dual.validate(cfg.grid());

  const int64_t t = cfg.t_tokens();
  const int64_t s = cfg.s_tokens();
  const int64_t n = cfg.n_tokens();
  const int64_t k_e = tube_kept_per_slice(s, dual.rho);
  const int64_t n_e = t * k_e;

  const bool masked_decoder = decoder_masking && dual.rho_d > 0.0;
  int64_t dec_len, out_tokens;
  if (masked_decoder) {
    const int64_t k_d = decoder_kept_per_slice(s, dual.rho_d);
    dec_len = t * (k_e + k_d);
    out_tokens = t * k_d;
  } else {
    dec_len = n;
    out_tokens = n;
  }

  CostReport r;
  r.n_tokens = n;
  r.enc_visible = n_e;
  r.dec_len = dec_len;
  r.embed_flops = static_cast<double>(n) * cfg.cube_dim() * cfg.enc_dim;
  r.enc_flops = static_cast<double>(cfg.enc_depth) *
                flops_block(static_cast<double>(n_e), static_cast<double>(cfg.enc_dim),
                            static_cast<double>(cfg.enc_mlp));
  r.dec_flops = static_cast<double>(cfg.dec_depth) *
                flops_block(static_cast<double>(dec_len), static_cast<double>(cfg.dec_dim),
                            static_cast<double>(cfg.dec_mlp));
  r.projector_flops = static_cast<double>(n_e) * cfg.enc_dim * cfg.dec_dim +
                      static_cast<double>(out_tokens) * cfg.dec_dim * cfg.cube_dim();
  r.total_flops = r.embed_flops + r.enc_flops + r.dec_flops + r.projector_flops;
  r.params = param_count_total(cfg);
  r.activation_mem = activation_units(cfg, n_e, dec_len, out_tokens);
  return r;
}

double memory_ratio(const ModelConfig& cfg, const DualMaskConfig& dual) {
  CostReport with_mask = pipeline_cost(cfg, dual, true);
  CostReport encoder_only = pipeline_cost(cfg, dual, false);
  return with_mask.activation_mem / encoder_only.activation_mem;
}

std::string format_cost_table(const CostReport& r, const ModelConfig& cfg,
                              const DualMaskConfig& dual) {
  std::ostringstream os;
  auto gmacs = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v / 1e9 << "G";
    return s.str();
  };
  os << "pipeline cost (" << ModelConfig::variant_name(cfg.variant) << ", " << cfg.frames << "x"
     << cfg.height << "x" << cfg.width << ", patch " << cfg.patch << ", rho " << dual.rho
     << ", rho_d " << dual.rho_d << ")\n";
  os << std::left;
  os << std::setw(22) << "  tokens N" << r.n_tokens << "\n";
  os << std::setw(22) << "  encoder visible" << r.enc_visible << "\n";
  os << std::setw(22) << "  decoder length" << r.dec_len << "\n";
  os << std::setw(22) << "  embed MACs" << gmacs(r.embed_flops) << "\n";
  os << std::setw(22) << "  encoder MACs" << gmacs(r.enc_flops) << "\n";
  os << std::setw(22) << "  decoder MACs" << gmacs(r.dec_flops) << "\n";
  os << std::setw(22) << "  projector MACs" << gmacs(r.projector_flops) << "\n";
  os << std::setw(22) << "  total MACs" << gmacs(r.total_flops) << "  (2x = "
     << gmacs(2.0 * r.total_flops) << " mul+add)\n";
  os << std::setw(22) << "  params" << r.params << "\n";
  os << std::setw(22) << "  activation units" << std::fixed << std::setprecision(0)
     << r.activation_mem << "\n";
  return os.str();
}

std::string format_cost_record(const CostReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "n_tokens=" << r.n_tokens << "\n";
  os << "enc_visible=" << r.enc_visible << "\n";
  os << "dec_len=" << r.dec_len << "\n";
  os << "embed_macs=" << r.embed_flops << "\n";
  os << "enc_macs=" << r.enc_flops << "\n";
  os << "dec_macs=" << r.dec_flops << "\n";
  os << "projector_macs=" << r.projector_flops << "\n";
  os << "total_macs=" << r.total_flops << "\n";
  os << "total_flops_2x=" << 2.0 * r.total_flops << "\n";
  os << "params=" << r.params << "\n";
  os << "activation_units=" << r.activation_mem << "\n";
  return os.str();
}

}  // namespace dualmae
