#pragma once

#include <string>
#include <vector>

#include "dualmae/masking.hpp"
#include "dualmae/ops.hpp"
#include "dualmae/rng.hpp"
#include "dualmae/tensor.hpp"

namespace dualmae {

enum class Variant { B, L, H, G, Toy };

// Backbone geometry. Presets B/L/H/g follow the standard ViT ladder with a
// video cube embedding (tubelet 2); the decoder stays shallow (4 blocks,
// 384 channels for B, 512 otherwise). Toy is free for desk-scale runs.
struct ModelConfig {
  Variant variant = Variant::Toy;
  int64_t patch = 4;
  int64_t tubelet = 2;
  int64_t enc_depth = 2;
  int64_t enc_dim = 16;
  int64_t enc_heads = 2;
  int64_t enc_mlp = 64;
  int64_t dec_depth = 2;
  int64_t dec_dim = 8;
  int64_t dec_heads = 1;
  int64_t dec_mlp = 32;
  int64_t frames = 4;
  int64_t height = 16;
  int64_t width = 16;
  int64_t channels = 3;

  int64_t t_tokens() const { return frames / tubelet; }
  int64_t s_rows() const { return height / patch; }
  int64_t s_cols() const { return width / patch; }
  int64_t s_tokens() const { return s_rows() * s_cols(); }
  int64_t n_tokens() const { return t_tokens() * s_tokens(); }
  int64_t cube_dim() const { return channels * tubelet * patch * patch; }
  TokenGrid grid() const { return TokenGrid{t_tokens(), s_rows(), s_cols()}; }

  void validate() const;
  static ModelConfig preset(Variant v);
  static Variant variant_from_string(const std::string& name);
  static std::string variant_name(Variant v);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Named learnable tensor plus its position in the layer-decay ladder
// (0 = embedding, 1..depth = blocks, depth+1 = final norm / head).
struct Param {
  std::string name;
  Tensor tensor;
  int64_t layer_index = 0;
};

struct BlockWeights {
  Tensor ln1_g, ln1_b;
  Tensor wqkv, bqkv;  // [d x 3d], [3d]
  Tensor wo, bo;      // [d x d], [d]
  Tensor ln2_g, ln2_b;
  Tensor mlp_w1, mlp_b1;  // [d x mlp], [mlp]
  Tensor mlp_w2, mlp_b2;  // [mlp x d], [d]
};

struct EncoderWeights {
  Tensor embed_w, embed_b;  // [cube_dim x D], [D]
  Tensor pos;               // [N x D], fixed sinusoidal table
  std::vector<BlockWeights> blocks;
  Tensor norm_g, norm_b;  // final norm, applied when depth > 0
};

struct AutoencoderState {
  ModelConfig cfg;
  EncoderWeights enc;
  Tensor proj_w, proj_b;  // encoder -> decoder width
  Tensor mask_token;      // [dec_dim], shared across positions
  Tensor dec_pos;         // [N x dec_dim], fixed sinusoidal table
  std::vector<BlockWeights> dec_blocks;
  Tensor dec_norm_g, dec_norm_b;
  Tensor out_w, out_b;  // [dec_dim x cube_dim], [cube_dim]

  static AutoencoderState init(const ModelConfig& cfg, Rng& rng);
  std::vector<Param> params();
};

struct ClassifierState {
  ModelConfig cfg;
  int64_t num_classes = 2;
  EncoderWeights enc;
  Tensor head_w, head_b;  // [D x K], [K]

  static ClassifierState init(const ModelConfig& cfg, int64_t num_classes, Rng& rng);
  std::vector<Param> params();
};

void set_requires_grad(std::vector<Param>& params, bool value);
void zero_grads(std::vector<Param>& params);

// pe[i, 2k] = sin(i / 10000^(2k/dim)), pe[i, 2k+1] = cos(...), over the
// flattened token index.
Tensor sinusoidal_table(int64_t n, int64_t dim);

// Rearranges a [C x T x H x W] clip into [N x cube_dim] rows, one per
// non-overlapping tubelet x patch x patch cube, temporal-major then row-major
// spatial; within a row the order is (channel, dt, py, px).
Tensor cubify(const Tensor& clip, const ModelConfig& cfg);

// Per-cube normalization of the reconstruction target: subtract the cube
// mean, divide by sqrt(var + 1e-6).
Tensor normalize_targets(const Tensor& clip, const ModelConfig& cfg);

// Linear cube projection plus positional embedding: [N x D].
Tensor cube_embed(const Tensor& clip, const ModelConfig& cfg, const EncoderWeights& enc);

// Pre-norm transformer stack; final norm applied only when blocks exist.
Tensor run_blocks(Tensor x, const std::vector<BlockWeights>& blocks, int64_t heads,
                  const Tensor& norm_g, const Tensor& norm_b);

// Gather encoder-visible rows, run the full-attention encoder over them.
Tensor encode(const Tensor& tokens, const MaskMap& enc_mask, const ModelConfig& cfg,
              const EncoderWeights& enc);

// Z projected to decoder width, then mask tokens for every decoder-kept
// position invisible to the encoder; decoder positional embeddings re-added
// to all rows. Row order: encoder-visible block (ascending), then masked
// block (ascending).
Tensor build_decoder_input(const Tensor& z, const MaskMap& enc_mask, const MaskMap& dec_mask,
                           const ModelConfig& cfg, const AutoencoderState& state);

// Decoder stack plus output projection to cube pixels: [L x cube_dim].
Tensor decode(const Tensor& zc, const ModelConfig& cfg, const AutoencoderState& state);

enum class DenominatorMode {
  DecoderKept,  // |decoder kept| * cube_dim, the realized (1 - rho_d) * N
  ExactCount,  // |loss set| * cube_dim
};

// Mean squared error over the supervised set (decoder-kept, encoder-invisible).
// pred_rows must align with loss_index_set(enc_mask, dec_mask).
Tensor reconstruction_loss(const Tensor& pred_rows, const Tensor& targets, const MaskMap& enc_mask,
                           const MaskMap& dec_mask, DenominatorMode mode);

struct PretrainDiagnostics {
  int64_t n_tokens = 0;
  int64_t n_enc_visible = 0;
  int64_t dec_len = 0;          // actual decoder input length (deduplicated)
  int64_t dec_len_nominal = 0;  // |enc.kept| + |dec.kept|, the arch-table length
  int64_t overlap = 0;          // |enc.kept intersect dec.kept|
  int64_t loss_set_size = 0;
};

struct PretrainOutput {
  Tensor loss;
  PretrainDiagnostics diag;
  MaskMap enc_mask;
  MaskMap dec_mask;
};

// Full dual-masked reconstruction pass: cube_embed -> tube_mask -> encode ->
// running_cell_mask -> build_decoder_input -> decode -> normalize_targets ->
// reconstruction_loss.
PretrainOutput forward_pretrain(const Tensor& clip, const ModelConfig& cfg,
                                const DualMaskConfig& dual, const AutoencoderState& state, Rng& rng,
                                DenominatorMode mode = DenominatorMode::DecoderKept);

// cube_embed -> unmasked encoder -> mean pool -> linear head. Returns [K].
Tensor forward_classify(const Tensor& clip, const ModelConfig& cfg, const ClassifierState& state);

// Closed-form learnable-parameter counts (fixed positional tables excluded).
int64_t param_count_encoder(const ModelConfig& cfg);
int64_t param_count_total(const ModelConfig& cfg);

}  // namespace dualmae
