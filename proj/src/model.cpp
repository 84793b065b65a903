#include "dualmae/model.hpp"

#include <cmath>

namespace dualmae {

namespace {

constexpr double kNormEps = 1e-6;
constexpr double kTargetEps = 1e-6;
constexpr double kInitStd = 0.02;

Tensor trunc_normal(Shape shape, Rng& rng) {
  std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
  for (double& v : data) v = rng.next_trunc_normal(kInitStd);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

BlockWeights init_block(int64_t d, int64_t mlp, Rng& rng) {
  BlockWeights w;
  w.ln1_g = Tensor::full({d}, 1.0, true);
  w.ln1_b = Tensor::zeros({d}, true);
  w.wqkv = trunc_normal({d, 3 * d}, rng);
  w.bqkv = Tensor::zeros({3 * d}, true);
  w.wo = trunc_normal({d, d}, rng);
  w.bo = Tensor::zeros({d}, true);
  w.ln2_g = Tensor::full({d}, 1.0, true);
  w.ln2_b = Tensor::zeros({d}, true);
  w.mlp_w1 = trunc_normal({d, mlp}, rng);
  w.mlp_b1 = Tensor::zeros({mlp}, true);
  w.mlp_w2 = trunc_normal({mlp, d}, rng);
  w.mlp_b2 = Tensor::zeros({d}, true);
  return w;
}

void push_block_params(std::vector<Param>& out, const std::string& prefix, BlockWeights& w,
                       int64_t layer) {
  out.push_back({prefix + ".ln1.g", w.ln1_g, layer});
  out.push_back({prefix + ".ln1.b", w.ln1_b, layer});
  out.push_back({prefix + ".attn.wqkv", w.wqkv, layer});
  out.push_back({prefix + ".attn.bqkv", w.bqkv, layer});
  out.push_back({prefix + ".attn.wo", w.wo, layer});
  out.push_back({prefix + ".attn.bo", w.bo, layer});
  out.push_back({prefix + ".ln2.g", w.ln2_g, layer});
  out.push_back({prefix + ".ln2.b", w.ln2_b, layer});
  out.push_back({prefix + ".mlp.w1", w.mlp_w1, layer});
  out.push_back({prefix + ".mlp.b1", w.mlp_b1, layer});
  out.push_back({prefix + ".mlp.w2", w.mlp_w2, layer});
  out.push_back({prefix + ".mlp.b2", w.mlp_b2, layer});
}

EncoderWeights init_encoder(const ModelConfig& cfg, Rng& rng) {
  EncoderWeights enc;
  enc.embed_w = trunc_normal({cfg.cube_dim(), cfg.enc_dim}, rng);
  enc.embed_b = Tensor::zeros({cfg.enc_dim}, true);
  enc.pos = sinusoidal_table(cfg.n_tokens(), cfg.enc_dim);
  for (int64_t i = 0; i < cfg.enc_depth; ++i)
    enc.blocks.push_back(init_block(cfg.enc_dim, cfg.enc_mlp, rng));
  enc.norm_g = Tensor::full({cfg.enc_dim}, 1.0, true);
  enc.norm_b = Tensor::zeros({cfg.enc_dim}, true);
  return enc;
}

void push_encoder_params(std::vector<Param>& out, EncoderWeights& enc, int64_t depth) {
  out.push_back({"embed.w", enc.embed_w, 0});
  out.push_back({"embed.b", enc.embed_b, 0});
  for (int64_t i = 0; i < static_cast<int64_t>(enc.blocks.size()); ++i)
    push_block_params(out, "enc.blk" + std::to_string(i), enc.blocks[static_cast<size_t>(i)], i + 1);
  out.push_back({"enc.norm.g", enc.norm_g, depth + 1});
  out.push_back({"enc.norm.b", enc.norm_b, depth + 1});
}

Tensor mlp_forward(const Tensor& x, const BlockWeights& w) {
  Tensor h = gelu(add_row_bias(matmul(x, w.mlp_w1), w.mlp_b1));
  return add_row_bias(matmul(h, w.mlp_w2), w.mlp_b2);
}

Tensor attention(const Tensor& x, const BlockWeights& w, int64_t heads) {
  int64_t d = x.dim(1);
  int64_t dh = d / heads;
  Tensor qkv = add_row_bias(matmul(x, w.wqkv), w.bqkv);
  std::vector<Tensor> head_outs;
  head_outs.reserve(static_cast<size_t>(heads));
  double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int64_t h = 0; h < heads; ++h) {
    Tensor q = slice_cols(qkv, h * dh, dh);
    Tensor k = slice_cols(qkv, d + h * dh, dh);
    Tensor v = slice_cols(qkv, 2 * d + h * dh, dh);
    Tensor probs = softmax(scale(matmul(q, transpose(k)), inv_sqrt_dh));
    head_outs.push_back(matmul(probs, v));
  }
  Tensor o = heads == 1 ? head_outs.front() : concat_cols(head_outs);
  return add_row_bias(matmul(o, w.wo), w.bo);
}

Tensor block_forward(Tensor x, const BlockWeights& w, int64_t heads) {
  x = add(x, attention(layer_norm(x, w.ln1_g, w.ln1_b, kNormEps), w, heads));
  x = add(x, mlp_forward(layer_norm(x, w.ln2_g, w.ln2_b, kNormEps), w));
  return x;
}

int64_t block_param_count(int64_t d, int64_t mlp) {
  int64_t norms = 4 * d;
  int64_t attn = (3 * d * d + 3 * d) + (d * d + d);
  int64_t ffn = (d * mlp + mlp) + (mlp * d + d);
  return norms + attn + ffn;
}

}  // namespace

void ModelConfig::validate() const {
  if (channels <= 0 || frames <= 0 || height <= 0 || width <= 0)
    throw ConfigError("model: clip dimensions must be positive");
  if (patch <= 0 || tubelet <= 0) throw ConfigError("model: patch/tubelet must be positive");
  if (height % patch != 0 || width % patch != 0)
    throw ConfigError("model: patch must divide height and width");
  if (frames % tubelet != 0) throw ConfigError("model: tubelet must divide frames");
  if (enc_depth < 0 || dec_depth < 0) throw ConfigError("model: negative depth");
  if (enc_dim <= 0 || dec_dim <= 0 || enc_mlp <= 0 || dec_mlp <= 0)
    throw ConfigError("model: widths must be positive");
  if (enc_heads <= 0 || enc_dim % enc_heads != 0)
    throw ConfigError("model: enc_heads must divide enc_dim");
  if (dec_heads <= 0 || dec_dim % dec_heads != 0)
    throw ConfigError("model: dec_heads must divide dec_dim");
}

ModelConfig ModelConfig::preset(Variant v) {
  ModelConfig c;
  c.variant = v;
  switch (v) {
    case Variant::B:
      c.patch = 16; c.enc_depth = 12; c.enc_dim = 768; c.enc_heads = 12; c.enc_mlp = 3072;
      c.dec_depth = 4; c.dec_dim = 384; c.dec_heads = 6; c.dec_mlp = 1536;
      break;
    case Variant::L:
      c.patch = 16; c.enc_depth = 24; c.enc_dim = 1024; c.enc_heads = 16; c.enc_mlp = 4096;
      c.dec_depth = 4; c.dec_dim = 512; c.dec_heads = 8; c.dec_mlp = 2048;
      break;
    case Variant::H:
      c.patch = 14; c.enc_depth = 32; c.enc_dim = 1280; c.enc_heads = 16; c.enc_mlp = 5120;
      c.dec_depth = 4; c.dec_dim = 512; c.dec_heads = 8; c.dec_mlp = 2048;
      break;
    case Variant::G:
      c.patch = 14; c.enc_depth = 40; c.enc_dim = 1408; c.enc_heads = 16; c.enc_mlp = 6144;
      c.dec_depth = 4; c.dec_dim = 512; c.dec_heads = 8; c.dec_mlp = 2048;
      break;
    case Variant::Toy:
      return c;  // defaults are the toy model
  }
  c.tubelet = 2;
  c.frames = 16;
  c.height = 224;
  c.width = 224;
  c.channels = 3;
  return c;
}

Variant ModelConfig::variant_from_string(const std::string& name) {
  if (name == "B" || name == "b") return Variant::B;
  if (name == "L" || name == "l") return Variant::L;
  if (name == "H" || name == "h") return Variant::H;
  if (name == "g" || name == "G") return Variant::G;
  if (name == "toy") return Variant::Toy;
  throw ConfigError("unknown variant '" + name + "' (expected B, L, H, g, or toy)");
}

std::string ModelConfig::variant_name(Variant v) {
  switch (v) {
    case Variant::B: return "B";
    case Variant::L: return "L";
    case Variant::H: return "H";
    case Variant::G: return "g";
    case Variant::Toy: return "toy";
  }
  return "?";
}

AutoencoderState AutoencoderState::init(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  AutoencoderState s;
  s.cfg = cfg;
  s.enc = init_encoder(cfg, rng);
  s.proj_w = trunc_normal({cfg.enc_dim, cfg.dec_dim}, rng);
  s.proj_b = Tensor::zeros({cfg.dec_dim}, true);
  s.mask_token = trunc_normal({cfg.dec_dim}, rng);
  s.dec_pos = sinusoidal_table(cfg.n_tokens(), cfg.dec_dim);
  for (int64_t i = 0; i < cfg.dec_depth; ++i)
    s.dec_blocks.push_back(init_block(cfg.dec_dim, cfg.dec_mlp, rng));
  s.dec_norm_g = Tensor::full({cfg.dec_dim}, 1.0, true);
  s.dec_norm_b = Tensor::zeros({cfg.dec_dim}, true);
  s.out_w = trunc_normal({cfg.dec_dim, cfg.cube_dim()}, rng);
  s.out_b = Tensor::zeros({cfg.cube_dim()}, true);
  return s;
}

std::vector<Param> AutoencoderState::params() {
  std::vector<Param> out;
  push_encoder_params(out, enc, cfg.enc_depth);
  int64_t tail = cfg.enc_depth + 1;
  out.push_back({"proj.w", proj_w, tail});
  out.push_back({"proj.b", proj_b, tail});
  out.push_back({"mask_token", mask_token, tail});
  for (int64_t i = 0; i < static_cast<int64_t>(dec_blocks.size()); ++i)
    push_block_params(out, "dec.blk" + std::to_string(i), dec_blocks[static_cast<size_t>(i)], tail);
  out.push_back({"dec.norm.g", dec_norm_g, tail});
  out.push_back({"dec.norm.b", dec_norm_b, tail});
  out.push_back({"out.w", out_w, tail});
  out.push_back({"out.b", out_b, tail});
  return out;
}

ClassifierState ClassifierState::init(const ModelConfig& cfg, int64_t num_classes, Rng& rng) {
  cfg.validate();
  if (num_classes < 2) throw ConfigError("classifier: num_classes must be >= 2");
  ClassifierState s;
  s.cfg = cfg;
  s.num_classes = num_classes;
  s.enc = init_encoder(cfg, rng);
  s.head_w = trunc_normal({cfg.enc_dim, num_classes}, rng);
  s.head_b = Tensor::zeros({num_classes}, true);
  return s;
}

std::vector<Param> ClassifierState::params() {
  std::vector<Param> out;
  push_encoder_params(out, enc, cfg.enc_depth);
  out.push_back({"head.w", head_w, cfg.enc_depth + 1});
  out.push_back({"head.b", head_b, cfg.enc_depth + 1});
  return out;
}

void set_requires_grad(std::vector<Param>& params, bool value) {
  for (Param& p : params) p.tensor.set_requires_grad(value);
}

void zero_grads(std::vector<Param>& params) {
  for (Param& p : params) p.tensor.zero_grad();
}

Tensor sinusoidal_table(int64_t n, int64_t dim) {
  std::vector<double> data(static_cast<size_t>(n * dim));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < dim; j += 2) {
      double freq = std::pow(10000.0, -static_cast<double>(j) / static_cast<double>(dim));
      double angle = static_cast<double>(i) * freq;
      data[static_cast<size_t>(i * dim + j)] = std::sin(angle);
      if (j + 1 < dim) data[static_cast<size_t>(i * dim + j + 1)] = std::cos(angle);
    }
  }
  return Tensor::from_data({n, dim}, std::move(data));
}

Tensor cubify(const Tensor& clip, const ModelConfig& cfg) {
  cfg.validate();
  Shape expected{cfg.channels, cfg.frames, cfg.height, cfg.width};
  if (clip.shape() != expected) throw ShapeError("cubify: clip shape does not match config");

  const int64_t C = cfg.channels, T = cfg.frames, H = cfg.height, W = cfg.width;
  const int64_t tc = cfg.tubelet, p = cfg.patch;
  const int64_t n = cfg.n_tokens(), cd = cfg.cube_dim();
  std::vector<double> out(static_cast<size_t>(n * cd));
  const double* src = clip.data().data();
  for (int64_t ts = 0; ts < cfg.t_tokens(); ++ts) {
    for (int64_t sr = 0; sr < cfg.s_rows(); ++sr) {
      for (int64_t sc = 0; sc < cfg.s_cols(); ++sc) {
        int64_t token = ts * cfg.s_tokens() + sr * cfg.s_cols() + sc;
        double* dst = out.data() + token * cd;
        for (int64_t c = 0; c < C; ++c)
          for (int64_t dt = 0; dt < tc; ++dt)
            for (int64_t py = 0; py < p; ++py)
              for (int64_t px = 0; px < p; ++px) {
                int64_t t = ts * tc + dt, y = sr * p + py, x = sc * p + px;
                dst[((c * tc + dt) * p + py) * p + px] = src[((c * T + t) * H + y) * W + x];
              }
      }
    }
  }
  return Tensor::from_data({n, cd}, std::move(out));
}

Tensor normalize_targets(const Tensor& clip, const ModelConfig& cfg) {
  Tensor cubes = cubify(clip, cfg);
  const int64_t n = cubes.dim(0), cd = cubes.dim(1);
  std::vector<double> out(cubes.data().begin(), cubes.data().end());
  for (int64_t i = 0; i < n; ++i) {
    double* row = out.data() + i * cd;
    double mean = 0.0;
    for (int64_t j = 0; j < cd; ++j) mean += row[j];
    mean /= static_cast<double>(cd);
    double var = 0.0;
    for (int64_t j = 0; j < cd; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(cd);
    double inv = 1.0 / std::sqrt(var + kTargetEps);
    for (int64_t j = 0; j < cd; ++j) row[j] = (row[j] - mean) * inv;
  }
  return Tensor::from_data({n, cd}, std::move(out));
}

Tensor cube_embed(const Tensor& clip, const ModelConfig& cfg, const EncoderWeights& enc) {
  Tensor cubes = cubify(clip, cfg);
  return add(add_row_bias(matmul(cubes, enc.embed_w), enc.embed_b), enc.pos);
}

Tensor run_blocks(Tensor x, const std::vector<BlockWeights>& blocks, int64_t heads,
                  const Tensor& norm_g, const Tensor& norm_b) {
  for (const BlockWeights& w : blocks) x = block_forward(x, w, heads);
  if (!blocks.empty()) x = layer_norm(x, norm_g, norm_b, kNormEps);
  return x;
}

Tensor encode(const Tensor& tokens, const MaskMap& enc_mask, const ModelConfig& cfg,
              const EncoderWeights& enc) {
  if (enc_mask.role != MaskRole::EncoderVisible)
    throw ContractError("encode: mask role must be EncoderVisible");
  if (enc_mask.grid != cfg.grid()) throw ContractError("encode: mask grid does not match config");
  Tensor visible = gather_rows(tokens, enc_mask.kept);
  return run_blocks(visible, enc.blocks, cfg.enc_heads, enc.norm_g, enc.norm_b);
}

Tensor build_decoder_input(const Tensor& z, const MaskMap& enc_mask, const MaskMap& dec_mask,
                           const ModelConfig& cfg, const AutoencoderState& state) {
  if (enc_mask.grid != dec_mask.grid)
    throw ContractError("build_decoder_input: masks are on different grids");
  if (enc_mask.grid != cfg.grid())
    throw ContractError("build_decoder_input: mask grid does not match config");
  if (enc_mask.role != MaskRole::EncoderVisible || dec_mask.role != MaskRole::DecoderKept)
    throw ContractError("build_decoder_input: mask roles are wrong");
  if (z.rows() != enc_mask.count())
    throw ContractError("build_decoder_input: Z row count != |enc.kept|");

  Tensor visible = add(add_row_bias(matmul(z, state.proj_w), state.proj_b),
                       gather_rows(state.dec_pos, enc_mask.kept));
  std::vector<int64_t> masked = loss_index_set(enc_mask, dec_mask);
  if (masked.empty()) return visible;
  Tensor mask_rows = add(broadcast_row(state.mask_token, static_cast<int64_t>(masked.size())),
                         gather_rows(state.dec_pos, masked));
  return concat_rows({visible, mask_rows});
}

Tensor decode(const Tensor& zc, const ModelConfig& cfg, const AutoencoderState& state) {
  Tensor y = run_blocks(zc, state.dec_blocks, cfg.dec_heads, state.dec_norm_g, state.dec_norm_b);
  return add_row_bias(matmul(y, state.out_w), state.out_b);
}

Tensor reconstruction_loss(const Tensor& pred_rows, const Tensor& targets, const MaskMap& enc_mask,
                           const MaskMap& dec_mask, DenominatorMode mode) {
  std::vector<int64_t> set = loss_index_set(enc_mask, dec_mask);
  if (set.empty()) throw ConfigError("reconstruction_loss: empty loss set (degenerate dual-mask config)");
  if (pred_rows.rows() != static_cast<int64_t>(set.size()))
    throw ContractError("reconstruction_loss: prediction rows do not align with the loss set");
  const int64_t cd = targets.dim(1);
  if (pred_rows.cols() != cd) throw ShapeError("reconstruction_loss: cube width mismatch");

  Tensor diff = sub(pred_rows, gather_rows(targets, set));
  Tensor total = sum_all(mul(diff, diff));
  double denom = mode == DenominatorMode::DecoderKept
                     ? static_cast<double>(dec_mask.count() * cd)
                     : static_cast<double>(static_cast<int64_t>(set.size()) * cd);
  return scale(total, 1.0 / denom);
}

PretrainOutput forward_pretrain(const Tensor& clip, const ModelConfig& cfg,
                                const DualMaskConfig& dual, const AutoencoderState& state, Rng& rng,
                                DenominatorMode mode) {
  cfg.validate();
  dual.validate(cfg.grid());

  PretrainOutput out;
  out.enc_mask = tube_mask(cfg.grid(), dual.rho, rng);
  out.dec_mask = running_cell_mask(cfg.grid(), dual.rho_d, dual.cell);

  Tensor tokens = cube_embed(clip, cfg, state.enc);
  Tensor z = encode(tokens, out.enc_mask, cfg, state.enc);
  Tensor zc = build_decoder_input(z, out.enc_mask, out.dec_mask, cfg, state);
  Tensor preds = decode(zc, cfg, state);

  int64_t n_vis = out.enc_mask.count();
  Tensor masked_preds = slice_rows(preds, n_vis, preds.rows() - n_vis);
  Tensor targets = normalize_targets(clip, cfg);
  out.loss = reconstruction_loss(masked_preds, targets, out.enc_mask, out.dec_mask, mode);

  std::vector<int64_t> set = loss_index_set(out.enc_mask, out.dec_mask);
  out.diag.n_tokens = cfg.n_tokens();
  out.diag.n_enc_visible = n_vis;
  out.diag.dec_len = zc.rows();
  out.diag.dec_len_nominal = n_vis + out.dec_mask.count();
  out.diag.overlap = out.diag.dec_len_nominal - out.diag.dec_len;
  out.diag.loss_set_size = static_cast<int64_t>(set.size());
  return out;
}

Tensor forward_classify(const Tensor& clip, const ModelConfig& cfg, const ClassifierState& state) {
  Tensor tokens = cube_embed(clip, cfg, state.enc);
  Tensor z = run_blocks(tokens, state.enc.blocks, cfg.enc_heads, state.enc.norm_g, state.enc.norm_b);
  Tensor pooled = reshape(mean_rows(z), {1, cfg.enc_dim});
  Tensor logits = add_row_bias(matmul(pooled, state.head_w), state.head_b);
  return reshape(logits, {state.num_classes});
}

int64_t param_count_encoder(const ModelConfig& cfg) {
  int64_t d = cfg.enc_dim;
  int64_t total = cfg.cube_dim() * d + d;  // cube embedding
  total += cfg.enc_depth * block_param_count(d, cfg.enc_mlp);
  if (cfg.enc_depth > 0) total += 2 * d;  // final norm
  return total;
}

int64_t param_count_total(const ModelConfig& cfg) {
  int64_t total = param_count_encoder(cfg);
  total += cfg.enc_dim * cfg.dec_dim + cfg.dec_dim;  // projector
  total += cfg.dec_dim;                              // mask token
  total += cfg.dec_depth * block_param_count(cfg.dec_dim, cfg.dec_mlp);
  if (cfg.dec_depth > 0) total += 2 * cfg.dec_dim;
  total += cfg.dec_dim * cfg.cube_dim() + cfg.cube_dim();  // output projector
  return total;
}

}  // namespace dualmae
