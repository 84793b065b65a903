#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dualmae/model.hpp"
#include "dualmae/rng.hpp"
#include "dualmae/tensor.hpp"

namespace dualmae::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
  std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
  for (double& v : data) v = lo + (hi - lo) * rng.next_double();
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  auto da = a.data(), db = b.data();
  for (size_t i = 0; i < da.size(); ++i)
    if (da[i] != db[i]) return false;
  return true;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  auto da = a.data(), db = b.data();
  for (size_t i = 0; i < da.size(); ++i) worst = std::max(worst, std::abs(da[i] - db[i]));
  return worst;
}

// Named tensor shapes of an autoencoder, written out independently of both
// AutoencoderState::init and the closed-form parameter count; the
// direct-construction oracle for parameter totals.
inline std::vector<std::pair<std::string, Shape>> autoencoder_schema(const ModelConfig& cfg) {
  std::vector<std::pair<std::string, Shape>> out;
  auto block = [&out](const std::string& prefix, int64_t d, int64_t mlp) {
    out.push_back({prefix + ".ln1.g", {d}});
    out.push_back({prefix + ".ln1.b", {d}});
    out.push_back({prefix + ".attn.wqkv", {d, 3 * d}});
    out.push_back({prefix + ".attn.bqkv", {3 * d}});
    out.push_back({prefix + ".attn.wo", {d, d}});
    out.push_back({prefix + ".attn.bo", {d}});
    out.push_back({prefix + ".ln2.g", {d}});
    out.push_back({prefix + ".ln2.b", {d}});
    out.push_back({prefix + ".mlp.w1", {d, mlp}});
    out.push_back({prefix + ".mlp.b1", {mlp}});
    out.push_back({prefix + ".mlp.w2", {mlp, d}});
    out.push_back({prefix + ".mlp.b2", {d}});
  };
  out.push_back({"embed.w", {cfg.cube_dim(), cfg.enc_dim}});
  out.push_back({"embed.b", {cfg.enc_dim}});
  for (int64_t i = 0; i < cfg.enc_depth; ++i)
    block("enc.blk" + std::to_string(i), cfg.enc_dim, cfg.enc_mlp);
  out.push_back({"enc.norm.g", {cfg.enc_dim}});
  out.push_back({"enc.norm.b", {cfg.enc_dim}});
  out.push_back({"proj.w", {cfg.enc_dim, cfg.dec_dim}});
  out.push_back({"proj.b", {cfg.dec_dim}});
  out.push_back({"mask_token", {cfg.dec_dim}});
  for (int64_t i = 0; i < cfg.dec_depth; ++i)
    block("dec.blk" + std::to_string(i), cfg.dec_dim, cfg.dec_mlp);
  out.push_back({"dec.norm.g", {cfg.dec_dim}});
  out.push_back({"dec.norm.b", {cfg.dec_dim}});
  out.push_back({"out.w", {cfg.dec_dim, cfg.cube_dim()}});
  out.push_back({"out.b", {cfg.cube_dim()}});
  return out;
}

inline int64_t schema_param_sum(const ModelConfig& cfg) {
  int64_t total = 0;
  for (auto& [name, shape] : autoencoder_schema(cfg)) total += shape_numel(shape);
  return total;
}

inline int64_t schema_encoder_sum(const ModelConfig& cfg) {
  int64_t total = 0;
  for (auto& [name, shape] : autoencoder_schema(cfg)) {
    bool enc_path = name.rfind("embed.", 0) == 0 || name.rfind("enc.", 0) == 0;
    if (enc_path) total += shape_numel(shape);
  }
  return total;
}

// Central-difference check over every coordinate of every parameter. The
// analytic gradients come from one backward pass of `forward`; the numeric
// probes re-run `forward` with each coordinate nudged in place. `forward`
// must be deterministic (re-seed any mask rng inside it).
inline double param_grad_check(const std::function<Tensor()>& forward, std::vector<Param>& params,
                               double h) {
  zero_grads(params);
  Tensor loss = forward();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Param& p : params) {
    analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    if (analytic.back().empty()) analytic.back().assign(static_cast<size_t>(p.tensor.size()), 0.0);
  }

  set_requires_grad(params, false);  // numeric probes do not need graphs
  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto data = params[pi].tensor.mutable_data();
    for (size_t i = 0; i < data.size(); ++i) {
      double saved = data[i];
      data[i] = saved + h;
      double fp = forward().value();
      data[i] = saved - h;
      double fm = forward().value();
      data[i] = saved;
      double numeric = (fp - fm) / (2.0 * h);
      double err = std::abs(analytic[pi][i] - numeric) / std::max(1.0, std::abs(analytic[pi][i]));
      worst = std::max(worst, err);
    }
  }
  set_requires_grad(params, true);
  return worst;
}

}  // namespace dualmae::testing
