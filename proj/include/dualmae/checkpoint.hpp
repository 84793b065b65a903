#pragma once

#include <string>
#include <vector>

#include "dualmae/model.hpp"

namespace dualmae {

// Binary checkpoint: magic "DMAECKPT", u32 format version, ModelConfig fields,
// then named tensors (u32 name length, name bytes, u32 rank, i64 dims,
// little-endian f64 payload). Round trips bit-exactly.
struct Checkpoint {
  ModelConfig cfg;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const std::vector<Param>& params);
Checkpoint load_checkpoint(const std::string& path);

// ConfigError naming every divergent field.
void check_config_match(const ModelConfig& expected, const ModelConfig& loaded);

// Strict: every param name must exist in the checkpoint with the same shape.
void load_params(std::vector<Param>& params, const Checkpoint& ckpt);

// Loads every param whose name starts with one of the prefixes; all such
// names must be present with matching shapes. Returns loaded count.
size_t load_params_prefix(std::vector<Param>& params, const Checkpoint& ckpt,
                          const std::vector<std::string>& prefixes);

}  // namespace dualmae
