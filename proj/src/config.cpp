#include "dualmae/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace dualmae {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

const std::vector<ConfigKey>& Config::schema() {
  static const std::vector<ConfigKey> keys = {
      {"model.variant", "toy", "backbone variant: B, L, H, g, or toy"},
      {"model.frames", "auto", "input frames T (auto: 16 for presets, 4 for toy)"},
      {"model.height", "auto", "input height in pixels"},
      {"model.width", "auto", "input width in pixels"},
      {"model.channels", "auto", "input channels (3)"},
      {"model.patch", "auto", "spatial patch size p"},
      {"model.tubelet", "auto", "temporal cube depth t_c (2)"},
      {"model.enc_depth", "auto", "encoder blocks"},
      {"model.enc_dim", "auto", "encoder width"},
      {"model.enc_heads", "auto", "encoder attention heads"},
      {"model.enc_mlp", "auto", "encoder mlp hidden width"},
      {"model.dec_depth", "auto", "decoder blocks (4 for presets)"},
      {"model.dec_dim", "auto", "decoder width (384 for B, 512 for L/H/g)"},
      {"model.dec_heads", "auto", "decoder attention heads"},
      {"model.dec_mlp", "auto", "decoder mlp hidden width"},
      {"mask.rho", "0.9", "encoder masking ratio rho"},
      {"mask.rho_d", "0.5", "decoder masking ratio rho_d"},
      {"mask.cell", "2", "running-cell edge length"},
      {"mask.strategy", "running-cell", "decoder mask for the mask command: running-cell, frame, random"},
      {"train.base_lr", "auto", "base learning rate (pretrain 1.5e-4, posttrain/distill 1e-3, finetune 3e-4)"},
      {"train.batch_size", "4", "clips per optimizer step (production scale: 8192 pretrain, 128 posttrain)"},
      {"train.epochs", "10", "total epochs"},
      {"train.warmup_epochs", "1", "linear warmup epochs (1:10 of total, as at production scale)"},
      {"train.steps_per_epoch", "8", "optimizer steps per epoch (desk-scale stand-in for dataset passes)"},
      {"train.min_lr", "1e-6", "cosine floor"},
      {"train.weight_decay", "0.05", "decoupled weight decay"},
      {"train.beta1", "0.9", "Adam beta1"},
      {"train.beta2", "auto", "Adam beta2 (pretrain 0.95, others 0.999)"},
      {"train.layer_decay", "auto", "layer-wise lr decay (pretrain 1.0, posttrain/finetune 0.9, distill 0.75)"},
      {"train.clip_grad", "auto", "global gradient-norm clip (pretrain 0.02, distill 1.0, others off; 0 disables)"},
      {"train.label_smoothing", "0.1", "label smoothing for supervised stages"},
      {"train.mixup", "auto", "mixup alpha (posttrain/finetune 0.8, others 0)"},
      {"train.temperature", "3.0", "distillation temperature"},
      {"train.repeated_augmentation", "auto", "crops per record per epoch (pretrain 4, supervised 2, distill 1)"},
      {"loss.denominator", "kept", "reconstruction-loss denominator: kept ((1-rho_d)N, the decoder-kept count) or exact (|loss set|)"},
      {"data.manifest", "", "manifest TSV path (empty: synthesize clips)"},
      {"data.clips", "8", "synthetic clips when no manifest is given"},
      {"data.classes", "2", "synthetic class count / classifier classes"},
      {"data.duration", "32", "synthetic clip duration in frames"},
      {"data.source", "synthetic", "source name for synthesized manifests"},
      {"data.stride", "4", "default sampling stride tau"},
      {"data.stride_overrides", "ssv2-syn:2", "per-source stride, name:value pairs (SSv2-style sources use 2)"},
      {"data.flip", "auto", "horizontal flip augmentation (pretrain off, supervised on)"},
      {"stage.init", "", "initialization checkpoint (posttrain: pretrain ckpt; finetune: posttrain ckpt; distill: student init)"},
      {"stage.teacher", "", "teacher checkpoint for distillation"},
  };
  return keys;
}

std::string Config::help_text() {
  std::ostringstream os;
  os << "Config keys (key = value; '#' comments; --set KEY=VALUE overrides the file):\n";
  for (const ConfigKey& k : schema()) {
    os << "  " << k.key;
    for (size_t pad = k.key.size(); pad < 28; ++pad) os << ' ';
    os << "[" << (k.def.empty() ? "''" : k.def) << "] " << k.help << "\n";
  }
  return os.str();
}

Config Config::defaults() {
  Config c;
  for (const ConfigKey& k : schema()) c.values_[k.key] = k.def;
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

Config Config::load(const std::string& path, const std::vector<std::string>& overrides) {
  Config c = defaults();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      size_t eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      c.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
  }
  for (const std::string& kv : overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    c.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  return c;
}

const std::string& Config::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string Config::get_string(const std::string& key) const { return raw(key); }

int64_t Config::get_int(const std::string& key) const {
  const std::string& v = raw(key);
  try {
    size_t used = 0;
    int64_t out = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
  }
}

double Config::get_double(const std::string& key) const {
  const std::string& v = raw(key);
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
  }
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = raw(key);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

int64_t Config::get_int_or(const std::string& key, int64_t fallback) const {
  return is_auto(key) ? fallback : get_int(key);
}

double Config::get_double_or(const std::string& key, double fallback) const {
  return is_auto(key) ? fallback : get_double(key);
}

bool Config::get_bool_or(const std::string& key, bool fallback) const {
  return is_auto(key) ? fallback : get_bool(key);
}

std::string Config::snapshot() const {
  std::ostringstream os;
  for (const ConfigKey& k : schema()) os << k.key << " = " << values_.at(k.key) << "\n";
  return os.str();
}

std::map<std::string, int64_t> Config::get_overrides(const std::string& key) const {
  std::map<std::string, int64_t> out;
  const std::string& v = raw(key);
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw ConfigError("config key '" + key + "': expected name:value pairs");
    try {
      out[trim(item.substr(0, colon))] = std::stoll(trim(item.substr(colon + 1)));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad value in '" + item + "'");
    }
  }
  return out;
}

}  // namespace dualmae
