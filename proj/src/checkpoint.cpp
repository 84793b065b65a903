#include "dualmae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace dualmae {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'A', 'E', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("truncated checkpoint: " + path);
  return value;
}

void put_config(std::ofstream& out, const ModelConfig& cfg) {
  put<uint32_t>(out, static_cast<uint32_t>(cfg.variant));
  for (int64_t v : {cfg.patch, cfg.tubelet, cfg.enc_depth, cfg.enc_dim, cfg.enc_heads, cfg.enc_mlp,
                    cfg.dec_depth, cfg.dec_dim, cfg.dec_heads, cfg.dec_mlp, cfg.frames, cfg.height,
                    cfg.width, cfg.channels})
    put<int64_t>(out, v);
}

ModelConfig take_config(std::ifstream& in, const std::string& path) {
  ModelConfig cfg;
  cfg.variant = static_cast<Variant>(take<uint32_t>(in, path));
  for (int64_t* field : {&cfg.patch, &cfg.tubelet, &cfg.enc_depth, &cfg.enc_dim, &cfg.enc_heads,
                         &cfg.enc_mlp, &cfg.dec_depth, &cfg.dec_dim, &cfg.dec_heads, &cfg.dec_mlp,
                         &cfg.frames, &cfg.height, &cfg.width, &cfg.channels})
    *field = take<int64_t>(in, path);
  return cfg;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const std::vector<Param>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  put<uint32_t>(out, kVersion);
  put_config(out, cfg);
  put<uint64_t>(out, params.size());
  for (const Param& p : params) {
    put<uint32_t>(out, static_cast<uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<uint32_t>(out, static_cast<uint32_t>(p.tensor.rank()));
    for (int64_t d : p.tensor.shape()) put<int64_t>(out, d);
    auto data = p.tensor.data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path);
  uint32_t version = take<uint32_t>(in, path);
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path);

  Checkpoint ckpt;
  ckpt.cfg = take_config(in, path);
  uint64_t count = take<uint64_t>(in, path);
  ckpt.tensors.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = take<uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint32_t rank = take<uint32_t>(in, path);
    Shape shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = take<int64_t>(in, path);
    std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint: " + path);
    ckpt.tensors.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
  }
  return ckpt;
}

void check_config_match(const ModelConfig& expected, const ModelConfig& loaded) {
  std::string divergent;
  auto compare = [&](const char* name, int64_t a, int64_t b) {
    if (a != b) divergent += std::string(divergent.empty() ? "" : ", ") + name;
  };
  if (expected.variant != loaded.variant) divergent += "variant";
  compare("patch", expected.patch, loaded.patch);
  compare("tubelet", expected.tubelet, loaded.tubelet);
  compare("enc_depth", expected.enc_depth, loaded.enc_depth);
  compare("enc_dim", expected.enc_dim, loaded.enc_dim);
  compare("enc_heads", expected.enc_heads, loaded.enc_heads);
  compare("enc_mlp", expected.enc_mlp, loaded.enc_mlp);
  compare("dec_depth", expected.dec_depth, loaded.dec_depth);
  compare("dec_dim", expected.dec_dim, loaded.dec_dim);
  compare("dec_heads", expected.dec_heads, loaded.dec_heads);
  compare("dec_mlp", expected.dec_mlp, loaded.dec_mlp);
  compare("frames", expected.frames, loaded.frames);
  compare("height", expected.height, loaded.height);
  compare("width", expected.width, loaded.width);
  compare("channels", expected.channels, loaded.channels);
  if (!divergent.empty())
    throw ConfigError("checkpoint config mismatch, divergent fields: " + divergent);
}

namespace {

void copy_into(Param& p, const Tensor& src, const std::string& context) {
  if (src.shape() != p.tensor.shape())
    throw ConfigError(context + ": shape mismatch for '" + p.name + "'");
  auto dst = p.tensor.mutable_data();
  std::copy(src.data().begin(), src.data().end(), dst.begin());
}

}  // namespace

void load_params(std::vector<Param>& params, const Checkpoint& ckpt) {
  for (Param& p : params) {
    const Tensor* src = ckpt.find(p.name);
    if (!src) throw ConfigError("checkpoint is missing tensor '" + p.name + "'");
    copy_into(p, *src, "checkpoint load");
  }
}

size_t load_params_prefix(std::vector<Param>& params, const Checkpoint& ckpt,
                          const std::vector<std::string>& prefixes) {
  size_t loaded = 0;
  for (Param& p : params) {
    bool wanted = false;
    for (const std::string& prefix : prefixes)
      if (p.name.rfind(prefix, 0) == 0) wanted = true;
    if (!wanted) continue;
    const Tensor* src = ckpt.find(p.name);
    if (!src) throw ConfigError("checkpoint is missing tensor '" + p.name + "'");
    copy_into(p, *src, "checkpoint load");
    ++loaded;
  }
  return loaded;
}

}  // namespace dualmae
