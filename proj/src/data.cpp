#include "dualmae/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace dualmae {

namespace {

constexpr const char* kSplitNames[] = {"train", "val"};

std::string split_name(Split s) { return kSplitNames[static_cast<int>(s)]; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  throw IoError("manifest: unknown split '" + s + "'");
}

void check_field(const std::string& value, const char* what) {
  if (value.find('\t') != std::string::npos || value.find('\n') != std::string::npos)
    throw ConfigError(std::string("manifest ") + what + " contains tab or newline: '" + value + "'");
}

struct Pattern {
  double ax, ay;
  double phase[3];
};

Pattern pattern_from(Rng& rng) {
  Pattern p;
  p.ax = 0.3 + rng.next_double() * 1.2;
  p.ay = 0.3 + rng.next_double() * 1.2;
  for (double& ph : p.phase) ph = rng.next_double() * 2.0 * std::numbers::pi;
  return p;
}

double pattern_value(const Pattern& p, int64_t c, double y, double x) {
  return 0.5 + 0.5 * std::sin(p.ax * x + p.ay * y + p.phase[c % 3]);
}

void validate_spec(const ClipSpec& spec) {
  if (spec.channels <= 0 || spec.frames <= 0 || spec.height <= 0 || spec.width <= 0)
    throw ConfigError("clip spec dimensions must be positive");
}

size_t pix(const ClipSpec& s, int64_t c, int64_t t, int64_t y, int64_t x) {
  return static_cast<size_t>(((c * s.frames + t) * s.height + y) * s.width + x);
}

}  // namespace

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  std::set<std::string> val_ids;
  for (const ClipRecord& r : records)
    if (r.split == Split::Val) val_ids.insert(r.video_id);
  for (const ClipRecord& r : records) {
    if (r.video_id.empty()) throw ConfigError("manifest: empty video_id");
    if (!ids.insert(r.video_id).second)
      throw ConfigError("manifest: duplicate video_id '" + r.video_id + "'");
    if (r.split == Split::Train && val_ids.count(r.video_id))
      throw ConfigError("manifest: train video_id '" + r.video_id + "' leaks into val");
    if (r.duration_frames < 1)
      throw ConfigError("manifest: nonpositive duration for '" + r.video_id + "'");
    if (r.label) {
      if (*r.label < 0 || *r.label >= static_cast<int64_t>(label_space.size()))
        throw ConfigError("manifest: label index out of range for '" + r.video_id + "'");
    }
  }
}

std::vector<size_t> DatasetManifest::train_indices() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].split == Split::Train) out.push_back(i);
  return out;
}

DatasetManifest build_hybrid_manifest(
    const std::vector<std::pair<std::string, std::vector<SourceClip>>>& sources,
    const std::map<std::string, std::string>& alias_map, const std::set<std::string>& val_ids) {
  // alias_map must cover every labeled source label
  std::set<std::string> offenders;
  for (const auto& [name, clips] : sources)
    for (const SourceClip& c : clips)
      if (c.label && !alias_map.count(*c.label)) offenders.insert(name + "/" + *c.label);
  if (!offenders.empty()) {
    std::string msg = "alias_map missing labels:";
    for (const std::string& o : offenders) msg += " " + o;
    throw ConfigError(msg);
  }

  DatasetManifest m;
  m.alias_map = alias_map;
  std::set<std::string> seen;
  std::map<std::string, int64_t> label_index;
  for (const auto& [name, clips] : sources) {
    for (const SourceClip& c : clips) {
      if (!seen.insert(c.video_id).second) continue;  // first occurrence wins
      if (c.split == Split::Train && val_ids.count(c.video_id)) continue;
      ClipRecord r;
      r.source = name;
      r.video_id = c.video_id;
      r.split = c.split;
      r.duration_frames = c.duration_frames;
      if (c.label) {
        const std::string& unified = alias_map.at(*c.label);
        auto [it, inserted] =
            label_index.try_emplace(unified, static_cast<int64_t>(m.label_space.size()));
        if (inserted) m.label_space.push_back(unified);
        r.label = it->second;
      }
      m.records.push_back(std::move(r));
    }
  }
  m.validate();
  return m;
}

void write_manifest_tsv(const DatasetManifest& manifest, const std::string& path) {
  manifest.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open manifest for writing: " + path);
  for (const ClipRecord& r : manifest.records) {
    check_field(r.source, "source");
    check_field(r.video_id, "video_id");
    std::string label = "-";
    if (r.label) {
      label = manifest.label_space[static_cast<size_t>(*r.label)];
      check_field(label, "label");
    }
    out << r.source << '\t' << r.video_id << '\t' << label << '\t' << split_name(r.split) << '\t'
        << r.duration_frames << '\n';
  }
  if (!out) throw IoError("failed writing manifest: " + path);
}

DatasetManifest load_manifest_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  DatasetManifest m;
  std::map<std::string, int64_t> label_index;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    size_t at = 0;
    while (true) {
      size_t tab = line.find('\t', at);
      fields.push_back(line.substr(at, tab == std::string::npos ? tab : tab - at));
      if (tab == std::string::npos) break;
      at = tab + 1;
    }
    if (fields.size() != 5)
      throw IoError("manifest line " + std::to_string(line_no) + ": expected 5 tab-separated fields");
    ClipRecord r;
    r.source = fields[0];
    r.video_id = fields[1];
    r.split = split_from_string(fields[3]);
    try {
      r.duration_frames = std::stoll(fields[4]);
    } catch (const std::exception&) {
      throw IoError("manifest line " + std::to_string(line_no) + ": bad duration '" + fields[4] + "'");
    }
    if (fields[2] != "-") {
      auto [it, inserted] =
          label_index.try_emplace(fields[2], static_cast<int64_t>(m.label_space.size()));
      if (inserted) m.label_space.push_back(fields[2]);
      r.label = it->second;
    }
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

ClipKind clip_kind_from_string(const std::string& name) {
  if (name == "static") return ClipKind::Static;
  if (name == "translate") return ClipKind::Translate;
  if (name == "rotate-luminance") return ClipKind::RotateLuminance;
  throw ConfigError("unknown clip kind '" + name + "'");
}

Tensor synth_clip(uint64_t seed, ClipKind kind, const ClipSpec& spec) {
  validate_spec(spec);
  if (kind == ClipKind::Translate) {
    Rng rng = Rng(seed).split(101);
    int64_t vx = 0, vy = 0;
    while (vx == 0 && vy == 0) {
      vx = static_cast<int64_t>(rng.next_below(5)) - 2;
      vy = static_cast<int64_t>(rng.next_below(5)) - 2;
    }
    return synth_translate_clip(seed, vx, vy, spec);
  }

  Rng rng(seed);
  Pattern p = pattern_from(rng);
  std::vector<double> data(static_cast<size_t>(spec.channels * spec.frames * spec.height * spec.width));
  double omega = 2.0 * std::numbers::pi / static_cast<double>(spec.frames) *
                 (1.0 + static_cast<double>(rng.next_below(2)));
  double phase = rng.next_double() * 2.0 * std::numbers::pi;
  for (int64_t c = 0; c < spec.channels; ++c)
    for (int64_t t = 0; t < spec.frames; ++t) {
      double lum = kind == ClipKind::Static
                       ? 1.0
                       : 0.55 + 0.45 * std::sin(omega * static_cast<double>(t) + phase);
      for (int64_t y = 0; y < spec.height; ++y)
        for (int64_t x = 0; x < spec.width; ++x)
          data[pix(spec, c, t, y, x)] =
              lum * pattern_value(p, c, static_cast<double>(y), static_cast<double>(x));
    }
  return Tensor::from_data({spec.channels, spec.frames, spec.height, spec.width}, std::move(data));
}

Tensor synth_translate_clip(uint64_t seed, int64_t vx, int64_t vy, const ClipSpec& spec) {
  validate_spec(spec);
  Rng rng(seed);
  Pattern p = pattern_from(rng);
  double bg[3];
  for (double& b : bg) b = 0.2 + 0.6 * rng.next_double();
  int64_t side = std::max<int64_t>(2, std::min(spec.height, spec.width) / 2);
  int64_t y0 = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(spec.height)));
  int64_t x0 = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(spec.width)));

  std::vector<double> data(static_cast<size_t>(spec.channels * spec.frames * spec.height * spec.width));
  for (int64_t c = 0; c < spec.channels; ++c)
    for (int64_t t = 0; t < spec.frames; ++t) {
      for (int64_t y = 0; y < spec.height; ++y)
        for (int64_t x = 0; x < spec.width; ++x) data[pix(spec, c, t, y, x)] = bg[c % 3];
      // textured square, rigid toroidal motion
      for (int64_t sy = 0; sy < side; ++sy)
        for (int64_t sx = 0; sx < side; ++sx) {
          int64_t y = ((y0 + t * vy + sy) % spec.height + spec.height) % spec.height;
          int64_t x = ((x0 + t * vx + sx) % spec.width + spec.width) % spec.width;
          data[pix(spec, c, t, y, x)] =
              pattern_value(p, c, static_cast<double>(sy), static_cast<double>(sx));
        }
    }
  return Tensor::from_data({spec.channels, spec.frames, spec.height, spec.width}, std::move(data));
}

Tensor synth_labeled_clip(uint64_t seed, int64_t cls, int64_t num_classes, const ClipSpec& spec) {
  if (num_classes < 2) throw ConfigError("synth_labeled_clip: num_classes must be >= 2");
  if (cls < 0 || cls >= num_classes) throw ConfigError("synth_labeled_clip: class out of range");
  double angle = 2.0 * std::numbers::pi * static_cast<double>(cls) / static_cast<double>(num_classes);
  int64_t vx = static_cast<int64_t>(std::llround(std::cos(angle)));
  int64_t vy = static_cast<int64_t>(std::llround(std::sin(angle)));
  if (vx == 0 && vy == 0) vx = 1;
  return synth_translate_clip(seed, vx, vy, spec);
}

Tensor sample_clip_at(const Tensor& clip, const SamplerConfig& sampler, int64_t start, double scale,
                      int64_t off_y, int64_t off_x, bool do_flip) {
  if (clip.rank() != 4) throw ShapeError("sample_clip: clip must be [C x F x H x W]");
  const int64_t C = clip.dim(0), F = clip.dim(1), H = clip.dim(2), W = clip.dim(3);
  if (sampler.frames < 1 || sampler.stride < 1 || sampler.crop < 1)
    throw ConfigError("sampler: frames, stride, crop must be positive");
  if (start < 0 || start + (sampler.frames - 1) * sampler.stride >= F)
    throw ContractError("sample_clip: window exceeds clip duration");
  if (scale <= 0.0 || scale > 1.0) throw ConfigError("sample_clip: scale must be in (0, 1]");

  int64_t base = std::min(H, W);
  int64_t side = std::max<int64_t>(1, static_cast<int64_t>(std::llround(scale * static_cast<double>(base))));
  if (off_y < 0 || off_x < 0 || off_y + side > H || off_x + side > W)
    throw IndexError("sample_clip: crop offset out of bounds");

  const int64_t T = sampler.frames, S = sampler.crop;
  std::vector<double> out(static_cast<size_t>(C * T * S * S));
  const double* src = clip.data().data();
  auto src_at = [&](int64_t c, int64_t f, int64_t y, int64_t x) {
    return src[((c * F + f) * H + y) * W + x];
  };
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t k = 0; k < T; ++k) {
      int64_t f = start + k * sampler.stride;
      for (int64_t y = 0; y < S; ++y) {
        for (int64_t x = 0; x < S; ++x) {
          int64_t ox = do_flip ? S - 1 - x : x;
          double v;
          if (side == S) {
            v = src_at(c, f, off_y + y, off_x + x);
          } else {
            // bilinear, half-pixel centers
            double sy = (static_cast<double>(y) + 0.5) * static_cast<double>(side) / S - 0.5;
            double sx = (static_cast<double>(x) + 0.5) * static_cast<double>(side) / S - 0.5;
            sy = std::clamp(sy, 0.0, static_cast<double>(side - 1));
            sx = std::clamp(sx, 0.0, static_cast<double>(side - 1));
            int64_t y_lo = static_cast<int64_t>(std::floor(sy));
            int64_t x_lo = static_cast<int64_t>(std::floor(sx));
            int64_t y_hi = std::min(y_lo + 1, side - 1);
            int64_t x_hi = std::min(x_lo + 1, side - 1);
            double wy = sy - static_cast<double>(y_lo);
            double wx = sx - static_cast<double>(x_lo);
            double v00 = src_at(c, f, off_y + y_lo, off_x + x_lo);
            double v01 = src_at(c, f, off_y + y_lo, off_x + x_hi);
            double v10 = src_at(c, f, off_y + y_hi, off_x + x_lo);
            double v11 = src_at(c, f, off_y + y_hi, off_x + x_hi);
            v = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
          }
          out[static_cast<size_t>(((c * T + k) * S + y) * S + ox)] = v;
        }
      }
    }
  }
  return Tensor::from_data({C, T, S, S}, std::move(out));
}

Tensor sample_clip(const Tensor& clip, const SamplerConfig& sampler, Rng& rng) {
  const int64_t F = clip.dim(1), H = clip.dim(2), W = clip.dim(3);
  int64_t span = (sampler.frames - 1) * sampler.stride + 1;
  if (span > F) throw ContractError("sample_clip: window exceeds clip duration");
  int64_t start = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(F - span + 1)));

  static constexpr double kScales[] = {1.0, 0.875, 0.75, 0.66};
  double scale = kScales[rng.next_below(4)];
  int64_t base = std::min(H, W);
  int64_t side = std::max<int64_t>(1, static_cast<int64_t>(std::llround(scale * static_cast<double>(base))));
  int64_t off_y = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(H - side + 1)));
  int64_t off_x = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(W - side + 1)));
  bool flip = sampler.flip && rng.next_below(2) == 1;
  return sample_clip_at(clip, sampler, start, scale, off_y, off_x, flip);
}

std::vector<int64_t> epoch_plan(int64_t n_records, int64_t repeats, Rng& rng) {
  if (n_records < 0 || repeats < 1) throw ConfigError("epoch_plan: bad arguments");
  std::vector<int64_t> plan;
  plan.reserve(static_cast<size_t>(n_records * repeats));
  for (int64_t r = 0; r < repeats; ++r)
    for (int64_t i = 0; i < n_records; ++i) plan.push_back(i);
  for (size_t i = plan.size(); i > 1; --i)
    std::swap(plan[i - 1], plan[rng.next_below(i)]);
  return plan;
}

uint64_t clip_seed(const std::string& video_id) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : video_id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

int64_t stride_for_source(const std::string& source, int64_t default_stride,
                          const std::map<std::string, int64_t>& overrides) {
  auto it = overrides.find(source);
  return it == overrides.end() ? default_stride : it->second;
}

DatasetManifest synthetic_manifest(int64_t n_clips, int64_t num_classes, int64_t duration_frames,
                                   const std::string& source) {
  DatasetManifest m;
  for (int64_t c = 0; c < num_classes; ++c) {
    std::string name = "class" + std::to_string(c);
    m.label_space.push_back(name);
    m.alias_map[name] = name;
  }
  for (int64_t i = 0; i < n_clips; ++i) {
    ClipRecord r;
    r.source = source;
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "-%06lld", static_cast<long long>(i));
    r.video_id = source + suffix;
    r.split = Split::Train;
    r.duration_frames = duration_frames;
    if (num_classes > 0) r.label = i % num_classes;
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

Tensor clip_for_record(const ClipRecord& record, const ClipSpec& spec, int64_t num_classes) {
  ClipSpec full = spec;
  full.frames = record.duration_frames;
  uint64_t seed = clip_seed(record.video_id);
  if (record.label && num_classes >= 2)
    return synth_labeled_clip(seed, *record.label, num_classes, full);
  switch (seed % 3) {
    case 0: return synth_clip(seed, ClipKind::Static, full);
    case 1: return synth_clip(seed, ClipKind::Translate, full);
    default: return synth_clip(seed, ClipKind::RotateLuminance, full);
  }
}

}  // namespace dualmae
