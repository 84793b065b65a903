#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dualmae/errors.hpp"
#include "dualmae/rng.hpp"
#include "dualmae/tensor.hpp"

namespace dualmae {

enum class Split { Train, Val };

// Record after hybrid-manifest construction; label indexes the manifest's
// unified label_space.
struct ClipRecord {
  std::string source;
  std::string video_id;
  std::optional<int64_t> label;
  Split split = Split::Train;
  int64_t duration_frames = 0;
};

// Record as delivered by one source, with the source's own label name.
struct SourceClip {
  std::string video_id;
  std::optional<std::string> label;
  Split split = Split::Train;
  int64_t duration_frames = 0;
};

struct DatasetManifest {
  std::vector<ClipRecord> records;
  std::vector<std::string> label_space;
  std::map<std::string, std::string> alias_map;  // source label -> unified label

  void validate() const;
  std::vector<size_t> train_indices() const;
};

// Union of sources with first-occurrence-wins dedup by video_id, removal of
// train records colliding with val_ids, and label rewriting through
// alias_map into a unified label space (first-appearance order). A label
// missing from alias_map is a construction error listing every offender.
DatasetManifest build_hybrid_manifest(
    const std::vector<std::pair<std::string, std::vector<SourceClip>>>& sources,
    const std::map<std::string, std::string>& alias_map, const std::set<std::string>& val_ids);

// One record per line: source \t video_id \t label-or-'-' \t split \t duration.
void write_manifest_tsv(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest_tsv(const std::string& path);

enum class ClipKind { Static, Translate, RotateLuminance };
ClipKind clip_kind_from_string(const std::string& name);

struct ClipSpec {
  int64_t channels = 3;
  int64_t frames = 16;
  int64_t height = 16;
  int64_t width = 16;
};

// Deterministic procedural clips, pixel values in [0, 1].
Tensor synth_clip(uint64_t seed, ClipKind kind, const ClipSpec& spec);
// Textured square on a flat background moving (vx, vy) pixels per frame,
// toroidal. With a flat background, frame t is frame 0 shifted t*(vx, vy).
Tensor synth_translate_clip(uint64_t seed, int64_t vx, int64_t vy, const ClipSpec& spec);
// Class-conditioned motion direction: class c of k moves along angle 2*pi*c/k
// (k=2: right vs left).
Tensor synth_labeled_clip(uint64_t seed, int64_t cls, int64_t num_classes, const ClipSpec& spec);

struct SamplerConfig {
  int64_t frames = 4;  // T
  int64_t stride = 4;  // tau
  int64_t crop = 16;
  bool flip = false;
};

// Deterministic extraction: start frame, crop scale, crop offset, flip.
Tensor sample_clip_at(const Tensor& clip, const SamplerConfig& sampler, int64_t start,
                      double scale, int64_t off_y, int64_t off_x, bool do_flip);
// Random draw of the same parameters (multi-scale crop over
// {1.0, 0.875, 0.75, 0.66}).
Tensor sample_clip(const Tensor& clip, const SamplerConfig& sampler, Rng& rng);

// Every index in [0, n_records) exactly `repeats` times, shuffled.
std::vector<int64_t> epoch_plan(int64_t n_records, int64_t repeats, Rng& rng);

// Stable per-record seed (FNV-1a of the video id).
uint64_t clip_seed(const std::string& video_id);

// Per-source sampling stride; exact source-name match, else the default.
int64_t stride_for_source(const std::string& source, int64_t default_stride,
                          const std::map<std::string, int64_t>& overrides);

// Synthetic stand-in dataset: labeled round-robin when num_classes > 0,
// unlabeled mixed kinds otherwise.
DatasetManifest synthetic_manifest(int64_t n_clips, int64_t num_classes, int64_t duration_frames,
                                   const std::string& source = "synthetic");

// Procedural clip for a manifest record: labeled records move along their
// class direction, unlabeled ones cycle through the clip kinds by id hash.
Tensor clip_for_record(const ClipRecord& record, const ClipSpec& spec, int64_t num_classes);

}  // namespace dualmae
