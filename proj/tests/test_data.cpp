#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "dualmae/data.hpp"
#include "helpers.hpp"

using namespace dualmae;
using dualmae::testing::bit_equal;

namespace {

SourceClip train_clip(const std::string& id, std::optional<std::string> label = std::nullopt,
                      int64_t duration = 64) {
  return SourceClip{id, std::move(label), Split::Train, duration};
}

std::filesystem::path temp_file(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "dualmae_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("synthetic clips: determinism, range, static kind") {
  ClipSpec spec{3, 6, 12, 12};
  Tensor a = synth_clip(7, ClipKind::Static, spec);
  Tensor b = synth_clip(7, ClipKind::Static, spec);
  CHECK(bit_equal(a, b));
  for (double v : a.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // all frames identical
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t t = 1; t < 6; ++t)
      for (int64_t i = 0; i < 12 * 12; ++i)
        CHECK(a.data()[static_cast<size_t>((c * 6 + t) * 144 + i)] ==
              a.data()[static_cast<size_t>((c * 6 + 0) * 144 + i)]);

  Tensor r = synth_clip(9, ClipKind::RotateLuminance, spec);
  for (double v : r.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  Tensor tr = synth_clip(11, ClipKind::Translate, spec);
  CHECK(bit_equal(tr, synth_clip(11, ClipKind::Translate, spec)));
}

TEST_CASE("translate clip: frame t is frame 0 shifted toroidally") {
  ClipSpec spec{3, 5, 10, 14};
  Tensor clip = synth_translate_clip(13, 1, 0, spec);
  const double* d = clip.data().data();
  auto at = [&](int64_t c, int64_t t, int64_t y, int64_t x) {
    return d[((c * 5 + t) * 10 + y) * 14 + x];
  };
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t t = 1; t < 5; ++t)
      for (int64_t y = 0; y < 10; ++y)
        for (int64_t x = 0; x < 14; ++x)
          CHECK(at(c, t, y, x) == at(c, 0, y, ((x - t) % 14 + 14) % 14));

  // vertical motion shifts rows
  Tensor vert = synth_translate_clip(13, 0, 1, spec);
  const double* v = vert.data().data();
  auto vat = [&](int64_t c, int64_t t, int64_t y, int64_t x) {
    return v[((c * 5 + t) * 10 + y) * 14 + x];
  };
  for (int64_t y = 0; y < 10; ++y)
    for (int64_t x = 0; x < 14; ++x) CHECK(vat(0, 2, y, x) == vat(0, 0, ((y - 2) % 10 + 10) % 10, x));
}

TEST_CASE("labeled clips move along class directions") {
  ClipSpec spec{3, 4, 12, 12};
  Tensor right = synth_labeled_clip(17, 0, 2, spec);
  Tensor left = synth_labeled_clip(17, 1, 2, spec);
  // class 0 moves +x: frame 1 equals frame 0 shifted right by one
  const double* r = right.data().data();
  auto rat = [&](int64_t t, int64_t y, int64_t x) { return r[(t * 12 + y) * 12 + x]; };
  for (int64_t y = 0; y < 12; ++y)
    for (int64_t x = 0; x < 12; ++x) CHECK(rat(1, y, x) == rat(0, y, (x + 11) % 12));
  const double* l = left.data().data();
  auto lat = [&](int64_t t, int64_t y, int64_t x) { return l[(t * 12 + y) * 12 + x]; };
  for (int64_t y = 0; y < 12; ++y)
    for (int64_t x = 0; x < 12; ++x) CHECK(lat(1, y, x) == lat(0, y, (x + 1) % 12));
}

TEST_CASE("sample_clip_at: identity, stride arithmetic, flip, overflow") {
  ClipSpec spec{3, 8, 10, 10};
  Tensor clip = synth_clip(19, ClipKind::Translate, spec);

  SamplerConfig identity{8, 1, 10, false};
  Tensor same = sample_clip_at(clip, identity, 0, 1.0, 0, 0, false);
  CHECK(bit_equal(same, clip));

  SamplerConfig strided{4, 2, 10, false};
  Tensor picked = sample_clip_at(clip, strided, 0, 1.0, 0, 0, false);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t k = 0; k < 4; ++k)
      for (int64_t i = 0; i < 100; ++i)
        CHECK(picked.data()[static_cast<size_t>((c * 4 + k) * 100 + i)] ==
              clip.data()[static_cast<size_t>((c * 8 + 2 * k) * 100 + i)]);

  Tensor flipped = sample_clip_at(clip, identity, 0, 1.0, 0, 0, true);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t t = 0; t < 8; ++t)
      for (int64_t y = 0; y < 10; ++y)
        for (int64_t x = 0; x < 10; ++x)
          CHECK(flipped.data()[static_cast<size_t>(((c * 8 + t) * 10 + y) * 10 + x)] ==
                clip.data()[static_cast<size_t>(((c * 8 + t) * 10 + y) * 10 + (9 - x))]);

  SamplerConfig too_long{8, 2, 10, false};
  CHECK_THROWS_AS(sample_clip_at(clip, too_long, 0, 1.0, 0, 0, false), ContractError);
  CHECK_THROWS_AS(sample_clip_at(clip, identity, 0, 1.0, 5, 0, false), IndexError);
}

TEST_CASE("sample_clip: seeded reproducibility and shape") {
  ClipSpec spec{3, 32, 20, 20};
  Tensor clip = synth_clip(23, ClipKind::Translate, spec);
  SamplerConfig sampler{4, 4, 16, true};
  Rng r1(42), r2(42);
  Tensor s1 = sample_clip(clip, sampler, r1);
  Tensor s2 = sample_clip(clip, sampler, r2);
  CHECK(bit_equal(s1, s2));
  CHECK(s1.shape() == Shape{3, 4, 16, 16});
}

TEST_CASE("epoch plan: every record exactly `repeats` times") {
  Rng rng(29);
  auto plan = epoch_plan(10, 4, rng);
  CHECK(plan.size() == 40);
  std::vector<int> counts(10, 0);
  for (int64_t i : plan) counts[static_cast<size_t>(i)]++;
  for (int c : counts) CHECK(c == 4);

  Rng a(7), b(7);
  CHECK(epoch_plan(12, 2, a) == epoch_plan(12, 2, b));
}

TEST_CASE("hybrid manifest: dedup by id keeps the first occurrence") {
  auto m = build_hybrid_manifest(
      {{"alpha", {train_clip("v1"), train_clip("v2")}}, {"beta", {train_clip("v1"), train_clip("v3")}}},
      {}, {});
  CHECK(m.records.size() == 3);
  CHECK(m.records[0].source == "alpha");
  CHECK(m.records[1].video_id == "v2");
  CHECK(m.records[2].source == "beta");
}

TEST_CASE("hybrid manifest: fixture with duplicate and val collision") {
  // A has 3 train; B has 2 train, one duplicating A; one val id collides
  // with an A train record -> 3 train records survive
  auto m = build_hybrid_manifest(
      {{"A", {train_clip("a1"), train_clip("a2"), train_clip("a3")}},
       {"B", {train_clip("a2"), train_clip("b1")}}},
      {}, {"a3"});
  CHECK(m.records.size() == 3);
  CHECK(m.train_indices().size() == 3);
  std::set<std::string> ids;
  for (auto& r : m.records) ids.insert(r.video_id);
  CHECK(ids == std::set<std::string>{"a1", "a2", "b1"});
}

TEST_CASE("hybrid manifest: label union through aliases") {
  std::map<std::string, std::string> alias{{"jog", "running"}, {"run", "running"}, {"sit", "sitting"}};
  auto m = build_hybrid_manifest(
      {{"A", {train_clip("v1", "jog"), train_clip("v2", "sit")}},
       {"B", {train_clip("v3", "run")}}},
      alias, {});
  CHECK(m.label_space == std::vector<std::string>{"running", "sitting"});
  CHECK(*m.records[0].label == 0);
  CHECK(*m.records[1].label == 1);
  CHECK(*m.records[2].label == 0);
}

TEST_CASE("hybrid manifest: missing aliases are reported with offenders") {
  try {
    build_hybrid_manifest({{"A", {train_clip("v1", "jog")}}, {"B", {train_clip("v2", "hop")}}},
                          {{"jog", "running"}}, {});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("B/hop") != std::string::npos);
  }
}

TEST_CASE("manifest TSV round trip preserves records and label space") {
  std::map<std::string, std::string> alias{{"jog", "running"}, {"sit", "sitting"}};
  auto m = build_hybrid_manifest(
      {{"k710-syn", {train_clip("v1", "jog"), train_clip("v2", "sit"),
                     SourceClip{"v4", "jog", Split::Val, 48}}},
       {"ssv2-syn", {train_clip("v3")}}},
      alias, {});
  auto path = temp_file("roundtrip.tsv");
  write_manifest_tsv(m, path.string());
  auto loaded = load_manifest_tsv(path.string());
  CHECK(loaded.records.size() == m.records.size());
  CHECK(loaded.label_space == m.label_space);
  for (size_t i = 0; i < m.records.size(); ++i) {
    CHECK(loaded.records[i].source == m.records[i].source);
    CHECK(loaded.records[i].video_id == m.records[i].video_id);
    CHECK(loaded.records[i].label == m.records[i].label);
    CHECK(loaded.records[i].split == m.records[i].split);
    CHECK(loaded.records[i].duration_frames == m.records[i].duration_frames);
  }
}

TEST_CASE("manifest invariants re-checked on load") {
  auto path = temp_file("corrupt.tsv");
  {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    REQUIRE(f != nullptr);
    std::fputs("src\tv1\t-\ttrain\t64\n", f);
    std::fputs("src\tv1\t-\tval\t64\n", f);  // duplicate id across splits
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_manifest_tsv(path.string()), ConfigError);

  auto bad = temp_file("badline.tsv");
  {
    std::FILE* f = std::fopen(bad.string().c_str(), "w");
    REQUIRE(f != nullptr);
    std::fputs("only\tthree\tfields\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_manifest_tsv(bad.string()), IoError);
}

TEST_CASE("per-source stride override") {
  std::map<std::string, int64_t> overrides{{"ssv2-syn", 2}};
  CHECK(stride_for_source("ssv2-syn", 4, overrides) == 2);
  CHECK(stride_for_source("k710-syn", 4, overrides) == 4);
}

TEST_CASE("synthetic manifest and record clips") {
  auto m = synthetic_manifest(10, 2, 48);
  CHECK(m.records.size() == 10);
  CHECK(m.label_space.size() == 2);
  for (size_t i = 0; i < m.records.size(); ++i)
    CHECK(*m.records[i].label == static_cast<int64_t>(i % 2));

  ClipSpec spec{3, 16, 12, 12};
  Tensor c0 = clip_for_record(m.records[0], spec, 2);
  CHECK(c0.shape() == Shape{3, 48, 12, 12});
  CHECK(bit_equal(c0, clip_for_record(m.records[0], spec, 2)));

  auto unlabeled = synthetic_manifest(4, 0, 32);
  CHECK_FALSE(unlabeled.records[0].label.has_value());
  Tensor u = clip_for_record(unlabeled.records[0], spec, 0);
  CHECK(u.dim(1) == 32);
}
