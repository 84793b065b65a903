#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "dualmae/masking.hpp"

using namespace dualmae;

namespace {

// Spatial footprint at temporal slice t.
std::set<int64_t> slice_spatial(const MaskMap& m, int64_t t) {
  std::set<int64_t> out;
  const int64_t s = m.grid.s_tokens();
  for (int64_t i : m.kept)
    if (i / s == t) out.insert(i % s);
  return out;
}

bool tube_property(const MaskMap& m) {
  auto first = slice_spatial(m, 0);
  for (int64_t t = 1; t < m.grid.t_tokens; ++t)
    if (slice_spatial(m, t) != first) return false;
  return true;
}

}  // namespace

TEST_CASE("ratio_floor is robust to decimal ratios") {
  CHECK(ratio_floor(0.9, 196) == 176);
  CHECK(ratio_floor(0.9, 256) == 230);
  CHECK(ratio_floor(0.3, 10) == 3);
  CHECK(ratio_floor(0.1, 256) == 25);
  CHECK(ratio_floor(0.0, 100) == 0);
}

TEST_CASE("tube mask: small grid, counts, tube property") {
  TokenGrid grid{2, 2, 2};  // t=2, s=4
  std::set<std::set<int64_t>> seen;
  for (uint64_t seed = 0; seed < 300; ++seed) {
    Rng rng(seed);
    MaskMap m = tube_mask(grid, 0.5, rng);
    m.validate();
    CHECK(m.count() == 4);  // 2 spatial positions x 2 slices
    CHECK(tube_property(m));
    seen.insert(slice_spatial(m, 0));
  }
  CHECK(seen.size() == 6);  // every C(4,2) spatial draw occurs

  Rng rng(1);
  MaskMap all = tube_mask(grid, 0.0, rng);
  CHECK(all.count() == grid.n_total());

  CHECK_THROWS_AS(tube_mask(grid, 1.0, rng), ConfigError);
  CHECK_THROWS_AS(tube_mask(grid, -0.1, rng), ConfigError);
}

TEST_CASE("tube mask: ViT-B sized grid arithmetic") {
  TokenGrid grid{8, 14, 14};  // t=8, s=196
  Rng rng(3);
  MaskMap m = tube_mask(grid, 0.9, rng);
  CHECK(tube_kept_per_slice(196, 0.9) == 20);
  CHECK(m.count() == 160);
  CHECK(tube_property(m));
}

TEST_CASE("tube mask kept-count formula over a rho sweep") {
  TokenGrid grid{4, 6, 5};
  for (int pct = 0; pct < 100; pct += 3) {
    double rho = pct / 100.0;
    Rng rng(static_cast<uint64_t>(pct));
    MaskMap m = tube_mask(grid, rho, rng);
    CHECK(m.count() == grid.t_tokens * (grid.s_tokens() - ratio_floor(rho, grid.s_tokens())));
  }
}

TEST_CASE("running cell: 2x2 cell full coverage") {
  TokenGrid grid{4, 2, 2};
  MaskMap m = running_cell_mask(grid, 0.75, 2);
  m.validate();
  // one position per cell per slice
  for (int64_t t = 0; t < 4; ++t) CHECK(slice_spatial(m, t).size() == 1);
  // over 4 consecutive slices every spatial position kept exactly once
  std::map<int64_t, int> hits;
  for (int64_t i : m.kept) hits[i % grid.s_tokens()]++;
  CHECK(hits.size() == 4);
  for (auto& [pos, n] : hits) CHECK(n == 1);
}

TEST_CASE("running cell: rho_d=0 keeps everything") {
  TokenGrid grid{3, 4, 4};
  MaskMap m = running_cell_mask(grid, 0.0, 2);
  CHECK(m.count() == grid.n_total());
}

TEST_CASE("running cell: ViT-g arch-table counts") {
  TokenGrid grid{8, 16, 16};  // t=8, s=256
  MaskMap m = running_cell_mask(grid, 0.5, 2);
  for (int64_t t = 0; t < 8; ++t) CHECK(slice_spatial(m, t).size() == 128);
  CHECK(m.count() == 1024);
  CHECK(m.count() == 8 * decoder_kept_per_slice(256, 0.5));
}

TEST_CASE("running cell: deterministic and cyclic-coverage property") {
  for (int64_t cell : {2, 3}) {
    TokenGrid grid{2 * cell * cell + 3, 2 * cell, 3 * cell};
    for (double rho_d : {0.0, 0.25, 0.5, 2.0 / 3.0}) {
      MaskMap a = running_cell_mask(grid, rho_d, cell);
      MaskMap b = running_cell_mask(grid, rho_d, cell);
      CHECK(a.kept == b.kept);

      int64_t cell_sq = cell * cell;
      int64_t k_c = static_cast<int64_t>(std::llround((1.0 - rho_d) * cell_sq));
      // any window of cell^2 consecutive slices keeps each position exactly k_c times
      for (int64_t w0 = 0; w0 + cell_sq <= grid.t_tokens; ++w0) {
        std::map<int64_t, int64_t> hits;
        for (int64_t i : a.kept) {
          int64_t t = i / grid.s_tokens();
          if (t >= w0 && t < w0 + cell_sq) hits[i % grid.s_tokens()]++;
        }
        if (k_c > 0) {
          CHECK(hits.size() == static_cast<size_t>(grid.s_tokens()));
          for (auto& [pos, n] : hits) CHECK(n == k_c);
        } else {
          CHECK(hits.empty());
        }
      }
    }
  }
}

TEST_CASE("running cell: cell must tile the grid") {
  TokenGrid grid{2, 3, 4};
  CHECK_THROWS_AS(running_cell_mask(grid, 0.5, 2), ConfigError);
}

TEST_CASE("frame mask") {
  TokenGrid grid{8, 2, 2};  // t=8, s=4
  MaskMap m = frame_mask(grid, 0.5);
  CHECK(m.count() == 16);
  std::set<int64_t> slices;
  for (int64_t i : m.kept) slices.insert(i / grid.s_tokens());
  CHECK(slices == std::set<int64_t>{0, 2, 4, 6});

  CHECK(frame_mask(grid, 0.0).count() == grid.n_total());

  TokenGrid tiny{2, 2, 2};
  MaskMap m2 = frame_mask(tiny, 0.5);
  std::set<int64_t> s2;
  for (int64_t i : m2.kept) s2.insert(i / tiny.s_tokens());
  CHECK(s2 == std::set<int64_t>{0});
}

TEST_CASE("random mask: counts and frequency") {
  TokenGrid grid{2, 2, 2};
  Rng rng(5);
  CHECK(random_mask(grid, 0.0, rng).count() == 8);

  std::vector<int64_t> freq(8, 0);
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    Rng r(static_cast<uint64_t>(d));
    MaskMap m = random_mask(grid, 0.5, r);
    CHECK(m.count() == 4);
    for (int64_t i : m.kept) freq[static_cast<size_t>(i)]++;
  }
  for (int64_t f : freq) {
    double p = static_cast<double>(f) / draws;
    CHECK(p > 0.48);
    CHECK(p < 0.52);
  }

  TokenGrid vitb{8, 14, 14};
  Rng r2(9);
  CHECK(random_mask(vitb, 0.5, r2).count() == 784);
}

TEST_CASE("loss index set") {
  TokenGrid grid{2, 2, 2};
  MaskMap empty_enc{grid, MaskRole::EncoderVisible, {}};
  MaskMap all_dec{grid, MaskRole::DecoderKept, {0, 1, 2, 3, 4, 5, 6, 7}};
  CHECK(loss_index_set(empty_enc, all_dec) == all_dec.kept);

  MaskMap same_enc{grid, MaskRole::EncoderVisible, {1, 3}};
  MaskMap same_dec{grid, MaskRole::DecoderKept, {1, 3}};
  CHECK(loss_index_set(same_enc, same_dec).empty());

  // enc keeps spatial {0} as a tube; dec keeps slice 0
  MaskMap enc{grid, MaskRole::EncoderVisible, {0, 4}};
  MaskMap dec = frame_mask(grid, 0.5);
  CHECK(loss_index_set(enc, dec) == std::vector<int64_t>{1, 2, 3});

  TokenGrid other{2, 2, 3};
  MaskMap bad{other, MaskRole::DecoderKept, {0}};
  CHECK_THROWS_AS(loss_index_set(enc, bad), ContractError);
}

TEST_CASE("loss set disjoint from encoder and subset of decoder (random sweep)") {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    TokenGrid grid{static_cast<int64_t>(1 + rng.next_below(6)),
                   2 * static_cast<int64_t>(1 + rng.next_below(4)),
                   2 * static_cast<int64_t>(1 + rng.next_below(4))};
    double rho = 0.25 * static_cast<double>(rng.next_below(4));
    double rho_d = 0.25 * static_cast<double>(rng.next_below(4));
    MaskMap enc = tube_mask(grid, rho, rng);
    MaskMap dec = running_cell_mask(grid, rho_d, 2);
    auto loss = loss_index_set(enc, dec);
    std::set<int64_t> enc_set(enc.kept.begin(), enc.kept.end());
    std::set<int64_t> dec_set(dec.kept.begin(), dec.kept.end());
    for (int64_t i : loss) {
      CHECK(enc_set.count(i) == 0);
      CHECK(dec_set.count(i) == 1);
    }
    CHECK(std::is_sorted(loss.begin(), loss.end()));
  }
}

TEST_CASE("rho_d=0 loss set equals the full encoder-invisible set") {
  TokenGrid grid{4, 4, 4};
  Rng rng(21);
  MaskMap enc = tube_mask(grid, 0.75, rng);
  MaskMap dec = running_cell_mask(grid, 0.0, 2);
  auto loss = loss_index_set(enc, dec);
  std::set<int64_t> enc_set(enc.kept.begin(), enc.kept.end());
  std::vector<int64_t> invisible;
  for (int64_t i = 0; i < grid.n_total(); ++i)
    if (!enc_set.count(i)) invisible.push_back(i);
  CHECK(loss == invisible);
}

TEST_CASE("mask rendering") {
  TokenGrid grid{2, 2, 2};
  MaskMap m{grid, MaskRole::EncoderVisible, {0, 3, 5}};
  CHECK(render_mask(m) == "#.\n.#\n\n.#\n..\n");
}
