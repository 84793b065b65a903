#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dualmae/errors.hpp"
#include "dualmae/rng.hpp"

namespace dualmae {

// Spatiotemporal token grid. Tokens are indexed temporal-major, then
// row-major over the spatial plane: index = t * s_tokens + row * s_cols + col.
struct TokenGrid {
  int64_t t_tokens = 0;
  int64_t s_rows = 0;
  int64_t s_cols = 0;

  int64_t s_tokens() const { return s_rows * s_cols; }
  int64_t n_total() const { return t_tokens * s_tokens(); }
  void validate() const;

  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;
};

enum class MaskRole { EncoderVisible, DecoderKept };

// Index set over a token grid. `kept` is strictly increasing and in range.
struct MaskMap {
  TokenGrid grid;
  MaskRole role = MaskRole::EncoderVisible;
  std::vector<int64_t> kept;

  int64_t count() const { return static_cast<int64_t>(kept.size()); }
  void validate() const;
};

struct DualMaskConfig {
  double rho = 0.9;    // encoder masking ratio (fraction dropped)
  double rho_d = 0.5;  // decoder masking ratio (fraction not reconstructed)
  int64_t cell = 2;    // running-cell edge length

  void validate(const TokenGrid& grid) const;
};

// floor(ratio * count) robust to the binary representation of decimal ratios
// (0.3 * 10 floors to 3, not 2).
int64_t ratio_floor(double ratio, int64_t count);

// Per-slice kept counts under the artifact's rounding rules: the encoder
// masks floor(rho * s) spatial positions, the decoder keeps
// floor((1 - rho_d) * s) positions.
int64_t tube_kept_per_slice(int64_t s_tokens, double rho);
int64_t decoder_kept_per_slice(int64_t s_tokens, double rho_d);

// One spatial subset drawn uniformly without replacement, replicated across
// every temporal slice.
MaskMap tube_mask(const TokenGrid& grid, double rho, Rng& rng);

// Deterministic decoder mask: each cell x cell spatial cell keeps
// k_c = round((1 - rho_d) * cell^2) positions whose in-cell offset (row-major)
// advances with the temporal slice, so cell^2 consecutive slices cover every
// position exactly k_c times.
MaskMap running_cell_mask(const TokenGrid& grid, double rho_d, int64_t cell);

// Keeps whole temporal slices, evens first ([0,2,4,...,1,3,5,...]), truncated
// to ceil((1 - rho_d) * t_tokens).
MaskMap frame_mask(const TokenGrid& grid, double rho_d);

// floor((1 - rho_d) * n_total) indices uniformly without replacement.
MaskMap random_mask(const TokenGrid& grid, double rho_d, Rng& rng);

// Supervised positions: decoder-kept indices invisible to the encoder
// (dec.kept minus enc.kept), sorted.
std::vector<int64_t> loss_index_set(const MaskMap& enc, const MaskMap& dec);

// Text rendering: one block per temporal slice, '#' kept, '.' dropped.
std::string render_mask(const MaskMap& mask);
std::string render_index_set(const TokenGrid& grid, const std::vector<int64_t>& kept);

}  // namespace dualmae
