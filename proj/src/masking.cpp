#include "dualmae/masking.hpp"

#include <algorithm>
#include <cmath>

namespace dualmae {

void TokenGrid::validate() const {
  if (t_tokens <= 0 || s_rows <= 0 || s_cols <= 0)
    throw ConfigError("token grid dimensions must be positive");
}

void MaskMap::validate() const {
  grid.validate();
  int64_t n = grid.n_total();
  int64_t prev = -1;
  for (int64_t i : kept) {
    if (i <= prev) throw ContractError("mask indices must be strictly increasing");
    if (i < 0 || i >= n) throw IndexError("mask index out of range");
    prev = i;
  }
}

void DualMaskConfig::validate(const TokenGrid& grid) const {
  grid.validate();
  if (rho < 0.0 || rho >= 1.0) throw ConfigError("rho must be in [0, 1)");
  if (rho_d < 0.0 || rho_d >= 1.0) throw ConfigError("rho_d must be in [0, 1)");
  if (cell < 1) throw ConfigError("cell must be >= 1");
  if (grid.s_rows % cell != 0 || grid.s_cols % cell != 0)
    throw ConfigError("cell must divide both spatial grid edge lengths");
}

int64_t ratio_floor(double ratio, int64_t count) {
  return static_cast<int64_t>(std::floor(ratio * static_cast<double>(count) + 1e-9));
}

int64_t tube_kept_per_slice(int64_t s_tokens, double rho) {
  return s_tokens - ratio_floor(rho, s_tokens);
}

int64_t decoder_kept_per_slice(int64_t s_tokens, double rho_d) {
  return ratio_floor(1.0 - rho_d, s_tokens);
}

MaskMap tube_mask(const TokenGrid& grid, double rho, Rng& rng) {
  grid.validate();
  if (rho < 0.0 || rho >= 1.0) throw ConfigError("tube_mask: rho must be in [0, 1)");
  const int64_t s = grid.s_tokens();
  const int64_t k_s = tube_kept_per_slice(s, rho);
  std::vector<int64_t> spatial = rng.sample_without_replacement(s, k_s);
  std::sort(spatial.begin(), spatial.end());

  MaskMap m{grid, MaskRole::EncoderVisible, {}};
  m.kept.reserve(static_cast<size_t>(grid.t_tokens * k_s));
  for (int64_t t = 0; t < grid.t_tokens; ++t)
    for (int64_t pos : spatial) m.kept.push_back(t * s + pos);
  return m;
}

MaskMap running_cell_mask(const TokenGrid& grid, double rho_d, int64_t cell) {
  grid.validate();
  if (rho_d < 0.0 || rho_d >= 1.0) throw ConfigError("running_cell_mask: rho_d must be in [0, 1)");
  if (cell < 1) throw ConfigError("running_cell_mask: cell must be >= 1");
  if (grid.s_rows % cell != 0 || grid.s_cols % cell != 0)
    throw ConfigError("running_cell_mask: cell does not tile the spatial grid");

  const int64_t cell_sq = cell * cell;
  const int64_t k_c =
      static_cast<int64_t>(std::llround((1.0 - rho_d) * static_cast<double>(cell_sq)));
  const int64_t s = grid.s_tokens();

  MaskMap m{grid, MaskRole::DecoderKept, {}};
  m.kept.reserve(static_cast<size_t>(grid.t_tokens * k_c * (s / cell_sq)));
  for (int64_t t = 0; t < grid.t_tokens; ++t) {
    for (int64_t cr = 0; cr < grid.s_rows; cr += cell) {
      for (int64_t cc = 0; cc < grid.s_cols; cc += cell) {
        for (int64_t j = 0; j < k_c; ++j) {
          // In-cell offsets visit row-major order, advanced by the slice index.
          int64_t o = (t + j) % cell_sq;
          int64_t row = cr + o / cell;
          int64_t col = cc + o % cell;
          m.kept.push_back(t * s + row * grid.s_cols + col);
        }
      }
    }
  }
  std::sort(m.kept.begin(), m.kept.end());
  return m;
}

MaskMap frame_mask(const TokenGrid& grid, double rho_d) {
  grid.validate();
  if (rho_d < 0.0 || rho_d >= 1.0) throw ConfigError("frame_mask: rho_d must be in [0, 1)");
  const int64_t t_total = grid.t_tokens;
  const int64_t n_keep = static_cast<int64_t>(
      std::ceil((1.0 - rho_d) * static_cast<double>(t_total) - 1e-9));

  std::vector<int64_t> slice_order;
  slice_order.reserve(static_cast<size_t>(t_total));
  for (int64_t t = 0; t < t_total; t += 2) slice_order.push_back(t);
  for (int64_t t = 1; t < t_total; t += 2) slice_order.push_back(t);
  slice_order.resize(static_cast<size_t>(std::max<int64_t>(n_keep, 0)));
  std::sort(slice_order.begin(), slice_order.end());

  const int64_t s = grid.s_tokens();
  MaskMap m{grid, MaskRole::DecoderKept, {}};
  m.kept.reserve(static_cast<size_t>(n_keep * s));
  for (int64_t t : slice_order)
    for (int64_t pos = 0; pos < s; ++pos) m.kept.push_back(t * s + pos);
  return m;
}

MaskMap random_mask(const TokenGrid& grid, double rho_d, Rng& rng) {
  grid.validate();
  if (rho_d < 0.0 || rho_d >= 1.0) throw ConfigError("random_mask: rho_d must be in [0, 1)");
  const int64_t n = grid.n_total();
  const int64_t k = ratio_floor(1.0 - rho_d, n);
  MaskMap m{grid, MaskRole::DecoderKept, rng.sample_without_replacement(n, k)};
  std::sort(m.kept.begin(), m.kept.end());
  return m;
}

std::vector<int64_t> loss_index_set(const MaskMap& enc, const MaskMap& dec) {
  if (enc.grid != dec.grid) throw ContractError("loss_index_set: masks are on different grids");
  std::vector<int64_t> out;
  out.reserve(dec.kept.size());
  std::set_difference(dec.kept.begin(), dec.kept.end(), enc.kept.begin(), enc.kept.end(),
                      std::back_inserter(out));
  return out;
}

std::string render_index_set(const TokenGrid& grid, const std::vector<int64_t>& kept) {
  grid.validate();
  std::vector<bool> on(static_cast<size_t>(grid.n_total()), false);
  for (int64_t i : kept) {
    if (i < 0 || i >= grid.n_total()) throw IndexError("render: index out of range");
    on[static_cast<size_t>(i)] = true;
  }
  std::string out;
  const int64_t s = grid.s_tokens();
  out.reserve(static_cast<size_t>(grid.n_total() + grid.t_tokens * (grid.s_rows + 1)));
  for (int64_t t = 0; t < grid.t_tokens; ++t) {
    if (t > 0) out.push_back('\n');
    for (int64_t r = 0; r < grid.s_rows; ++r) {
      for (int64_t c = 0; c < grid.s_cols; ++c)
        out.push_back(on[static_cast<size_t>(t * s + r * grid.s_cols + c)] ? '#' : '.');
      out.push_back('\n');
    }
  }
  return out;
}

std::string render_mask(const MaskMap& mask) { return render_index_set(mask.grid, mask.kept); }

}  // namespace dualmae
