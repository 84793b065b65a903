#pragma once

#include <functional>
#include <vector>

#include "dualmae/tensor.hpp"

namespace dualmae {

// Differentiable free functions over Tensor. Elementwise ops require exact
// shape agreement; the only broadcasting is the trailing-dim affine pair
// (add_row_bias / broadcast_row). Row ops treat a rank-k tensor as
// (numel/last_dim) rows of length last_dim.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// x: [R x C], bias: [C]; y[r,c] = x[r,c] + bias[c].
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
// v: [C] -> [n x C], every row equal to v. Backward sums rows into v.
Tensor broadcast_row(const Tensor& v, int64_t n);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

// Row selection on rank-1/2 tensors. gather backward scatters gradients; a
// repeated index accumulates.
Tensor gather_rows(const Tensor& a, const std::vector<int64_t>& indices);
// Place rows of a at `indices` inside a fresh [n_rows x C] of zeros. Indices
// must be unique and in range.
Tensor scatter_rows(const Tensor& a, const std::vector<int64_t>& indices, int64_t n_rows);

Tensor slice_rows(const Tensor& a, int64_t start, int64_t count);
Tensor slice_cols(const Tensor& a, int64_t start, int64_t count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
// axis 0 or 1 on rank-2 tensors (axis 0 on rank-1).
Tensor concat(const std::vector<Tensor>& parts, int axis);

Tensor gelu(const Tensor& a);  // exact erf form

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor softmax(const Tensor& x);      // last axis, max-subtracted
Tensor log_softmax(const Tensor& x);  // last axis, logsumexp-stabilized

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor mean_rows(const Tensor& x);  // [R x C] -> [C]

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for a scalar-valued f at x. f is re-evaluated on perturbed copies of x;
// the analytic gradient comes from one backward pass.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h);

}  // namespace dualmae
