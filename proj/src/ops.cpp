#include "dualmae/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

namespace dualmae {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatRef = Eigen::Map<RowMat>;
using CMatRef = Eigen::Map<const RowMat>;
using VecRef = Eigen::Map<Eigen::ArrayXd>;
using CVecRef = Eigen::Map<const Eigen::ArrayXd>;

using NodePtr = std::shared_ptr<Tensor::Node>;

CMatRef as_mat(const std::vector<double>& v, int64_t r, int64_t c) {
  return CMatRef(v.data(), r, c);
}
MatRef as_mat(std::vector<double>& v, int64_t r, int64_t c) { return MatRef(v.data(), r, c); }
CVecRef as_vec(const std::vector<double>& v) {
  return CVecRef(v.data(), static_cast<Eigen::Index>(v.size()));
}
VecRef as_vec(std::vector<double>& v) {
  return VecRef(v.data(), static_cast<Eigen::Index>(v.size()));
}

bool any_requires_grad(const std::vector<Tensor>& parents) {
  for (const Tensor& p : parents)
    if (p.requires_grad()) return true;
  return false;
}

// Wire a result node into the graph. backward_fn is only stored when some
// parent needs a gradient, so inference graphs stay flat.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   std::function<void(Tensor::Node&)> backward_fn) {
  Tensor r = Tensor::from_data(std::move(shape), std::move(data));
  if (any_requires_grad(parents)) {
    auto& node = *r.node();
    node.requires_grad = true;
    node.parents.reserve(parents.size());
    for (const Tensor& p : parents) node.parents.push_back(p.node());
    node.backward_fn = std::move(backward_fn);
  }
  return r;
}

void accumulate(const NodePtr& p, const std::vector<double>& delta) {
  if (!p->requires_grad) return;
  p->ensure_grad();
  as_vec(p->grad) += as_vec(delta);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw ShapeError(std::string(op) + ": shape mismatch");
}

// Rows/width view of an arbitrary-rank tensor over its last dimension.
std::pair<int64_t, int64_t> row_view(const Tensor& t, const char* op) {
  if (t.rank() == 0) throw ShapeError(std::string(op) + ": scalar input");
  int64_t width = t.shape().back();
  if (width == 0) throw ShapeError(std::string(op) + ": empty last dimension");
  return {t.size() / width, width};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data().begin(), a.data().end());
  as_vec(out) += as_vec(b.node()->data);
  auto pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Tensor::Node& self) {
    accumulate(pa, self.grad);
    accumulate(pb, self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.data().begin(), a.data().end());
  as_vec(out) -= as_vec(b.node()->data);
  auto pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Tensor::Node& self) {
    accumulate(pa, self.grad);
    if (pb->requires_grad) {
      pb->ensure_grad();
      as_vec(pb->grad) -= as_vec(self.grad);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.data().begin(), a.data().end());
  as_vec(out) *= as_vec(b.node()->data);
  auto pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Tensor::Node& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      as_vec(pa->grad) += as_vec(self.grad) * as_vec(pb->data);
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      as_vec(pb->grad) += as_vec(self.grad) * as_vec(pa->data);
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  as_vec(out) *= s;
  auto pa = a.node();
  return make_result(a.shape(), std::move(out), {a}, [pa, s](Tensor::Node& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      as_vec(pa->grad) += s * as_vec(self.grad);
    }
  });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  auto [r, c] = row_view(x, "add_row_bias");
  if (bias.rank() != 1 || bias.size() != c) throw ShapeError("add_row_bias: bias width mismatch");
  std::vector<double> out(x.data().begin(), x.data().end());
  {
    auto m = as_mat(out, r, c);
    m.rowwise() += CMatRef(bias.data().data(), 1, c).row(0);
  }
  auto px = x.node(), pb = bias.node();
  return make_result(x.shape(), std::move(out), {x, bias}, [px, pb, r, c](Tensor::Node& self) {
    accumulate(px, self.grad);
    if (pb->requires_grad) {
      pb->ensure_grad();
      MatRef(pb->grad.data(), 1, c) += as_mat(self.grad, r, c).colwise().sum();
    }
  });
}

Tensor broadcast_row(const Tensor& v, int64_t n) {
  if (v.rank() != 1) throw ShapeError("broadcast_row: vector input required");
  if (n < 0) throw ShapeError("broadcast_row: negative row count");
  int64_t c = v.size();
  std::vector<double> out(static_cast<size_t>(n * c));
  for (int64_t i = 0; i < n; ++i)
    std::copy(v.data().begin(), v.data().end(), out.begin() + static_cast<size_t>(i * c));
  auto pv = v.node();
  return make_result({n, c}, std::move(out), {v}, [pv, n, c](Tensor::Node& self) {
    if (pv->requires_grad) {
      pv->ensure_grad();
      MatRef(pv->grad.data(), 1, c) += as_mat(self.grad, n, c).colwise().sum();
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul: rank-2 inputs required");
  int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) throw ShapeError("matmul: inner dimensions disagree");
  std::vector<double> out(static_cast<size_t>(m * n));
  as_mat(out, m, n).noalias() = as_mat(a.node()->data, m, k) * as_mat(b.node()->data, k, n);
  auto pa = a.node(), pb = b.node();
  return make_result({m, n}, std::move(out), {a, b}, [pa, pb, m, k, n](Tensor::Node& self) {
    auto gy = as_mat(self.grad, m, n);
    if (pa->requires_grad) {
      pa->ensure_grad();
      as_mat(pa->grad, m, k).noalias() += gy * as_mat(pb->data, k, n).transpose();
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      as_mat(pb->grad, k, n).noalias() += as_mat(pa->data, m, k).transpose() * gy;
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: rank-2 input required");
  int64_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(static_cast<size_t>(r * c));
  as_mat(out, c, r) = as_mat(a.node()->data, r, c).transpose();
  auto pa = a.node();
  return make_result({c, r}, std::move(out), {a}, [pa, r, c](Tensor::Node& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      as_mat(pa->grad, r, c) += as_mat(self.grad, c, r).transpose();
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size()) throw ShapeError("reshape: element count mismatch");
  std::vector<double> out(a.data().begin(), a.data().end());
  auto pa = a.node();
  return make_result(std::move(shape), std::move(out), {a},
                     [pa](Tensor::Node& self) { accumulate(pa, self.grad); });
}

Tensor gather_rows(const Tensor& a, const std::vector<int64_t>& indices) {
  if (a.rank() != 1 && a.rank() != 2) throw ShapeError("gather_rows: rank-1/2 input required");
  int64_t r = a.rank() == 1 ? a.size() : a.dim(0);
  int64_t c = a.rank() == 1 ? 1 : a.dim(1);
  for (int64_t i : indices)
    if (i < 0 || i >= r) throw IndexError("gather_rows: index out of bounds");
  int64_t k = static_cast<int64_t>(indices.size());
  std::vector<double> out(static_cast<size_t>(k * c));
  const double* src = a.data().data();
  for (int64_t i = 0; i < k; ++i)
    std::copy(src + indices[static_cast<size_t>(i)] * c, src + (indices[static_cast<size_t>(i)] + 1) * c,
              out.begin() + static_cast<size_t>(i * c));
  Shape out_shape = a.rank() == 1 ? Shape{k} : Shape{k, c};
  auto pa = a.node();
  auto idx = indices;
  return make_result(std::move(out_shape), std::move(out), {a}, [pa, idx, c](Tensor::Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      for (int64_t j = 0; j < c; ++j)
        pa->grad[static_cast<size_t>(idx[i] * c + j)] += self.grad[i * static_cast<size_t>(c) + static_cast<size_t>(j)];
  });
}

Tensor scatter_rows(const Tensor& a, const std::vector<int64_t>& indices, int64_t n_rows) {
  if (a.rank() != 1 && a.rank() != 2) throw ShapeError("scatter_rows: rank-1/2 input required");
  int64_t k = a.rank() == 1 ? a.size() : a.dim(0);
  int64_t c = a.rank() == 1 ? 1 : a.dim(1);
  if (static_cast<int64_t>(indices.size()) != k) throw ShapeError("scatter_rows: index count mismatch");
  std::vector<bool> used(static_cast<size_t>(n_rows), false);
  for (int64_t i : indices) {
    if (i < 0 || i >= n_rows) throw IndexError("scatter_rows: index out of bounds");
    if (used[static_cast<size_t>(i)]) throw IndexError("scatter_rows: duplicate index");
    used[static_cast<size_t>(i)] = true;
  }
  std::vector<double> out(static_cast<size_t>(n_rows * c), 0.0);
  const double* src = a.data().data();
  for (int64_t i = 0; i < k; ++i)
    std::copy(src + i * c, src + (i + 1) * c, out.begin() + static_cast<size_t>(indices[static_cast<size_t>(i)] * c));
  Shape out_shape = a.rank() == 1 ? Shape{n_rows} : Shape{n_rows, c};
  auto pa = a.node();
  auto idx = indices;
  return make_result(std::move(out_shape), std::move(out), {a}, [pa, idx, c](Tensor::Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      for (int64_t j = 0; j < c; ++j)
        pa->grad[i * static_cast<size_t>(c) + static_cast<size_t>(j)] += self.grad[static_cast<size_t>(idx[i] * c + j)];
  });
}

Tensor slice_rows(const Tensor& a, int64_t start, int64_t count) {
  if (a.rank() != 2) throw ShapeError("slice_rows: rank-2 input required");
  if (start < 0 || count < 0 || start + count > a.dim(0)) throw IndexError("slice_rows: range out of bounds");
  int64_t c = a.dim(1);
  std::vector<double> out(a.data().begin() + static_cast<size_t>(start * c),
                          a.data().begin() + static_cast<size_t>((start + count) * c));
  auto pa = a.node();
  return make_result({count, c}, std::move(out), {a}, [pa, start, count, c](Tensor::Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    VecRef(pa->grad.data() + start * c, count * c) += as_vec(self.grad);
  });
}

Tensor slice_cols(const Tensor& a, int64_t start, int64_t count) {
  if (a.rank() != 2) throw ShapeError("slice_cols: rank-2 input required");
  if (start < 0 || count < 0 || start + count > a.dim(1)) throw IndexError("slice_cols: range out of bounds");
  int64_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(static_cast<size_t>(r * count));
  as_mat(out, r, count) = as_mat(a.node()->data, r, c).middleCols(start, count);
  auto pa = a.node();
  return make_result({r, count}, std::move(out), {a}, [pa, start, count, r, c](Tensor::Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    as_mat(pa->grad, r, c).middleCols(start, count) += as_mat(self.grad, r, count);
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  int64_t c = parts.front().cols();
  int64_t r = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(1) != c) throw ShapeError("concat_rows: column mismatch");
    r += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(r * c));
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<NodePtr> nodes;
  for (const Tensor& p : parts) nodes.push_back(p.node());
  return make_result({r, c}, std::move(out), parts, [nodes, c](Tensor::Node& self) {
    size_t offset = 0;
    for (const NodePtr& p : nodes) {
      size_t len = p->data.size();
      if (p->requires_grad) {
        p->ensure_grad();
        VecRef(p->grad.data(), static_cast<Eigen::Index>(len)) +=
            CVecRef(self.grad.data() + offset, static_cast<Eigen::Index>(len));
      }
      offset += len;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  int64_t r = parts.front().rows();
  int64_t c = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != r) throw ShapeError("concat_cols: row mismatch");
    c += p.dim(1);
  }
  std::vector<double> out(static_cast<size_t>(r * c));
  {
    auto m = as_mat(out, r, c);
    int64_t at = 0;
    for (const Tensor& p : parts) {
      m.middleCols(at, p.dim(1)) = as_mat(p.node()->data, r, p.dim(1));
      at += p.dim(1);
    }
  }
  std::vector<NodePtr> nodes;
  std::vector<int64_t> widths;
  for (const Tensor& p : parts) {
    nodes.push_back(p.node());
    widths.push_back(p.dim(1));
  }
  return make_result({r, c}, std::move(out), parts, [nodes, widths, r, c](Tensor::Node& self) {
    auto gy = as_mat(self.grad, r, c);
    int64_t at = 0;
    for (size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i]->requires_grad) {
        nodes[i]->ensure_grad();
        as_mat(nodes[i]->grad, r, widths[i]) += gy.middleCols(at, widths[i]);
      }
      at += widths[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (axis == 0) {
    if (!parts.empty() && parts.front().rank() == 1) {
      std::vector<Tensor> rows;
      int64_t total = 0;
      for (const Tensor& p : parts) total += p.size();
      std::vector<double> out;
      out.reserve(static_cast<size_t>(total));
      for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
      std::vector<NodePtr> nodes;
      for (const Tensor& p : parts) nodes.push_back(p.node());
      return make_result({total}, std::move(out), parts, [nodes](Tensor::Node& self) {
        size_t offset = 0;
        for (const NodePtr& p : nodes) {
          if (p->requires_grad) {
            p->ensure_grad();
            for (size_t i = 0; i < p->data.size(); ++i) p->grad[i] += self.grad[offset + i];
          }
          offset += p->data.size();
        }
      });
    }
    return concat_rows(parts);
  }
  if (axis == 1) return concat_cols(parts);
  throw ShapeError("concat: axis must be 0 or 1");
}

Tensor gelu(const Tensor& a) {
  constexpr double inv_sqrt2 = std::numbers::sqrt2 / 2.0;
  const size_t n = a.node()->data.size();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    double x = a.node()->data[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
  }
  auto pa = a.node();
  return make_result(a.shape(), std::move(out), {a}, [pa](Tensor::Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    constexpr double inv_sqrt_2pi = 0.3989422804014326779;
    for (size_t i = 0; i < pa->data.size(); ++i) {
      double x = pa->data[i];
      double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
      double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
      pa->grad[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  auto [r, c] = row_view(x, "layer_norm");
  if (eps <= 0) throw ConfigError("layer_norm: eps must be positive");
  if (gamma.rank() != 1 || gamma.size() != c || beta.rank() != 1 || beta.size() != c)
    throw ShapeError("layer_norm: gamma/beta width mismatch");

  std::vector<double> xhat(static_cast<size_t>(r * c));
  std::vector<double> inv_std(static_cast<size_t>(r));
  std::vector<double> out(static_cast<size_t>(r * c));
  const double* xd = x.data().data();
  const double* gd = gamma.data().data();
  const double* bd = beta.data().data();
  for (int64_t i = 0; i < r; ++i) {
    CVecRef row(xd + i * c, c);
    double mean = row.mean();
    double var = (row - mean).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(i)] = is;
    for (int64_t j = 0; j < c; ++j) {
      double xh = (xd[i * c + j] - mean) * is;
      xhat[static_cast<size_t>(i * c + j)] = xh;
      out[static_cast<size_t>(i * c + j)] = xh * gd[j] + bd[j];
    }
  }
  auto px = x.node(), pg = gamma.node(), pb = beta.node();
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [px, pg, pb, xhat = std::move(xhat), inv_std = std::move(inv_std), r,
                      c](Tensor::Node& self) {
                       const double* gy = self.grad.data();
                       const double* gd = pg->data.data();
                       if (pg->requires_grad) {
                         pg->ensure_grad();
                         for (int64_t i = 0; i < r; ++i)
                           for (int64_t j = 0; j < c; ++j)
                             pg->grad[static_cast<size_t>(j)] +=
                                 gy[i * c + j] * xhat[static_cast<size_t>(i * c + j)];
                       }
                       if (pb->requires_grad) {
                         pb->ensure_grad();
                         for (int64_t i = 0; i < r; ++i)
                           for (int64_t j = 0; j < c; ++j)
                             pb->grad[static_cast<size_t>(j)] += gy[i * c + j];
                       }
                       if (px->requires_grad) {
                         px->ensure_grad();
                         for (int64_t i = 0; i < r; ++i) {
                           double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                           for (int64_t j = 0; j < c; ++j) {
                             double dxh = gy[i * c + j] * gd[j];
                             mean_dxhat += dxh;
                             mean_dxhat_xhat += dxh * xhat[static_cast<size_t>(i * c + j)];
                           }
                           mean_dxhat /= static_cast<double>(c);
                           mean_dxhat_xhat /= static_cast<double>(c);
                           double is = inv_std[static_cast<size_t>(i)];
                           for (int64_t j = 0; j < c; ++j) {
                             double dxh = gy[i * c + j] * gd[j];
                             px->grad[static_cast<size_t>(i * c + j)] +=
                                 is * (dxh - mean_dxhat -
                                       xhat[static_cast<size_t>(i * c + j)] * mean_dxhat_xhat);
                           }
                         }
                       }
                     });
}

Tensor softmax(const Tensor& x) {
  auto [r, c] = row_view(x, "softmax");
  std::vector<double> out(static_cast<size_t>(r * c));
  const double* xd = x.data().data();
  for (int64_t i = 0; i < r; ++i) {
    double mx = *std::max_element(xd + i * c, xd + (i + 1) * c);
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      double e = std::exp(xd[i * c + j] - mx);
      out[static_cast<size_t>(i * c + j)] = e;
      sum += e;
    }
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(i * c + j)] /= sum;
  }
  auto px = x.node();
  auto y = out;  // saved activations for backward
  return make_result(x.shape(), std::move(out), {x}, [px, y = std::move(y), r, c](Tensor::Node& self) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (int64_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (int64_t j = 0; j < c; ++j) dot += self.grad[static_cast<size_t>(i * c + j)] * y[static_cast<size_t>(i * c + j)];
      for (int64_t j = 0; j < c; ++j)
        px->grad[static_cast<size_t>(i * c + j)] +=
            y[static_cast<size_t>(i * c + j)] * (self.grad[static_cast<size_t>(i * c + j)] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  auto [r, c] = row_view(x, "log_softmax");
  std::vector<double> out(static_cast<size_t>(r * c));
  const double* xd = x.data().data();
  for (int64_t i = 0; i < r; ++i) {
    double mx = *std::max_element(xd + i * c, xd + (i + 1) * c);
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) sum += std::exp(xd[i * c + j] - mx);
    double lse = mx + std::log(sum);
    for (int64_t j = 0; j < c; ++j) out[static_cast<size_t>(i * c + j)] = xd[i * c + j] - lse;
  }
  auto px = x.node();
  auto y = out;
  return make_result(x.shape(), std::move(out), {x}, [px, y = std::move(y), r, c](Tensor::Node& self) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (int64_t i = 0; i < r; ++i) {
      double gsum = 0.0;
      for (int64_t j = 0; j < c; ++j) gsum += self.grad[static_cast<size_t>(i * c + j)];
      for (int64_t j = 0; j < c; ++j)
        px->grad[static_cast<size_t>(i * c + j)] +=
            self.grad[static_cast<size_t>(i * c + j)] - std::exp(y[static_cast<size_t>(i * c + j)]) * gsum;
    }
  });
}

Tensor sum_all(const Tensor& a) {
  double s = as_vec(a.node()->data).sum();
  auto pa = a.node();
  return make_result({}, {s}, {a}, [pa](Tensor::Node& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    as_vec(pa->grad) += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean_all: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean_rows(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("mean_rows: rank-2 input required");
  int64_t r = x.dim(0), c = x.dim(1);
  if (r == 0) throw ShapeError("mean_rows: no rows");
  std::vector<double> out(static_cast<size_t>(c));
  MatRef(out.data(), 1, c) = as_mat(x.node()->data, r, c).colwise().mean();
  auto px = x.node();
  return make_result({c}, std::move(out), {x}, [px, r, c](Tensor::Node& self) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    double inv = 1.0 / static_cast<double>(r);
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < c; ++j)
        px->grad[static_cast<size_t>(i * c + j)] += inv * self.grad[static_cast<size_t>(j)];
  });
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  if (h <= 0) throw ContractError("grad_check: h must be positive");
  Tensor probe = Tensor::from_data(x.shape(), {x.data().begin(), x.data().end()}, true);
  Tensor y = f(probe);
  if (y.size() != 1) throw ContractError("grad_check: f must be scalar-valued");
  y.backward();
  std::vector<double> analytic(probe.grad().begin(), probe.grad().end());
  if (analytic.empty()) analytic.assign(static_cast<size_t>(x.size()), 0.0);

  std::vector<double> base(x.data().begin(), x.data().end());
  double worst = 0.0;
  for (size_t i = 0; i < base.size(); ++i) {
    std::vector<double> plus = base, minus = base;
    plus[i] += h;
    minus[i] -= h;
    double fp = f(Tensor::from_data(x.shape(), std::move(plus))).value();
    double fm = f(Tensor::from_data(x.shape(), std::move(minus))).value();
    double numeric = (fp - fm) / (2.0 * h);
    double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace dualmae
