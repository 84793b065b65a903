#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "dualmae/errors.hpp"

namespace dualmae {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);

// Dense 64-bit float tensor, row-major flat storage, with an optional
// reverse-mode gradient. Handles share the underlying node: ops produce new
// nodes and never mutate inputs; the only sanctioned in-place write is an
// optimizer update through mutable_data().
class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated lazily, same length as data
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
      if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
  };

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const;
  size_t rank() const { return shape().size(); }
  int64_t size() const;
  int64_t dim(size_t axis) const;
  // 2-D accessors; rank-1 tensors read as a single row.
  int64_t rows() const;
  int64_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  bool requires_grad() const;
  void set_requires_grad(bool value);
  std::span<const double> grad() const;
  void zero_grad();

  double value() const;  // scalar tensors only

  // Reverse-mode pass from a scalar. Accumulates into the grad of every
  // requires_grad node reachable through the graph. Deterministic order.
  void backward();

  // Engine-internal node access (ops and the optimizer use it).
  const std::shared_ptr<Node>& node() const { return n_; }
  static Tensor wrap(std::shared_ptr<Node> n);

 private:
  std::shared_ptr<Node> n_;
};

bool all_finite(const Tensor& t);

}  // namespace dualmae
