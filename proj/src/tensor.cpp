#include "dualmae/tensor.hpp"

#include <cmath>
#include <unordered_set>

namespace dualmae {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape");
    n *= d;
  }
  return n;
}

Tensor Tensor::wrap(std::shared_ptr<Node> n) {
  Tensor t;
  t.n_ = std::move(n);
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->data.assign(static_cast<size_t>(shape_numel(shape)), value);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw ShapeError("from_data: shape does not match data length");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return wrap(std::move(n));
}

Tensor Tensor::scalar(double value) { return from_data({}, {value}); }

const Shape& Tensor::shape() const {
  if (!n_) throw ContractError("undefined tensor");
  return n_->shape;
}

int64_t Tensor::size() const { return static_cast<int64_t>(n_ ? n_->data.size() : 0); }

int64_t Tensor::dim(size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw ShapeError("dim: axis out of range");
  return s[axis];
}

int64_t Tensor::rows() const {
  const Shape& s = shape();
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw ShapeError("rows: tensor is not rank 1 or 2");
}

int64_t Tensor::cols() const {
  const Shape& s = shape();
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw ShapeError("cols: tensor is not rank 1 or 2");
}

std::span<const double> Tensor::data() const {
  if (!n_) throw ContractError("undefined tensor");
  return {n_->data.data(), n_->data.size()};
}

std::span<double> Tensor::mutable_data() {
  if (!n_) throw ContractError("undefined tensor");
  return {n_->data.data(), n_->data.size()};
}

bool Tensor::requires_grad() const { return n_ && n_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!n_) throw ContractError("undefined tensor");
  n_->requires_grad = value;
}

std::span<const double> Tensor::grad() const {
  if (!n_) throw ContractError("undefined tensor");
  return {n_->grad.data(), n_->grad.size()};
}

void Tensor::zero_grad() {
  if (n_) n_->grad.assign(n_->data.size(), 0.0);
}

double Tensor::value() const {
  if (size() != 1) throw ContractError("value(): tensor is not scalar");
  return n_->data[0];
}

void Tensor::backward() {
  if (!n_) throw ContractError("backward on undefined tensor");
  if (size() != 1) throw ContractError("backward requires a scalar output");

  // Post-order DFS; reversed it yields root-first topological order, so each
  // node's grad is complete before its backward_fn distributes it.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(n_.get(), 0);
  seen.insert(n_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  n_->ensure_grad();
  n_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->requires_grad && !node->grad.empty()) node->backward_fn(*node);
  }
}

bool all_finite(const Tensor& t) {
  for (double v : t.data())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace dualmae
