#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "entlib/common.hpp"

namespace entlib {

// Dense tensor handle. Copies share the underlying storage (the usual
// autodiff-handle semantics); deep_copy() makes an independent tensor.
// Gradients live next to the values and are allocated lazily.
class Tensor {
 public:
  Tensor() : d_(std::make_shared<Data>()) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    Tensor t;
    t.d_->shape = std::move(shape);
    t.d_->values.assign(num_elements(t.d_->shape), real(0));
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(std::vector<real> values, std::vector<std::size_t> shape,
                     bool requires_grad = false) {
    if (values.size() != num_elements(shape)) {
      throw ShapeError("tensor value count " + std::to_string(values.size()) +
                       " does not match shape " + shape_string(shape));
    }
    Tensor t;
    t.d_->shape = std::move(shape);
    t.d_->values = std::move(values);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor vector(std::vector<real> values, bool requires_grad = false) {
    std::size_t n = values.size();
    return from(std::move(values), {n}, requires_grad);
  }

  static Tensor scalar(real v, bool requires_grad = false) {
    return from({v}, {1}, requires_grad);
  }

  const std::vector<std::size_t>& shape() const { return d_->shape; }
  std::size_t rank() const { return d_->shape.size(); }
  std::size_t size() const { return d_->values.size(); }
  bool is_scalar() const { return size() == 1; }
  std::size_t rows() const { return d_->shape.empty() ? 0 : d_->shape[0]; }
  std::size_t cols() const { return d_->shape.size() < 2 ? 1 : d_->shape[1]; }

  const std::vector<real>& values() const { return d_->values; }
  std::vector<real>& values() { return d_->values; }

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool rg) { d_->requires_grad = rg; }

  // Lazily allocated, zero-initialized gradient of the same shape. Const on
  // the handle: copies share storage, so a const Tensor is a const handle,
  // not immutable data.
  std::vector<real>& grad() const {
    if (d_->grad.size() != d_->values.size()) d_->grad.assign(d_->values.size(), real(0));
    return d_->grad;
  }
  const std::vector<real>* grad_if() const {
    return d_->grad.size() == d_->values.size() ? &d_->grad : nullptr;
  }
  void zero_grad() const {
    if (!d_->grad.empty()) d_->grad.assign(d_->values.size(), real(0));
  }

  real item() const {
    if (!is_scalar()) throw ShapeError("item() on non-scalar tensor " + shape_string(d_->shape));
    return d_->values[0];
  }
  real at(std::size_t i) const { return d_->values[i]; }
  real& at(std::size_t i) { return d_->values[i]; }
  real at(std::size_t r, std::size_t c) const { return d_->values[r * cols() + c]; }
  real& at(std::size_t r, std::size_t c) { return d_->values[r * cols() + c]; }

  bool same_data(const Tensor& o) const { return d_ == o.d_; }

  Tensor deep_copy() const {
    Tensor t;
    *t.d_ = *d_;
    return t;
  }

  bool all_finite() const {
    for (real v : d_->values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  static std::string shape_string(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
  }
  std::string shape_string() const { return shape_string(d_->shape); }

 private:
  struct Data {
    std::vector<std::size_t> shape;
    std::vector<real> values;
    std::vector<real> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Data> d_;

  static std::size_t num_elements(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return shape.empty() ? 0 : n;
  }
};

// Ordered record of executed operations. Each entry pairs one op's output
// tensor with its backward closure; replaying the closures in reverse
// execution order accumulates gradients into every tensor that participated
// with requires_grad set.
class Tape {
 public:
  void record(const Tensor& output, std::function<void()> backward_fn) {
    nodes_.push_back(Node{output, std::move(backward_fn)});
  }

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  void clear() { nodes_.clear(); }

  // Replays the tape backward from d(loss)/d(loss) = 1. Intermediate (op
  // output) gradients are reset first, so each call adds exactly one full
  // gradient pass: repeated calls without zeroing leaf grads accumulate.
  void backward(Tensor loss) {
    if (!loss.is_scalar()) {
      throw ShapeError("backward requires a scalar loss, got " + loss.shape_string());
    }
    for (Node& n : nodes_) n.output.zero_grad();
    loss.grad()[0] += real(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
  }

 private:
  struct Node {
    Tensor output;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
};

inline void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

}  // namespace entlib
