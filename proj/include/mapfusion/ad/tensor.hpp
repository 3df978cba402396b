#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mapfusion::ad {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Graph recording is on by default; NoGradGuard turns it off for a scope.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

}  // namespace detail

/// Dense row-major tensor with an optional reverse-mode gradient.
///
/// Tensors share their storage node: copying a Tensor aliases it. Values of
/// a tensor produced by an op are never changed after construction; only
/// leaves (parameters, buffers) are written in place.
template <typename T>
class Tensor {
 public:
  using Node = detail::Node<T>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  /// Leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<T> values);
  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::int64_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  /// In-place write access; only valid on leaves.
  std::span<T> mutable_data();
  const std::vector<T>& values() const { return node_->value; }

  /// Accumulated gradient; all zeros when nothing has flowed back yet.
  std::vector<T> grad() const;
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  bool has_grad() const { return !node_->grad.empty(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  void zero_grad();

  T item() const;
  Tensor detach() const { return Tensor(shape(), node_->value); }

  /// Reverse-mode sweep from this scalar; seeds d(this)/d(this) = 1.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

  /// Construct an op result. When recording is enabled and any parent needs
  /// gradients, the result keeps its parents and `fn`.
  static Tensor make_result(Shape shape, std::vector<T> values, std::vector<Tensor> parents,
                            std::function<void(Node&)> fn);

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace mapfusion::ad
