#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vbitn {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when operand shapes do not conform for an op.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an op receives a value outside its domain (e.g. log of 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

template <typename T>
struct Node {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Dense row-major tensor participating in a reverse-mode gradient graph.
///
/// Copies are shallow: two Tensor handles may refer to the same node. Graph
/// nodes are created in increasing id order on the constructing thread, so
/// any op's inputs always precede it.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<Node<T>>;

  Tensor();
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor ones(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  /// Direct write access; only valid on leaves between passes.
  std::span<T> mutable_data() { return node_->data; }
  T item() const;
  T operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const { return node_->is_leaf(); }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient; zeros if nothing has flowed here yet.
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  /// A new leaf holding a copy of the values, cut from any graph.
  Tensor detach() const;
  /// Runs reverse-mode accumulation from this scalar into every reachable
  /// requires_grad node, then releases the recorded graph.
  void backward() const;

  const Node<T>& node() const { return *node_; }
  const NodePtr& node_ptr() const { return node_; }

 private:
  NodePtr node_;
};

/// Recorded operations reachable from a root, in topological order
/// (inputs before outputs). Each node appears exactly once.
template <typename T>
struct Tape {
  std::vector<Node<T>*> order;
};

template <typename T>
Tape<T> record_tape(const Tensor<T>& root);

namespace detail {
std::uint64_t next_node_id();

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward_fn);
}  // namespace detail

extern template class Tensor<float>;
extern template class Tensor<double>;

/// Converts between precisions; the result is a fresh leaf.
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x, bool requires_grad = false) {
  std::vector<To> out(x.data().begin(), x.data().end());
  return Tensor<To>(x.shape(), std::move(out), requires_grad);
}

}  // namespace vbitn
