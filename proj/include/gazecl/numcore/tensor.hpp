#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace gazecl::numcore {

// Raised when an operation is called outside its contract (bad shapes,
// non-scalar backward, invalid hyperparameters).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when numeric state goes bad (non-finite values where finiteness is
// required, degenerate inputs).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::int64_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on demand, same length as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // accumulates into parents' grad

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

// Reverse-mode gradients are recorded only while enabled; eval-mode forward
// passes run with recording off and build no graph.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

struct NoGradGuard {
  NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

inline bool grad_enabled() { return detail::grad_mode(); }

// Dense tensor handle. Copies are shallow (shared storage); ops produce new
// tensors and never mutate their inputs, except for the optimizer which owns
// its parameters.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return from_data(std::move(shape), {}, requires_grad, true);
  }

  static Tensor full(Shape shape, T v, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.data().begin(), t.data().end(), v);
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> data,
                     bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size()))
      throw ContractError("tensor: data length " +
                          std::to_string(data.size()) +
                          " does not match shape " + shape_str(shape));
    return from_data(std::move(shape), std::move(data), requires_grad, false);
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return from({}, {v}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::int64_t size() const {
    return static_cast<std::int64_t>(node_->value.size());
  }

  std::vector<T>& data() { return node_->value; }
  const std::vector<T>& data() const { return node_->value; }

  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  const std::vector<T>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  void zero_grad() {
    node_->ensure_grad();
    std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  T item() const {
    if (size() != 1)
      throw ContractError("item(): tensor has " + std::to_string(size()) +
                          " elements, expected 1");
    return node_->value[0];
  }

  bool all_finite() const {
    for (T v : node_->value)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  // Deep copy of values only; the result is a detached leaf.
  Tensor clone_detached() const {
    return from(node_->shape, node_->value, false);
  }

  std::shared_ptr<detail::Node<T>> node() const { return node_; }

 private:
  static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad,
                          bool zero_fill) {
    Tensor t;
    t.node_ = std::make_shared<detail::Node<T>>();
    t.node_->shape = std::move(shape);
    if (zero_fill)
      t.node_->value.assign(
          static_cast<std::size_t>(shape_numel(t.node_->shape)), T(0));
    else
      t.node_->value = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  std::shared_ptr<detail::Node<T>> node_;
};

namespace detail {

// Builds a result node. `backprop` is attached only when grad recording is on
// and at least one parent participates in differentiation.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      std::vector<Tensor<T>> parents,
                      std::function<void(Node<T>&)> backprop) {
  Tensor<T> out = Tensor<T>::from(std::move(shape), std::move(value), false);
  if (grad_mode()) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      out.node()->requires_grad = true;
      for (const auto& p : parents) out.node()->parents.push_back(p.node());
      out.node()->backprop = std::move(backprop);
    }
  }
  return out;
}

}  // namespace detail

// Reverse-mode sweep from a scalar output. Every reachable tensor with
// requires_grad set receives accumulated d(output)/d(tensor) in .grad().
// Leaves that never entered the graph keep whatever grad they had (the
// training loop zero-fills parameters first, so untouched ones stay zero).
template <typename T>
void backward(const Tensor<T>& output) {
  if (output.size() != 1)
    throw ContractError("backward: output must be scalar, got shape " +
                        shape_str(output.shape()));
  if (!output.requires_grad()) return;

  using NodeT = detail::Node<T>;
  // Iterative post-order DFS; order is a function of graph structure only.
  std::vector<NodeT*> order;
  std::unordered_set<NodeT*> seen;
  std::vector<std::pair<NodeT*, std::size_t>> stack;
  stack.emplace_back(output.node().get(), 0);
  seen.insert(output.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second)
        stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (NodeT* n : order) n->ensure_grad();
  output.node()->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop(**it);
  }
}

}  // namespace gazecl::numcore
