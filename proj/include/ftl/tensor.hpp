#ifndef FTL_TENSOR_HPP
#define FTL_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ftl/errors.hpp"

namespace ftl {

using Shape = std::vector<int>;

inline long numel(const Shape& s) {
  long n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline void check_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
}

namespace detail {

/// One node of the define-by-run differentiation graph. The graph is rebuilt
/// on every forward pass; nodes own their values and, once backward has
/// visited them, their accumulated gradients.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward_fn;  // pushes this->grad into parents

  long size() const { return static_cast<long>(data.size()); }

  double* grad_data() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad.data();
  }
};

}  // namespace detail

/// Value-semantic handle to a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), 0.0, requires_grad);
  }

  static Tensor filled(Shape shape, double value, bool requires_grad = false) {
    Tensor t;
    t.node_ = std::make_shared<detail::Node>();
    t.node_->shape = std::move(shape);
    t.node_->data.assign(static_cast<size_t>(numel(t.node_->shape)), value);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false) {
    if (numel(shape) != static_cast<long>(data.size()))
      throw ShapeError("from_data: " + shape_str(shape) + " needs " +
                       std::to_string(numel(shape)) + " values, got " +
                       std::to_string(data.size()));
    Tensor t;
    t.node_ = std::make_shared<detail::Node>();
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from_data({1}, {v}, requires_grad);
  }

  /// Uniform samples in [lo, hi), drawn in row-major element order.
  static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                        bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.node_->data) v = dist(rng);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  long size() const { return node_->size(); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<double> data() { return {node_->data.data(), node_->data.size()}; }
  std::span<const double> data() const {
    return {node_->data.data(), node_->data.size()};
  }
  /// Gradient accumulated by backward(); empty span if never populated.
  std::span<const double> grad() const {
    return {node_->grad.data(), node_->grad.size()};
  }
  bool has_grad() const { return !node_->grad.empty(); }

  double item() const {
    if (size() != 1)
      throw ShapeError("item: tensor " + shape_str(shape()) + " is not scalar");
    return node_->data[0];
  }

  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

  std::shared_ptr<detail::Node> node() const { return node_; }

  /// Builds an op result wired into the graph. The backward function sees the
  /// finished output node and is responsible for pushing grad to parents.
  static Tensor make_op(
      Shape shape, std::vector<Tensor> inputs,
      std::function<void(detail::Node&)> backward) {
    Tensor out = zeros(std::move(shape));
    bool needs = false;
    for (const Tensor& in : inputs) {
      out.node_->parents.push_back(in.node_);
      needs = needs || in.node_->requires_grad;
    }
    out.node_->requires_grad = needs;
    if (needs && backward) {
      // Raw self-pointer: the closure is owned by the node, so no cycle and
      // no dangling access.
      detail::Node* self = out.node_.get();
      out.node_->backward_fn = [self, backward]() { backward(*self); };
    }
    return out;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode sweep from a scalar loss. Gradients of every reachable
/// requires_grad tensor are accumulated (+=); call zero_grad between passes
/// for fresh gradients.
inline void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ValueError("backward: loss must be scalar, got " +
                     shape_str(loss.shape()));
  // Iterative post-order over parents; children come after their parents in
  // `order`, so the reversed list is a valid reverse-topological schedule.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  struct Frame {
    detail::Node* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  detail::Node* root = loss.node().get();
  if (seen.insert(root).second) stack.push_back({root, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::Node* p = f.node->parents[f.next_parent++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  root->grad_data()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->requires_grad && n->backward_fn && !n->grad.empty()) n->backward_fn();
  }
}

}  // namespace ftl

#endif  // FTL_TENSOR_HPP
