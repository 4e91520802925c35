#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace facetts::dc {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// Propagates `self.grad` into the grads of `self.parents`.
using BackwardFn = std::function<void(Node& self)>;

/// One value on the tape. Leaves hold parameters and inputs; interior nodes are
/// created by ops when at least one input requires grad and grad mode is on.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass reaches the node
  bool requires_grad = false;
  bool leaf = true;
  std::vector<NodePtr> parents;
  BackwardFn backward;
};

/// Shared handle to a tape node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t size() const;

  std::span<const double> data() const;
  /// Writable view of a leaf's values. Used by optimizers, checkpoint loading and
  /// finite-difference probes; interior nodes are immutable.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  /// Zero the grad buffer, keeping it present.
  void zero_grad();
  /// Drop the grad buffer entirely.
  void clear_grad();

  /// New leaf sharing no history with this tensor (stop-gradient).
  Tensor detach() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Reverse pass from a scalar loss. Grads of reachable requires-grad leaves are
/// accumulated (not overwritten); unreachable leaves are untouched.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
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
/// Builds an op result. Records `fn` and the inputs only when grad mode is on and
/// some input requires grad.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs, BackwardFn fn);
}  // namespace detail

}  // namespace facetts::dc
