#include "facetts/diffcore/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "facetts/common/errors.hpp"

namespace facetts::dc {

namespace {
thread_local bool g_grad_enabled = true;

const Node& checked(const NodePtr& n) {
  if (!n) throw ContractViolation("use of undefined tensor");
  return *n;
}
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != data.size()) {
    throw ContractViolation("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                            shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t i) const {
  const auto& s = shape();
  if (i >= s.size()) throw ContractViolation("dim index out of range for shape " + shape_str(s));
  return s[i];
}

std::size_t Tensor::size() const { return checked(node_).value.size(); }

std::span<const double> Tensor::data() const { return checked(node_).value; }

std::span<double> Tensor::mutable_data() {
  checked(node_);
  if (!node_->leaf) throw ContractViolation("mutable_data on a non-leaf tensor");
  return node_->value;
}

double Tensor::item() const {
  const auto& n = checked(node_);
  if (n.value.size() != 1) throw ContractViolation("item() on tensor of shape " + shape_str(n.shape));
  return n.value[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool on) {
  checked(node_);
  if (!node_->leaf) throw ContractViolation("set_requires_grad on a non-leaf tensor");
  node_->requires_grad = on;
}

bool Tensor::is_leaf() const { return checked(node_).leaf; }

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::span<const double> Tensor::grad() const {
  const auto& n = checked(node_);
  if (n.grad.empty()) throw ContractViolation("tensor has no grad");
  return n.grad;
}

void Tensor::zero_grad() {
  checked(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::clear_grad() {
  checked(node_);
  node_->grad.clear();
  node_->grad.shrink_to_fit();
}

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return from_data(n.shape, n.value, false);
}

void backward(const Tensor& loss) {
  const auto& root = loss.node();
  checked(root);
  if (root->value.size() != 1) {
    throw ContractViolation("backward requires a scalar loss, got shape " + shape_str(root->shape));
  }
  if (!root->requires_grad) {
    throw ContractViolation("backward: loss is not connected to any requires-grad leaf");
  }

  // Iterative post-order DFS; `order` ends up topologically sorted (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (n->leaf) {
      if (n->grad.empty()) n->grad.assign(n->value.size(), 0.0);
    } else {
      n->grad.assign(n->value.size(), 0.0);
    }
  }
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->leaf && n->backward) n->backward(*n);
  }
  // Interior grads are scratch space for a single pass.
  for (Node* n : order) {
    if (!n->leaf) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) track = track || in.requires_grad();
  }
  if (track) {
    node->requires_grad = true;
    node->leaf = false;
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) {
      if (in.requires_grad()) {
        node->parents.push_back(in.node());
        continue;
      }
      // Constant at record time: alias it so a later set_requires_grad cannot reopen this edge.
      auto constant = std::make_shared<Node>();
      constant->shape = in.shape();
      constant->value.assign(in.data().begin(), in.data().end());
      node->parents.push_back(std::move(constant));
    }
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

}  // namespace facetts::dc
