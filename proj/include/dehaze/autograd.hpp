#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>

#include "dehaze/errors.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze {

template <typename T>
class Tape;

// Handle to a value recorded on a Tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape(); }
};

// Reverse-mode recording of one forward pass. Nodes live in a deque so
// references to earlier values stay valid while later nodes are appended.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A value that never receives a gradient.
  Var<T> constant(Tensor<T> value) { return push(std::move(value), nullptr, false, {}); }

  // A leaf whose gradient is kept on the tape (e.g. to check input gradients).
  Var<T> input(Tensor<T> value, bool requires_grad = true) {
    return push(std::move(value), nullptr, requires_grad, {});
  }

  // A leaf referencing externally owned storage; gradients accumulate into
  // storage.grad() across every use and every backward pass.
  Var<T> parameter(Tensor<T>& storage) { return push({}, &storage, true, {}); }

  // Appends an op result. `fn` runs during backward only when some parent
  // requires a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, Backward fn) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || nodes_[p.id].requires_grad;
    return push(std::move(value), nullptr, rg, rg ? std::move(fn) : Backward{});
  }

  const Tensor<T>& value(std::size_t id) const {
    const Node& node = nodes_[id];
    return node.external ? *node.external : node.own;
  }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of a node, allocated zeroed on first access.
  Tensor<T>& grad(std::size_t id) {
    Node& node = nodes_[id];
    node.reached = true;
    return node.external ? node.external->grad() : node.own.grad();
  }

  // Gradient of a non-parameter node after backward, or nullptr.
  const Tensor<T>* grad_if(std::size_t id) const {
    const Node& node = nodes_[id];
    return node.external ? node.external->grad_if() : node.own.grad_if();
  }

  // Seeds d(out)/d(out) = 1 and propagates to every reachable node.
  void backward(Var<T> out) {
    if (value(out.id).size() != 1) {
      throw DimensionError("numel", "backward requires a scalar output, got " +
                                        value(out.id).shape().str());
    }
    grad(out.id)[0] += T(1);
    for (std::size_t i = out.id + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (node.reached && node.fn) node.fn(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // When enabled, non-smooth ops (max selections, relu-family signs, L1
  // signs) fold their branch choices into a hash. Two evaluations with equal
  // hashes lie on the same smooth piece of the function.
  void track_branches(bool on) { tracking_ = on; }
  bool tracking_branches() const { return tracking_; }
  void note_branch(std::uint64_t choice) { signature_ = (signature_ ^ choice) * 0x100000001b3ULL; }
  std::uint64_t branch_signature() const { return signature_; }

 private:
  struct Node {
    Tensor<T> own;
    Tensor<T>* external = nullptr;
    bool requires_grad = false;
    bool reached = false;
    Backward fn;
  };

  Var<T> push(Tensor<T> value, Tensor<T>* external, bool rg, Backward fn) {
    nodes_.push_back(Node{std::move(value), external, rg, false, std::move(fn)});
    return Var<T>{this, nodes_.size() - 1};
  }

  std::deque<Node> nodes_;
  bool tracking_ = false;
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
};

}  // namespace dehaze
