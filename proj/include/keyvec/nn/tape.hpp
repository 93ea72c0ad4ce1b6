#ifndef KEYVEC_NN_TAPE_HPP
#define KEYVEC_NN_TAPE_HPP

#include <algorithm>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "keyvec/nn/param_store.hpp"
#include "keyvec/nn/tensor.hpp"

namespace keyvec::nn {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  std::size_t size() const;
  bool requires_grad() const;
  std::span<T> value() const;
  std::span<T> grad() const;
  T item() const { return value()[0]; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records a forward computation so that gradients can be propagated back
/// through it once. Nodes are created in topological order, so backward is a
/// reverse sweep over creation order.
template <typename T>
class Tape {
 public:
  struct Node {
    Shape shape;
    std::size_t size = 0;
    bool requires_grad = false;
    bool external = false;
    std::vector<T> own_value;
    std::vector<T> own_grad;
    T* value = nullptr;
    T* grad = nullptr;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding a copy of `value`. With requires_grad its gradient is
  /// readable from the returned Var after backward().
  Var<T> constant(const Tensor<T>& value, bool requires_grad = false) {
    Var<T> v = make(value.shape(), requires_grad);
    std::copy(value.data().begin(), value.data().end(), v.value().begin());
    return v;
  }

  /// Leaf aliasing a stored parameter; backward accumulates into param.grad.
  Var<T> bind(Parameter<T>& param) {
    Node& n = nodes_.emplace_back();
    n.shape = param.value.shape();
    n.size = param.value.size();
    n.requires_grad = grad_enabled_;
    n.external = true;
    n.value = param.value.data().data();
    n.grad = param.grad.data().data();
    return Var<T>(this, nodes_.size() - 1);
  }

  /// Fresh zero-initialized node, used by op implementations for outputs.
  Var<T> make(Shape shape, bool requires_grad) {
    Node& n = nodes_.emplace_back();
    n.size = shape_size(shape);
    n.shape = std::move(shape);
    n.requires_grad = requires_grad && grad_enabled_;
    n.own_value.assign(n.size, T{0});
    n.value = n.own_value.data();
    if (n.requires_grad) {
      n.own_grad.assign(n.size, T{0});
      n.grad = n.own_grad.data();
    }
    return Var<T>(this, nodes_.size() - 1);
  }

  void on_backward(const Var<T>& out, std::function<void()> fn) {
    Node& n = node(out.id());
    if (n.requires_grad) n.backward = std::move(fn);
  }

  /// Propagates d(loss)/d(node) to every node. Intermediate gradients are
  /// reset first; parameter and constant-leaf gradients accumulate.
  void backward(const Var<T>& loss) {
    Node& l = node(loss.id());
    if (l.size != 1) throw NotScalar("backward() needs a scalar loss, got shape " + shape_string(l.shape));
    if (!l.requires_grad) return;
    for (Node& n : nodes_) {
      if (n.backward && !n.external) std::fill(n.own_grad.begin(), n.own_grad.end(), T{0});
    }
    l.grad[0] += T{1};
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      if (nodes_[i].backward) nodes_[i].backward();
    }
  }

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  /// Inference mode: no node created afterwards requires a gradient.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  /// Piecewise ops report the distance of their inputs from the nearest
  /// non-differentiable point; finite-difference checks consult this.
  void record_margin(double margin) { min_margin_ = std::min(min_margin_, margin); }
  double min_margin() const { return min_margin_; }

 private:
  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
  double min_margin_ = std::numeric_limits<double>::infinity();
};

template <typename T>
const Shape& Var<T>::shape() const {
  return tape_->node(id_).shape;
}
template <typename T>
std::size_t Var<T>::size() const {
  return tape_->node(id_).size;
}
template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->node(id_).requires_grad;
}
template <typename T>
std::span<T> Var<T>::value() const {
  auto& n = tape_->node(id_);
  return {n.value, n.size};
}
template <typename T>
std::span<T> Var<T>::grad() const {
  auto& n = tape_->node(id_);
  if (!n.grad) return {};
  return {n.grad, n.size};
}

}  // namespace keyvec::nn

#endif  // KEYVEC_NN_TAPE_HPP
