#pragma once

#include <functional>
#include <vector>

#include "pcn/tensor.hpp"

namespace pcn {

template <class T>
class Tape;

// Lightweight handle to a value recorded on a tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  int32_t id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const TensorT<T>& value() const { return tape->value(id); }
  const TensorT<T>& grad() const { return tape->grad(id); }
};

// Define-by-run reverse-mode tape. The node list is a topological order by
// construction: an op can only consume handles that already exist. One tape
// serves one forward/backward pass and is confined to a single thread.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const TensorT<T>& gout)>;

  // When false, ops still compute values but record no backward closures.
  bool grad_enabled = true;

  Var<T> leaf(TensorT<T> value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, false, nullptr});
    return Var<T>{this, static_cast<int32_t>(nodes_.size() - 1)};
  }

  Var<T> record(TensorT<T> value, std::initializer_list<Var<T>> parents,
                BackwardFn fn) {
    bool needs_grad = false;
    if (grad_enabled) {
      for (const Var<T>& p : parents) {
        if (p.tape != this)
          throw ContractError("op inputs must live on the same tape");
        needs_grad = needs_grad || nodes_[p.id].needs_grad;
      }
    }
    nodes_.push_back(Node{std::move(value), {}, needs_grad, false,
                          needs_grad ? std::move(fn) : nullptr});
    return Var<T>{this, static_cast<int32_t>(nodes_.size() - 1)};
  }

  // Seeds d(loss)/d(loss) = 1 and propagates in reverse recording order.
  // Grads are reset first, so repeated calls give identical results.
  void backward(Var<T> loss) {
    if (loss.tape != this) throw ContractError("loss is not on this tape");
    if (value(loss.id).numel() != 1)
      throw ContractError("backward requires a scalar loss, got shape " +
                          shape_str(value(loss.id).shape()));
    for (Node& n : nodes_) {
      n.has_grad = false;
      n.grad = {};
    }
    Node& seed = nodes_[loss.id];
    seed.grad = TensorT<T>::full(seed.value.shape(), T(1));
    seed.has_grad = true;
    for (int32_t id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.backward && n.has_grad && n.needs_grad) n.backward(*this, n.grad);
    }
  }

  const TensorT<T>& value(int32_t id) const { return nodes_.at(id).value; }

  // Zero tensor if nothing reached this node during backward.
  const TensorT<T>& grad(int32_t id) {
    Node& n = nodes_.at(id);
    if (!n.has_grad) {
      n.grad = TensorT<T>(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  bool requires_grad(int32_t id) const { return nodes_.at(id).needs_grad; }

  void accumulate(int32_t id, TensorT<T> g) {
    Node& n = nodes_.at(id);
    if (!n.needs_grad) return;
    if (g.shape() != n.value.shape())
      throw ShapeError("gradient shape " + shape_str(g.shape()) +
                       " does not match value shape " +
                       shape_str(n.value.shape()));
    if (!n.has_grad) {
      n.grad = std::move(g);
      n.has_grad = true;
      return;
    }
    T* __restrict dst = n.grad.data();
    const T* __restrict src = g.data();
    const int64_t count = g.numel();
#pragma omp simd
    for (int64_t i = 0; i < count; ++i) dst[i] += src[i];
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorT<T> value;
    TensorT<T> grad;
    bool needs_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

}  // namespace pcn
