#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pcn/errors.hpp"

namespace pcn {

// Allocator whose resize default-initializes trivial types instead of
// zeroing; freshly computed tensors are written in full by their producers.
template <class T>
struct uninit_alloc : std::allocator<T> {
  template <class U>
  struct rebind {
    using other = uninit_alloc<U>;
  };
  template <class U>
  void construct(U* p) noexcept(noexcept(::new (static_cast<void*>(p)) U)) {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense row-major n-d array. The shape is fixed at construction; data is
// mutable until the tensor is handed off (ops treat inputs as read-only).
template <class T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.resize(static_cast<size_t>(shape_numel(shape_)));
    std::fill(data_.begin(), data_.end(), T(0));
  }

  TensorT(Shape shape, const std::vector<T>& data) : shape_(std::move(shape)) {
    validate_shape();
    if (static_cast<int64_t>(data.size()) != shape_numel(shape_))
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape_));
    data_.assign(data.begin(), data.end());
  }

  // No zero fill; the caller writes every element.
  static TensorT uninitialized(Shape shape) {
    TensorT t;
    t.shape_ = std::move(shape);
    t.validate_shape();
    t.data_.resize(static_cast<size_t>(shape_numel(t.shape_)));
    return t;
  }

  static TensorT full(Shape shape, T value) {
    TensorT t = uninitialized(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static TensorT zeros(Shape shape) { return TensorT(std::move(shape)); }

  static TensorT scalar(T value) { return full({1}, value); }

  const Shape& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t rank() const { return shape_.size(); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& at(std::initializer_list<int64_t> idx) { return data_[offset(idx)]; }
  const T& at(std::initializer_list<int64_t> idx) const {
    return data_[offset(idx)];
  }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  template <class U>
  TensorT<U> cast() const {
    TensorT<U> out = TensorT<U>::uninitialized(shape_);
    for (size_t i = 0; i < data_.size(); ++i)
      out[static_cast<int64_t>(i)] = static_cast<U>(data_[i]);
    return out;
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw ShapeError("tensor shape must have rank >= 1");
    for (int64_t d : shape_)
      if (d < 1)
        throw ShapeError("tensor dimensions must be positive, got " +
                         shape_str(shape_));
  }

  size_t offset(std::initializer_list<int64_t> idx) const {
    size_t off = 0;
    size_t i = 0;
    for (int64_t v : idx) {
      off = off * static_cast<size_t>(shape_[i]) + static_cast<size_t>(v);
      ++i;
    }
    return off;
  }

  Shape shape_;
  std::vector<T, uninit_alloc<T>> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// Spec'd constructor: tensor of `shape` filled with `value`.
template <class T>
TensorT<T> tensor_full(const Shape& shape, T value) {
  return TensorT<T>::full(shape, value);
}

}  // namespace pcn
