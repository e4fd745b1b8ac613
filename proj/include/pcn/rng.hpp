#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "pcn/tensor.hpp"

namespace pcn {

// splitmix64; used to derive independent per-tensor seeds from one base seed
// so that e.g. plain and PCN models share identical ff/bp parameter draws.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic RNG. mt19937_64 supplies the bit stream (its output sequence
// is fixed by the standard); the distribution transforms are hand-rolled so
// results do not depend on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t bits() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1. Rejection-free modulo is fine here;
  // the bias at 64 bits is far below anything observable.
  int64_t below(int64_t n) {
    return static_cast<int64_t>(gen_() % static_cast<uint64_t>(n));
  }

  bool coin() { return (gen_() & 1) != 0; }

  // Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  template <class T>
  TensorT<T> normal_tensor(const Shape& shape, double stddev) {
    TensorT<T> t(shape);
    for (int64_t i = 0; i < t.numel(); ++i)
      t[i] = static_cast<T>(normal() * stddev);
    return t;
  }

  template <class T>
  TensorT<T> uniform_tensor(const Shape& shape, double lo, double hi) {
    TensorT<T> t(shape);
    for (int64_t i = 0; i < t.numel(); ++i)
      t[i] = static_cast<T>(uniform(lo, hi));
    return t;
  }

  // In-place Fisher-Yates, independent of std::shuffle internals.
  template <class V>
  void shuffle(V& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      int64_t j = below(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pcn
