#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "pcn/kernels.hpp"
#include "pcn/parallel.hpp"
#include "pcn/rng.hpp"

namespace pcn::kernels {

namespace {

std::atomic<bool> g_trace_enabled{false};
std::atomic<uint64_t> g_trace_sig{0};
std::atomic<uint64_t> g_trace_calls{0};

// xor-fold is order-independent, so chunk-parallel kernels stay deterministic
void trace_fold(uint64_t h) {
  g_trace_sig.fetch_xor(h, std::memory_order_relaxed);
}

void check_nchw(const Shape& s, const char* who) {
  if (s.size() != 4)
    throw ShapeError(std::string(who) + " expects [N,C,H,W], got " +
                     shape_str(s));
}

void check_per_channel(const Shape& s, int64_t c, const char* who) {
  if (s.size() != 1 || s[0] != c)
    throw ShapeError(std::string(who) + " expects a length-" +
                     std::to_string(c) + " per-channel vector, got " +
                     shape_str(s));
}

}  // namespace

BranchTraceScope::BranchTraceScope() { g_trace_enabled.store(true); }
BranchTraceScope::~BranchTraceScope() { g_trace_enabled.store(false); }
void reset_branch_signature() {
  g_trace_sig.store(0);
  g_trace_calls.store(0);  // both probe evaluations see the same call ids
}
uint64_t branch_signature() { return g_trace_sig.load(); }

template <class T>
void batchnorm_train_forward(const TensorT<T>& x, const TensorT<T>& gamma,
                             const TensorT<T>& beta, double eps, TensorT<T>& y,
                             TensorT<T>& batch_mean, TensorT<T>& batch_var) {
  check_nchw(x.shape(), "batchnorm2d");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  check_per_channel(gamma.shape(), c, "batchnorm2d gamma");
  check_per_channel(beta.shape(), c, "batchnorm2d beta");
  const int64_t m = n * hw;
  if (m < 2)
    throw ContractError(
        "batchnorm2d train mode needs N*H*W >= 2 per channel, got " +
        std::to_string(m));
  y = TensorT<T>::uninitialized(x.shape());
  batch_mean = TensorT<T>::uninitialized({c});
  batch_var = TensorT<T>::uninitialized({c});
  parallel_for(c, [&](int64_t ch) {
    double sum = 0.0, sq = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* p = x.data() + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        double v = static_cast<double>(p[j]);
        sum += v;
        sq += v * v;
      }
    }
    double mean = sum / static_cast<double>(m);
    double var = sq / static_cast<double>(m) - mean * mean;
    if (var < 0.0) var = 0.0;  // guard against cancellation
    batch_mean[ch] = static_cast<T>(mean);
    batch_var[ch] = static_cast<T>(var);
    T inv_std = static_cast<T>(1.0 / std::sqrt(var + eps));
    T g = gamma[ch], b = beta[ch], mu = static_cast<T>(mean);
    for (int64_t i = 0; i < n; ++i) {
      const T* p = x.data() + (i * c + ch) * hw;
      T* q = y.data() + (i * c + ch) * hw;
#pragma omp simd
      for (int64_t j = 0; j < hw; ++j) q[j] = (p[j] - mu) * inv_std * g + b;
    }
  });
}

template <class T>
void batchnorm_train_backward(const TensorT<T>& x, const TensorT<T>& gamma,
                              const TensorT<T>& batch_mean,
                              const TensorT<T>& batch_var, double eps,
                              const TensorT<T>& gy, TensorT<T>& gx,
                              TensorT<T>& ggamma, TensorT<T>& gbeta) {
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const int64_t m = n * hw;
  gx = TensorT<T>::uninitialized(x.shape());
  ggamma = TensorT<T>::uninitialized({c});
  gbeta = TensorT<T>::uninitialized({c});
  parallel_for(c, [&](int64_t ch) {
    const double mu = batch_mean[ch];
    const double inv_std = 1.0 / std::sqrt(static_cast<double>(batch_var[ch]) + eps);
    double sum_gy = 0.0, sum_gy_xhat = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* px = x.data() + (i * c + ch) * hw;
      const T* pg = gy.data() + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        double xhat = (static_cast<double>(px[j]) - mu) * inv_std;
        sum_gy += pg[j];
        sum_gy_xhat += pg[j] * xhat;
      }
    }
    ggamma[ch] = static_cast<T>(sum_gy_xhat);
    gbeta[ch] = static_cast<T>(sum_gy);
    const double mean_gy = sum_gy / m;
    const double mean_gy_xhat = sum_gy_xhat / m;
    const double scale = static_cast<double>(gamma[ch]) * inv_std;
    for (int64_t i = 0; i < n; ++i) {
      const T* px = x.data() + (i * c + ch) * hw;
      const T* pg = gy.data() + (i * c + ch) * hw;
      T* pq = gx.data() + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        double xhat = (static_cast<double>(px[j]) - mu) * inv_std;
        pq[j] = static_cast<T>(scale *
                               (pg[j] - mean_gy - xhat * mean_gy_xhat));
      }
    }
  });
}

template <class T>
TensorT<T> batchnorm_eval_forward(const TensorT<T>& x, const TensorT<T>& gamma,
                                  const TensorT<T>& beta,
                                  const TensorT<T>& mean, const TensorT<T>& var,
                                  double eps) {
  check_nchw(x.shape(), "batchnorm2d");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  check_per_channel(gamma.shape(), c, "batchnorm2d gamma");
  TensorT<T> y = TensorT<T>::uninitialized(x.shape());
  parallel_for(n, [&](int64_t i) {
    for (int64_t ch = 0; ch < c; ++ch) {
      T inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var[ch]) + eps));
      T g = gamma[ch], b = beta[ch], mu = mean[ch];
      const T* p = x.data() + (i * c + ch) * hw;
      T* q = y.data() + (i * c + ch) * hw;
#pragma omp simd
      for (int64_t j = 0; j < hw; ++j) q[j] = (p[j] - mu) * inv_std * g + b;
    }
  });
  return y;
}

template <class T>
void batchnorm_eval_backward(const TensorT<T>& x, const TensorT<T>& gamma,
                             const TensorT<T>& mean, const TensorT<T>& var,
                             double eps, const TensorT<T>& gy, TensorT<T>& gx,
                             TensorT<T>& ggamma, TensorT<T>& gbeta) {
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  gx = TensorT<T>::uninitialized(x.shape());
  ggamma = TensorT<T>::uninitialized({c});
  gbeta = TensorT<T>::uninitialized({c});
  for (int64_t ch = 0; ch < c; ++ch) {
    const double inv_std = 1.0 / std::sqrt(static_cast<double>(var[ch]) + eps);
    const double mu = mean[ch];
    const T scale = static_cast<T>(gamma[ch] * inv_std);
    double sum_gy = 0.0, sum_gy_xhat = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* px = x.data() + (i * c + ch) * hw;
      const T* pg = gy.data() + (i * c + ch) * hw;
      T* pq = gx.data() + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        sum_gy += pg[j];
        sum_gy_xhat += pg[j] * (static_cast<double>(px[j]) - mu) * inv_std;
        pq[j] = scale * pg[j];
      }
    }
    ggamma[ch] = static_cast<T>(sum_gy_xhat);
    gbeta[ch] = static_cast<T>(sum_gy);
  }
}

namespace {

// Fixed chunk grid (independent of worker count) over a flat range.
template <class T, class Fn>
void ew_chunks(int64_t n, Fn fn) {
  const int64_t chunks = n >= 1 << 16 ? 8 : 1;
  parallel_for(chunks, [&](int64_t c) {
    int64_t lo = n * c / chunks;
    int64_t hi = n * (c + 1) / chunks;
    fn(lo, hi);
  });
}

}  // namespace

template <class T>
TensorT<T> relu_forward(const TensorT<T>& x) {
  TensorT<T> y = TensorT<T>::uninitialized(x.shape());
  const T* __restrict p = x.data();
  T* __restrict q = y.data();
  if (g_trace_enabled.load(std::memory_order_relaxed)) {
    const uint64_t call = g_trace_calls.fetch_add(1);
    ew_chunks<T>(x.numel(), [&](int64_t lo, int64_t hi) {
      uint64_t h = 0;
      for (int64_t i = lo; i < hi; ++i) {
        bool active = p[i] > T(0);
        q[i] = active ? p[i] : T(0);
        if (active) h ^= mix_seed(call, static_cast<uint64_t>(i));
      }
      trace_fold(h);
    });
    return y;
  }
  ew_chunks<T>(x.numel(), [&](int64_t lo, int64_t hi) {
#pragma omp simd
    for (int64_t i = lo; i < hi; ++i) q[i] = p[i] > T(0) ? p[i] : T(0);
  });
  return y;
}

template <class T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& gy) {
  TensorT<T> gx = TensorT<T>::uninitialized(x.shape());
  const T* __restrict p = x.data();
  const T* __restrict g = gy.data();
  T* __restrict q = gx.data();
  ew_chunks<T>(x.numel(), [&](int64_t lo, int64_t hi) {
#pragma omp simd
    for (int64_t i = lo; i < hi; ++i) q[i] = p[i] > T(0) ? g[i] : T(0);
  });
  return gx;
}

template <class T>
TensorT<T> ew_add(const TensorT<T>& a, const TensorT<T>& b) {
  TensorT<T> y = TensorT<T>::uninitialized(a.shape());
  const T* __restrict pa = a.data();
  const T* __restrict pb = b.data();
  T* __restrict q = y.data();
  ew_chunks<T>(a.numel(), [&](int64_t lo, int64_t hi) {
#pragma omp simd
    for (int64_t i = lo; i < hi; ++i) q[i] = pa[i] + pb[i];
  });
  return y;
}

template <class T>
TensorT<T> ew_sub(const TensorT<T>& a, const TensorT<T>& b) {
  TensorT<T> y = TensorT<T>::uninitialized(a.shape());
  const T* __restrict pa = a.data();
  const T* __restrict pb = b.data();
  T* __restrict q = y.data();
  ew_chunks<T>(a.numel(), [&](int64_t lo, int64_t hi) {
#pragma omp simd
    for (int64_t i = lo; i < hi; ++i) q[i] = pa[i] - pb[i];
  });
  return y;
}

template <class T>
TensorT<T> ew_neg(const TensorT<T>& a) {
  TensorT<T> y = TensorT<T>::uninitialized(a.shape());
  const T* __restrict pa = a.data();
  T* __restrict q = y.data();
  ew_chunks<T>(a.numel(), [&](int64_t lo, int64_t hi) {
#pragma omp simd
    for (int64_t i = lo; i < hi; ++i) q[i] = -pa[i];
  });
  return y;
}

template <class T>
TensorT<T> maxpool2_forward(const TensorT<T>& x, std::vector<int64_t>& argmax) {
  check_nchw(x.shape(), "maxpool2");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    throw ShapeError("maxpool2 requires even spatial dims, got " +
                     shape_str(x.shape()));
  const int64_t ho = h / 2, wo = w / 2;
  TensorT<T> y = TensorT<T>::uninitialized({n, c, ho, wo});
  argmax.assign(static_cast<size_t>(y.numel()), 0);
  const bool traced = g_trace_enabled.load(std::memory_order_relaxed);
  const uint64_t call = traced ? g_trace_calls.fetch_add(1) : 0;
  parallel_for(n * c, [&](int64_t nc) {
    const T* plane = x.data() + nc * h * w;
    T* out = y.data() + nc * ho * wo;
    int64_t* am = argmax.data() + nc * ho * wo;
    uint64_t hash = 0;
    for (int64_t oh = 0; oh < ho; ++oh) {
      for (int64_t ow = 0; ow < wo; ++ow) {
        int64_t base = (oh * 2) * w + ow * 2;
        // first maximal element in scan order wins ties
        int64_t best = base;
        T bv = plane[base];
        const int64_t cand[3] = {base + 1, base + w, base + w + 1};
        for (int64_t idx : cand) {
          if (plane[idx] > bv) {
            bv = plane[idx];
            best = idx;
          }
        }
        out[oh * wo + ow] = bv;
        am[oh * wo + ow] = nc * h * w + best;
        if (traced)
          hash ^= mix_seed(call, static_cast<uint64_t>(nc * h * w + best));
      }
    }
    if (traced) trace_fold(hash);
  });
  return y;
}

template <class T>
TensorT<T> maxpool2_backward(const TensorT<T>& gy,
                             const std::vector<int64_t>& argmax,
                             const Shape& x_shape) {
  TensorT<T> gx(x_shape);
  for (int64_t i = 0; i < gy.numel(); ++i)
    gx[argmax[static_cast<size_t>(i)]] += gy[i];
  return gx;
}

template <class T>
TensorT<T> global_avg_pool_forward(const TensorT<T>& x) {
  check_nchw(x.shape(), "global_avg_pool");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  TensorT<T> y = TensorT<T>::uninitialized({n, c});
  for (int64_t i = 0; i < n * c; ++i) {
    double s = 0.0;
    const T* p = x.data() + i * hw;
    for (int64_t j = 0; j < hw; ++j) s += p[j];
    y[i] = static_cast<T>(s / static_cast<double>(hw));
  }
  return y;
}

template <class T>
TensorT<T> global_avg_pool_backward(const TensorT<T>& gy,
                                    const Shape& x_shape) {
  TensorT<T> gx = TensorT<T>::uninitialized(x_shape);
  const int64_t hw = x_shape[2] * x_shape[3];
  const T inv = static_cast<T>(1.0 / static_cast<double>(hw));
  for (int64_t i = 0; i < gy.numel(); ++i) {
    T v = gy[i] * inv;
    T* p = gx.data() + i * hw;
    for (int64_t j = 0; j < hw; ++j) p[j] = v;
  }
  return gx;
}

template <class T>
TensorT<T> linear_forward(const TensorT<T>& x, const TensorT<T>& w,
                          const TensorT<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(1) ||
      b.dim(0) != w.dim(0))
    throw ShapeError("linear expects x[N,D], w[K,D], b[K]; got x=" +
                     shape_str(x.shape()) + " w=" + shape_str(w.shape()) +
                     " b=" + shape_str(b.shape()));
  const int64_t n = x.dim(0), d = x.dim(1), k = w.dim(0);
  TensorT<T> y = TensorT<T>::uninitialized({n, k});
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < k; ++j) {
      double s = static_cast<double>(b[j]);
      const T* px = x.data() + i * d;
      const T* pw = w.data() + j * d;
      for (int64_t t = 0; t < d; ++t) s += static_cast<double>(px[t]) * pw[t];
      y[i * k + j] = static_cast<T>(s);
    }
  }
  return y;
}

template <class T>
void linear_backward(const TensorT<T>& x, const TensorT<T>& w,
                     const TensorT<T>& gy, TensorT<T>& gx, TensorT<T>& gw,
                     TensorT<T>& gb) {
  const int64_t n = x.dim(0), d = x.dim(1), k = w.dim(0);
  gx = TensorT<T>::uninitialized(x.shape());
  gw = TensorT<T>(w.shape());
  gb = TensorT<T>({k});
  // gx = gy * w
  gemm(gy.data(), w.data(), gx.data(), n, d, k, false);
  for (int64_t i = 0; i < n; ++i) {
    const T* pg = gy.data() + i * k;
    const T* px = x.data() + i * d;
    for (int64_t j = 0; j < k; ++j) {
      gb[j] += pg[j];
      T* pw = gw.data() + j * d;
      T gv = pg[j];
#pragma omp simd
      for (int64_t t = 0; t < d; ++t) pw[t] += gv * px[t];
    }
  }
}

template <class T>
TensorT<T> softmax_forward(const TensorT<T>& logits) {
  if (logits.rank() != 2)
    throw ShapeError("softmax expects [N,K], got " + shape_str(logits.shape()));
  const int64_t n = logits.dim(0), k = logits.dim(1);
  TensorT<T> probs = TensorT<T>::uninitialized(logits.shape());
  for (int64_t i = 0; i < n; ++i) {
    const T* p = logits.data() + i * k;
    T* q = probs.data() + i * k;
    T mx = p[0];
    for (int64_t j = 1; j < k; ++j) mx = std::max(mx, p[j]);
    double z = 0.0;
    for (int64_t j = 0; j < k; ++j) {
      double e = std::exp(static_cast<double>(p[j] - mx));
      q[j] = static_cast<T>(e);
      z += e;
    }
    T inv = static_cast<T>(1.0 / z);
    for (int64_t j = 0; j < k; ++j) q[j] *= inv;
  }
  return probs;
}

template <class T>
double cross_entropy_from_probs(const TensorT<T>& probs,
                                const std::vector<int>& labels) {
  const int64_t n = probs.dim(0), k = probs.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw ShapeError("labels length does not match batch size");
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    int lab = labels[static_cast<size_t>(i)];
    if (lab < 0 || lab >= k)
      throw ContractError("label " + std::to_string(lab) +
                          " out of range [0," + std::to_string(k) + ")");
    double p = static_cast<double>(probs[i * k + lab]);
    loss -= std::log(std::max(p, 1e-300));
  }
  return loss / static_cast<double>(n);
}

template <class T>
TensorT<T> softmax_ce_backward(const TensorT<T>& probs,
                               const std::vector<int>& labels, T gout) {
  const int64_t n = probs.dim(0), k = probs.dim(1);
  TensorT<T> g = TensorT<T>::uninitialized(probs.shape());
  const T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
  for (int64_t i = 0; i < n; ++i) {
    const T* p = probs.data() + i * k;
    T* q = g.data() + i * k;
    for (int64_t j = 0; j < k; ++j) q[j] = p[j] * inv_n * gout;
    q[labels[static_cast<size_t>(i)]] -= inv_n * gout;
  }
  return g;
}

template <class T>
TensorT<T> channel_scale_forward(const TensorT<T>& x, const TensorT<T>& alpha) {
  check_nchw(x.shape(), "channel_scale");
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  check_per_channel(alpha.shape(), c, "channel_scale alpha");
  TensorT<T> y = TensorT<T>::uninitialized(x.shape());
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const T a = alpha[ch];
      const T* p = x.data() + (i * c + ch) * hw;
      T* q = y.data() + (i * c + ch) * hw;
#pragma omp simd
      for (int64_t j = 0; j < hw; ++j) q[j] = a * p[j];
    }
  }
  return y;
}

template <class T>
void channel_scale_backward(const TensorT<T>& x, const TensorT<T>& alpha,
                            const TensorT<T>& gy, TensorT<T>& gx,
                            TensorT<T>& galpha) {
  const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  gx = TensorT<T>::uninitialized(x.shape());
  galpha = TensorT<T>::uninitialized({c});
  for (int64_t ch = 0; ch < c; ++ch) {
    const T a = alpha[ch];
    double ga = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const T* px = x.data() + (i * c + ch) * hw;
      const T* pg = gy.data() + (i * c + ch) * hw;
      T* pq = gx.data() + (i * c + ch) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        pq[j] = a * pg[j];
        ga += static_cast<double>(pg[j]) * px[j];
      }
    }
    galpha[ch] = static_cast<T>(ga);
  }
}

template <class T>
TensorT<T> bilinear_resize(const TensorT<T>& src, int64_t h_out,
                           int64_t w_out) {
  if (src.rank() != 2)
    throw ShapeError("bilinear_resize expects [H,W], got " +
                     shape_str(src.shape()));
  const int64_t h = src.dim(0), w = src.dim(1);
  TensorT<T> dst = TensorT<T>::uninitialized({h_out, w_out});
  const double sy = static_cast<double>(h) / h_out;
  const double sx = static_cast<double>(w) / w_out;
  for (int64_t oy = 0; oy < h_out; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    int64_t y0 = static_cast<int64_t>(std::floor(fy));
    double wy = fy - y0;
    int64_t y0c = std::clamp<int64_t>(y0, 0, h - 1);
    int64_t y1c = std::clamp<int64_t>(y0 + 1, 0, h - 1);
    for (int64_t ox = 0; ox < w_out; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      int64_t x0 = static_cast<int64_t>(std::floor(fx));
      double wx = fx - x0;
      int64_t x0c = std::clamp<int64_t>(x0, 0, w - 1);
      int64_t x1c = std::clamp<int64_t>(x0 + 1, 0, w - 1);
      double v = (1 - wy) * ((1 - wx) * src[y0c * w + x0c] +
                             wx * src[y0c * w + x1c]) +
                 wy * ((1 - wx) * src[y1c * w + x0c] +
                       wx * src[y1c * w + x1c]);
      dst[oy * w_out + ox] = static_cast<T>(v);
    }
  }
  return dst;
}

#define PCN_INSTANTIATE(T)                                                     \
  template void batchnorm_train_forward<T>(const TensorT<T>&,                 \
                                           const TensorT<T>&,                 \
                                           const TensorT<T>&, double,         \
                                           TensorT<T>&, TensorT<T>&,          \
                                           TensorT<T>&);                      \
  template void batchnorm_train_backward<T>(                                  \
      const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,                \
      const TensorT<T>&, double, const TensorT<T>&, TensorT<T>&, TensorT<T>&, \
      TensorT<T>&);                                                           \
  template TensorT<T> batchnorm_eval_forward<T>(                              \
      const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,                \
      const TensorT<T>&, const TensorT<T>&, double);                          \
  template void batchnorm_eval_backward<T>(                                   \
      const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,                \
      const TensorT<T>&, double, const TensorT<T>&, TensorT<T>&, TensorT<T>&, \
      TensorT<T>&);                                                           \
  template TensorT<T> relu_forward<T>(const TensorT<T>&);                     \
  template TensorT<T> relu_backward<T>(const TensorT<T>&, const TensorT<T>&); \
  template TensorT<T> maxpool2_forward<T>(const TensorT<T>&,                  \
                                          std::vector<int64_t>&);             \
  template TensorT<T> maxpool2_backward<T>(const TensorT<T>&,                 \
                                           const std::vector<int64_t>&,       \
                                           const Shape&);                     \
  template TensorT<T> global_avg_pool_forward<T>(const TensorT<T>&);          \
  template TensorT<T> global_avg_pool_backward<T>(const TensorT<T>&,          \
                                                  const Shape&);              \
  template TensorT<T> linear_forward<T>(const TensorT<T>&, const TensorT<T>&, \
                                        const TensorT<T>&);                   \
  template void linear_backward<T>(const TensorT<T>&, const TensorT<T>&,      \
                                   const TensorT<T>&, TensorT<T>&,            \
                                   TensorT<T>&, TensorT<T>&);                 \
  template TensorT<T> softmax_forward<T>(const TensorT<T>&);                  \
  template double cross_entropy_from_probs<T>(const TensorT<T>&,              \
                                              const std::vector<int>&);       \
  template TensorT<T> softmax_ce_backward<T>(const TensorT<T>&,               \
                                             const std::vector<int>&, T);     \
  template TensorT<T> channel_scale_forward<T>(const TensorT<T>&,             \
                                               const TensorT<T>&);            \
  template void channel_scale_backward<T>(const TensorT<T>&,                  \
                                          const TensorT<T>&,                  \
                                          const TensorT<T>&, TensorT<T>&,     \
                                          TensorT<T>&);                       \
  template TensorT<T> bilinear_resize<T>(const TensorT<T>&, int64_t, int64_t); \
  template TensorT<T> ew_add<T>(const TensorT<T>&, const TensorT<T>&);         \
  template TensorT<T> ew_sub<T>(const TensorT<T>&, const TensorT<T>&);         \
  template TensorT<T> ew_neg<T>(const TensorT<T>&);

PCN_INSTANTIATE(float)
PCN_INSTANTIATE(double)
#undef PCN_INSTANTIATE

}  // namespace pcn::kernels
