#include <algorithm>
#include <cstring>
#include <vector>

#include "pcn/kernels.hpp"
#include "pcn/parallel.hpp"

namespace pcn::kernels {

namespace {

// Register-tiled microkernel: NI rows of C against a TJ-wide column panel.
// TJ is sized so the accumulator block fits the vector register file.
template <class T>
constexpr int64_t kTileJ = sizeof(T) == 4 ? 64 : 32;

template <class T, int NI>
void gemm_panel(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t i0,
                int64_t j0, bool accumulate) {
  constexpr int64_t TJ = kTileJ<T>;
  T acc[NI][TJ];
  for (int ii = 0; ii < NI; ++ii) {
    if (accumulate)
      std::memcpy(acc[ii], c + (i0 + ii) * n + j0, TJ * sizeof(T));
    else
      std::fill(acc[ii], acc[ii] + TJ, T(0));
  }
  for (int64_t kk = 0; kk < k; ++kk) {
    const T* brow = b + kk * n + j0;
    T av[NI];
    for (int ii = 0; ii < NI; ++ii) av[ii] = a[(i0 + ii) * k + kk];
    for (int ii = 0; ii < NI; ++ii) {
#pragma omp simd
      for (int64_t jj = 0; jj < TJ; ++jj) acc[ii][jj] += av[ii] * brow[jj];
    }
  }
  for (int ii = 0; ii < NI; ++ii)
    std::memcpy(c + (i0 + ii) * n + j0, acc[ii], TJ * sizeof(T));
}

template <class T>
void gemm_edge(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t i0,
               int64_t ni, int64_t j0, int64_t nj, bool accumulate) {
  for (int64_t i = i0; i < i0 + ni; ++i) {
    T* crow = c + i * n;
    if (!accumulate)
      for (int64_t j = j0; j < j0 + nj; ++j) crow[j] = T(0);
    for (int64_t kk = 0; kk < k; ++kk) {
      T av = a[i * k + kk];
      const T* brow = b + kk * n;
#pragma omp simd
      for (int64_t j = j0; j < j0 + nj; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

template <class T>
void gemm(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k,
          bool accumulate) {
  constexpr int64_t TJ = kTileJ<T>;
  int64_t j0 = 0;
  for (; j0 + TJ <= n; j0 += TJ) {
    int64_t i0 = 0;
    for (; i0 + 4 <= m; i0 += 4)
      gemm_panel<T, 4>(a, b, c, n, k, i0, j0, accumulate);
    switch (m - i0) {
      case 3: gemm_panel<T, 3>(a, b, c, n, k, i0, j0, accumulate); break;
      case 2: gemm_panel<T, 2>(a, b, c, n, k, i0, j0, accumulate); break;
      case 1: gemm_panel<T, 1>(a, b, c, n, k, i0, j0, accumulate); break;
      default: break;
    }
  }
  if (j0 < n) gemm_edge(a, b, c, n, k, 0, m, j0, n - j0, accumulate);
}

namespace {

// C[M,N] += A[M,K] * B[N,K]^T with both operands row-contiguous over K.
// 4x4 tile of vector accumulators, horizontal sums once per tile.
template <class T, int NI, int NJ>
void abt_tile(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t i0,
              int64_t j0) {
  constexpr int VL = 64 / sizeof(T);
  T acc[NI * NJ][VL];
  for (auto& v : acc) std::fill(v, v + VL, T(0));
  int64_t k0 = 0;
  for (; k0 + VL <= k; k0 += VL) {
    T bv[NJ][VL];
    for (int jj = 0; jj < NJ; ++jj)
      std::memcpy(bv[jj], b + (j0 + jj) * k + k0, VL * sizeof(T));
    for (int ii = 0; ii < NI; ++ii) {
      const T* av = a + (i0 + ii) * k + k0;
      for (int jj = 0; jj < NJ; ++jj) {
        T*pv = acc[ii * NJ + jj];
#pragma omp simd
        for (int v = 0; v < VL; ++v) pv[v] += av[v] * bv[jj][v];
      }
    }
  }
  for (int ii = 0; ii < NI; ++ii) {
    for (int jj = 0; jj < NJ; ++jj) {
      T s = T(0);
      const T* pv = acc[ii * NJ + jj];
      for (int v = 0; v < VL; ++v) s += pv[v];
      const T* pa = a + (i0 + ii) * k;
      const T* pb = b + (j0 + jj) * k;
      for (int64_t kk = k0; kk < k; ++kk) s += pa[kk] * pb[kk];
      c[(i0 + ii) * n + (j0 + jj)] += s;
    }
  }
}

template <class T, int NI>
void abt_rows(const T* a, const T* b, T* c, int64_t n, int64_t k, int64_t i0) {
  int64_t j0 = 0;
  for (; j0 + 4 <= n; j0 += 4) abt_tile<T, NI, 4>(a, b, c, n, k, i0, j0);
  switch (n - j0) {
    case 3: abt_tile<T, NI, 3>(a, b, c, n, k, i0, j0); break;
    case 2: abt_tile<T, NI, 2>(a, b, c, n, k, i0, j0); break;
    case 1: abt_tile<T, NI, 1>(a, b, c, n, k, i0, j0); break;
    default: break;
  }
}

template <class T>
void gemm_abt_acc(const T* a, const T* b, T* c, int64_t m, int64_t n,
                  int64_t k) {
  int64_t i0 = 0;
  for (; i0 + 4 <= m; i0 += 4) abt_rows<T, 4>(a, b, c, n, k, i0);
  switch (m - i0) {
    case 3: abt_rows<T, 3>(a, b, c, n, k, i0); break;
    case 2: abt_rows<T, 2>(a, b, c, n, k, i0); break;
    case 1: abt_rows<T, 1>(a, b, c, n, k, i0); break;
    default: break;
  }
}

}  // namespace

ConvGeom conv_geometry(const Shape& x_shape, const Shape& w_shape,
                       int64_t stride, int64_t pad) {
  if (x_shape.size() != 4)
    throw ShapeError("conv2d expects input [N,C,H,W], got " +
                     shape_str(x_shape));
  if (w_shape.size() != 4)
    throw ShapeError("conv2d expects kernel [C_out,C_in,k,k], got " +
                     shape_str(w_shape));
  if (w_shape[2] != w_shape[3])
    throw ShapeError("conv2d kernel must be square, got " + shape_str(w_shape));
  if (x_shape[1] != w_shape[1])
    throw ShapeError("conv2d channel mismatch: input " + shape_str(x_shape) +
                     " vs kernel " + shape_str(w_shape));
  if (stride < 1) throw ContractError("conv2d stride must be >= 1");
  if (pad < 0) throw ContractError("conv2d padding must be >= 0");
  ConvGeom g;
  g.n = x_shape[0];
  g.c_in = x_shape[1];
  g.h = x_shape[2];
  g.w = x_shape[3];
  g.c_out = w_shape[0];
  g.k = w_shape[2];
  g.stride = stride;
  g.pad = pad;
  g.h_out = (g.h + 2 * pad - g.k) / stride + 1;
  g.w_out = (g.w + 2 * pad - g.k) / stride + 1;
  if (g.h_out < 1 || g.w_out < 1)
    throw ShapeError("conv2d output would be empty for input " +
                     shape_str(x_shape) + ", kernel " + shape_str(w_shape));
  return g;
}

namespace {

// cols[(ci*k+kh)*k+kw, oh*Wo+ow] = x[ci, oh*s-p+kh, ow*s-p+kw] (0 outside)
template <class T>
void im2col_kmajor(const T* x, const ConvGeom& g, T* cols) {
  const int64_t hw_out = g.h_out * g.w_out;
  for (int64_t ci = 0; ci < g.c_in; ++ci) {
    const T* plane = x + ci * g.h * g.w;
    for (int64_t kh = 0; kh < g.k; ++kh) {
      for (int64_t kw = 0; kw < g.k; ++kw) {
        T* row = cols + ((ci * g.k + kh) * g.k + kw) * hw_out;
        for (int64_t oh = 0; oh < g.h_out; ++oh) {
          int64_t ih = oh * g.stride - g.pad + kh;
          T* dst = row + oh * g.w_out;
          if (ih < 0 || ih >= g.h) {
            std::fill(dst, dst + g.w_out, T(0));
            continue;
          }
          const T* src = plane + ih * g.w;
          int64_t iw0 = -g.pad + kw;  // input col at ow=0
          if (g.stride == 1) {
            int64_t lo = std::max<int64_t>(0, -iw0);
            int64_t hi = std::min<int64_t>(g.w_out, g.w - iw0);
            if (lo > 0) std::fill(dst, dst + std::min(lo, g.w_out), T(0));
            if (hi > lo) std::memcpy(dst + lo, src + iw0 + lo,
                                     (hi - lo) * sizeof(T));
            if (hi < g.w_out)
              std::fill(dst + std::max(hi, lo), dst + g.w_out, T(0));
          } else {
            for (int64_t ow = 0; ow < g.w_out; ++ow) {
              int64_t iw = iw0 + ow * g.stride;
              dst[ow] = (iw >= 0 && iw < g.w) ? src[iw] : T(0);
            }
          }
        }
      }
    }
  }
}

// Scatter-accumulate of the k-major column matrix back to an image.
template <class T>
void col2im_kmajor(const T* cols, const ConvGeom& g, T* x) {
  const int64_t hw_out = g.h_out * g.w_out;
  std::fill(x, x + g.c_in * g.h * g.w, T(0));
  for (int64_t ci = 0; ci < g.c_in; ++ci) {
    T* plane = x + ci * g.h * g.w;
    for (int64_t kh = 0; kh < g.k; ++kh) {
      for (int64_t kw = 0; kw < g.k; ++kw) {
        const T* row = cols + ((ci * g.k + kh) * g.k + kw) * hw_out;
        for (int64_t oh = 0; oh < g.h_out; ++oh) {
          int64_t ih = oh * g.stride - g.pad + kh;
          if (ih < 0 || ih >= g.h) continue;
          T* dstrow = plane + ih * g.w;
          const T* srcrow = row + oh * g.w_out;
          int64_t iw0 = -g.pad + kw;
          if (g.stride == 1) {
            int64_t lo = std::max<int64_t>(0, -iw0);
            int64_t hi = std::min<int64_t>(g.w_out, g.w - iw0);
#pragma omp simd
            for (int64_t ow = lo; ow < hi; ++ow) dstrow[iw0 + ow] += srcrow[ow];
          } else {
            for (int64_t ow = 0; ow < g.w_out; ++ow) {
              int64_t iw = iw0 + ow * g.stride;
              if (iw >= 0 && iw < g.w) dstrow[iw] += srcrow[ow];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& w,
                          int64_t stride, int64_t pad) {
  ConvGeom g = conv_geometry(x.shape(), w.shape(), stride, pad);
  TensorT<T> y = TensorT<T>::uninitialized({g.n, g.c_out, g.h_out, g.w_out});
  const int64_t ckk = g.c_in * g.k * g.k;
  const int64_t hw_out = g.h_out * g.w_out;
  const bool pointwise = g.k == 1 && pad == 0 && stride == 1;
  parallel_for(g.n, [&](int64_t n) {
    if (pointwise) {
      // x plane already is the [C_in, H*W] column matrix
      gemm(w.data(), x.data() + n * g.c_in * g.h * g.w,
           y.data() + n * g.c_out * hw_out, g.c_out, hw_out, g.c_in, false);
      return;
    }
    std::vector<T> cols(static_cast<size_t>(ckk * hw_out));
    im2col_kmajor(x.data() + n * g.c_in * g.h * g.w, g, cols.data());
    gemm(w.data(), cols.data(), y.data() + n * g.c_out * hw_out, g.c_out,
         hw_out, ckk, false);
  });
  return y;
}

template <class T>
TensorT<T> conv2d_input_grad(const TensorT<T>& gy, const TensorT<T>& w,
                             int64_t stride, int64_t pad, int64_t h_in,
                             int64_t w_in) {
  Shape x_shape{gy.dim(0), w.dim(1), h_in, w_in};
  ConvGeom g = conv_geometry(x_shape, w.shape(), stride, pad);
  if (gy.dim(1) != g.c_out || gy.dim(2) != g.h_out || gy.dim(3) != g.w_out)
    throw ShapeError("conv2d_input_grad: output grad " + shape_str(gy.shape()) +
                     " does not match geometry");
  if (stride == 1) {
    // Full correlation with the channel-transposed, spatially flipped kernel.
    TensorT<T> wflip = TensorT<T>::uninitialized({g.c_in, g.c_out, g.k, g.k});
    const int64_t kk = g.k * g.k;
    for (int64_t co = 0; co < g.c_out; ++co)
      for (int64_t ci = 0; ci < g.c_in; ++ci)
        for (int64_t t = 0; t < kk; ++t)
          wflip[(ci * g.c_out + co) * kk + (kk - 1 - t)] =
              w[(co * g.c_in + ci) * kk + t];
    return conv2d_forward(gy, wflip, 1, g.k - 1 - pad);
  }
  const int64_t ckk = g.c_in * g.k * g.k;
  const int64_t hw_out = g.h_out * g.w_out;
  // W^T once: [ckk, C_out]
  std::vector<T> wt(static_cast<size_t>(ckk * g.c_out));
  for (int64_t co = 0; co < g.c_out; ++co)
    for (int64_t r = 0; r < ckk; ++r)
      wt[static_cast<size_t>(r * g.c_out + co)] = w[co * ckk + r];
  TensorT<T> gx = TensorT<T>::uninitialized(x_shape);
  parallel_for(g.n, [&](int64_t n) {
    std::vector<T> cols(static_cast<size_t>(ckk * hw_out));
    gemm(wt.data(), gy.data() + n * g.c_out * hw_out, cols.data(), ckk, hw_out,
         g.c_out, false);
    col2im_kmajor(cols.data(), g, gx.data() + n * g.c_in * g.h * g.w);
  });
  return gx;
}

template <class T>
TensorT<T> conv2d_weight_grad(const TensorT<T>& x, const TensorT<T>& gy,
                              int64_t stride, int64_t pad, int64_t k) {
  Shape w_shape{gy.dim(1), x.dim(1), k, k};
  ConvGeom g = conv_geometry(x.shape(), w_shape, stride, pad);
  if (gy.dim(2) != g.h_out || gy.dim(3) != g.w_out)
    throw ShapeError("conv2d_weight_grad: output grad " +
                     shape_str(gy.shape()) + " does not match geometry");
  const int64_t ckk = g.c_in * g.k * g.k;
  const int64_t hw_out = g.h_out * g.w_out;
  // Fixed image->chunk partition; chunk partials are reduced in order, so the
  // result is independent of the worker count.
  const int64_t chunks = std::min<int64_t>(g.n, 8);
  const int64_t wnumel = g.c_out * ckk;
  const bool pointwise = g.k == 1 && pad == 0 && stride == 1;
  std::vector<std::vector<T>> partial(static_cast<size_t>(chunks));
  parallel_for(chunks, [&](int64_t c) {
    auto& acc = partial[static_cast<size_t>(c)];
    acc.assign(static_cast<size_t>(wnumel), T(0));
    std::vector<T> cols(pointwise ? 0 : static_cast<size_t>(ckk * hw_out));
    for (int64_t n = c; n < g.n; n += chunks) {
      // gw += gy[n] (C_out x hw) * cols^T (hw x ckk), both K-contiguous
      const T* colp = x.data() + n * g.c_in * g.h * g.w;
      if (!pointwise) {
        im2col_kmajor(colp, g, cols.data());
        colp = cols.data();
      }
      gemm_abt_acc(gy.data() + n * g.c_out * hw_out, colp, acc.data(), g.c_out,
                   ckk, hw_out);
    }
  });
  TensorT<T> gw(w_shape);
  for (int64_t c = 0; c < chunks; ++c) {
    const T* src = partial[static_cast<size_t>(c)].data();
#pragma omp simd
    for (int64_t i = 0; i < wnumel; ++i) gw[i] += src[i];
  }
  return gw;
}

template void gemm<float>(const float*, const float*, float*, int64_t, int64_t,
                          int64_t, bool);
template void gemm<double>(const double*, const double*, double*, int64_t,
                           int64_t, int64_t, bool);
template TensorT<float> conv2d_forward<float>(const TensorT<float>&,
                                              const TensorT<float>&, int64_t,
                                              int64_t);
template TensorT<double> conv2d_forward<double>(const TensorT<double>&,
                                                const TensorT<double>&, int64_t,
                                                int64_t);
template TensorT<float> conv2d_input_grad<float>(const TensorT<float>&,
                                                 const TensorT<float>&, int64_t,
                                                 int64_t, int64_t, int64_t);
template TensorT<double> conv2d_input_grad<double>(const TensorT<double>&,
                                                   const TensorT<double>&,
                                                   int64_t, int64_t, int64_t,
                                                   int64_t);
template TensorT<float> conv2d_weight_grad<float>(const TensorT<float>&,
                                                  const TensorT<float>&,
                                                  int64_t, int64_t, int64_t);
template TensorT<double> conv2d_weight_grad<double>(const TensorT<double>&,
                                                    const TensorT<double>&,
                                                    int64_t, int64_t, int64_t);

}  // namespace pcn::kernels
