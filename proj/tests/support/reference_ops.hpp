#pragma once

// Independent brute-force references used as test oracles. These stay
// deliberately naive (direct summation, quadruple loops) and never call into
// the optimized kernels they check.

#include "pcn/tensor.hpp"

namespace pcn::testing {

template <class T>
TensorT<T> naive_conv2d(const TensorT<T>& x, const TensorT<T>& w,
                        int64_t stride, int64_t pad) {
  const int64_t n = x.dim(0), ci = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const int64_t co = w.dim(0), k = w.dim(2);
  const int64_t ho = (h + 2 * pad - k) / stride + 1;
  const int64_t wo = (ww + 2 * pad - k) / stride + 1;
  TensorT<T> y({n, co, ho, wo});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t oc = 0; oc < co; ++oc)
      for (int64_t oh = 0; oh < ho; ++oh)
        for (int64_t ow = 0; ow < wo; ++ow) {
          double acc = 0.0;
          for (int64_t ic = 0; ic < ci; ++ic)
            for (int64_t kh = 0; kh < k; ++kh)
              for (int64_t kw = 0; kw < k; ++kw) {
                int64_t ih = oh * stride - pad + kh;
                int64_t iw = ow * stride - pad + kw;
                if (ih < 0 || ih >= h || iw < 0 || iw >= ww) continue;
                acc += static_cast<double>(
                           x[((in * ci + ic) * h + ih) * ww + iw]) *
                       w[((oc * ci + ic) * k + kh) * k + kw];
              }
          y[((in * co + oc) * ho + oh) * wo + ow] = static_cast<T>(acc);
        }
  return y;
}

// Direct evaluation of the conv2d adjoint: y[n,cb,ih,iw] collects every
// product its forward counterpart would have sent to x[n,ca,oh,ow].
template <class T>
TensorT<T> naive_conv_transpose2d(const TensorT<T>& x, const TensorT<T>& w) {
  const int64_t n = x.dim(0), ca = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const int64_t cb = w.dim(1), k = w.dim(2);
  const int64_t pad = (k - 1) / 2;
  TensorT<T> y({n, cb, h, ww});
  for (int64_t in = 0; in < n; ++in)
    for (int64_t ia = 0; ia < ca; ++ia)
      for (int64_t oh = 0; oh < h; ++oh)
        for (int64_t ow = 0; ow < ww; ++ow) {
          T v = x[((in * ca + ia) * h + oh) * ww + ow];
          for (int64_t ib = 0; ib < cb; ++ib)
            for (int64_t kh = 0; kh < k; ++kh)
              for (int64_t kw = 0; kw < k; ++kw) {
                int64_t ih = oh - pad + kh;
                int64_t iw = ow - pad + kw;
                if (ih < 0 || ih >= h || iw < 0 || iw >= ww) continue;
                y[((in * cb + ib) * h + ih) * ww + iw] +=
                    v * w[((ia * cb + ib) * k + kh) * k + kw];
              }
        }
  return y;
}

template <class T>
TensorT<T> naive_maxpool2(const TensorT<T>& x) {
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  TensorT<T> y({n, c, h / 2, w / 2});
  for (int64_t i = 0; i < n * c; ++i)
    for (int64_t oh = 0; oh < h / 2; ++oh)
      for (int64_t ow = 0; ow < w / 2; ++ow) {
        T best = x[i * h * w + (2 * oh) * w + 2 * ow];
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            best = std::max(best,
                            x[i * h * w + (2 * oh + dy) * w + 2 * ow + dx]);
        y[i * (h / 2) * (w / 2) + oh * (w / 2) + ow] = best;
      }
  return y;
}

template <class T>
double inner(const TensorT<T>& a, const TensorT<T>& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    s += static_cast<double>(a[i]) * b[i];
  return s;
}

template <class T>
double max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
  double worst = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, std::fabs(static_cast<double>(a[i]) - b[i]));
  return worst;
}

}  // namespace pcn::testing
