#pragma once

#include <cstdint>

#include "pcn/tensor.hpp"

// Raw compute kernels. No autograd here: these are the forward/backward
// building blocks the tape ops are assembled from. All kernels are
// deterministic: parallel partitions never share output locations and every
// reduction runs in a fixed order independent of the worker count.
namespace pcn::kernels {

// C[M,N] = A[M,K] * B[K,N] (row-major, contiguous). accumulate adds into C.
template <class T>
void gemm(const T* a, const T* b, T* c, int64_t m, int64_t n, int64_t k,
          bool accumulate);

struct ConvGeom {
  int64_t n, c_in, h, w;      // input
  int64_t c_out, k;           // kernel
  int64_t stride, pad;
  int64_t h_out, w_out;       // floor((H + 2*pad - k) / stride) + 1
};

// Validates channel agreement and output size >= 1.
ConvGeom conv_geometry(const Shape& x_shape, const Shape& w_shape,
                       int64_t stride, int64_t pad);

// Cross-correlation, zero padding, no bias. w is [C_out, C_in, k, k].
template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& w,
                          int64_t stride, int64_t pad);

// Adjoint of conv2d_forward in its input: given gy [N, C_out, H', W'],
// returns gx [N, C_in, h_in, w_in].
template <class T>
TensorT<T> conv2d_input_grad(const TensorT<T>& gy, const TensorT<T>& w,
                             int64_t stride, int64_t pad, int64_t h_in,
                             int64_t w_in);

// Adjoint in the weights: returns gw [C_out, C_in, k, k].
template <class T>
TensorT<T> conv2d_weight_grad(const TensorT<T>& x, const TensorT<T>& gy,
                              int64_t stride, int64_t pad, int64_t k);

// Per-channel batch normalization over [N, C, H, W].
template <class T>
void batchnorm_train_forward(const TensorT<T>& x, const TensorT<T>& gamma,
                             const TensorT<T>& beta, double eps, TensorT<T>& y,
                             TensorT<T>& batch_mean, TensorT<T>& batch_var);

template <class T>
void batchnorm_train_backward(const TensorT<T>& x, const TensorT<T>& gamma,
                              const TensorT<T>& batch_mean,
                              const TensorT<T>& batch_var, double eps,
                              const TensorT<T>& gy, TensorT<T>& gx,
                              TensorT<T>& ggamma, TensorT<T>& gbeta);

template <class T>
TensorT<T> batchnorm_eval_forward(const TensorT<T>& x, const TensorT<T>& gamma,
                                  const TensorT<T>& beta,
                                  const TensorT<T>& mean, const TensorT<T>& var,
                                  double eps);

template <class T>
void batchnorm_eval_backward(const TensorT<T>& x, const TensorT<T>& gamma,
                             const TensorT<T>& mean, const TensorT<T>& var,
                             double eps, const TensorT<T>& gy, TensorT<T>& gx,
                             TensorT<T>& ggamma, TensorT<T>& gbeta);

template <class T>
TensorT<T> relu_forward(const TensorT<T>& x);

// Subgradient 0 at the kink: passes gy where x > 0.
template <class T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& gy);

// 2x2/stride-2 max pooling; argmax records the flat input offset of the
// first maximal element in scan order per window.
template <class T>
TensorT<T> maxpool2_forward(const TensorT<T>& x, std::vector<int64_t>& argmax);

template <class T>
TensorT<T> maxpool2_backward(const TensorT<T>& gy,
                             const std::vector<int64_t>& argmax,
                             const Shape& x_shape);

template <class T>
TensorT<T> global_avg_pool_forward(const TensorT<T>& x);

template <class T>
TensorT<T> global_avg_pool_backward(const TensorT<T>& gy, const Shape& x_shape);

// y[N,K] = x[N,D] * W[K,D]^T + b[K]
template <class T>
TensorT<T> linear_forward(const TensorT<T>& x, const TensorT<T>& w,
                          const TensorT<T>& b);

template <class T>
void linear_backward(const TensorT<T>& x, const TensorT<T>& w,
                     const TensorT<T>& gy, TensorT<T>& gx, TensorT<T>& gw,
                     TensorT<T>& gb);

// Row-stabilized softmax probabilities.
template <class T>
TensorT<T> softmax_forward(const TensorT<T>& logits);

// Mean over the batch of -log(probs[label]).
template <class T>
double cross_entropy_from_probs(const TensorT<T>& probs,
                                const std::vector<int>& labels);

// d(mean CE)/d(logits) = (probs - onehot) / N, scaled by gout.
template <class T>
TensorT<T> softmax_ce_backward(const TensorT<T>& probs,
                               const std::vector<int>& labels, T gout);

// y[n,c,h,w] = alpha[c] * x[n,c,h,w]
template <class T>
TensorT<T> channel_scale_forward(const TensorT<T>& x, const TensorT<T>& alpha);

template <class T>
void channel_scale_backward(const TensorT<T>& x, const TensorT<T>& alpha,
                            const TensorT<T>& gy, TensorT<T>& gx,
                            TensorT<T>& galpha);

// Bilinear resize of a single [H, W] map (half-pixel centers).
template <class T>
TensorT<T> bilinear_resize(const TensorT<T>& src, int64_t h_out, int64_t w_out);

// Elementwise helpers on same-shaped tensors, chunk-parallel.
template <class T>
TensorT<T> ew_add(const TensorT<T>& a, const TensorT<T>& b);
template <class T>
TensorT<T> ew_sub(const TensorT<T>& a, const TensorT<T>& b);
template <class T>
TensorT<T> ew_neg(const TensorT<T>& a);

// Branch signature for finite-difference validity. While a scope is open,
// relu_forward and maxpool2_forward fold their activation pattern / argmax
// selections into a hash. Central differences estimate a derivative only
// where the function is C1 on [x-eps, x+eps]; a probe whose two evaluations
// produce different signatures crossed a kink and must be discarded.
struct BranchTraceScope {
  BranchTraceScope();
  ~BranchTraceScope();
};
void reset_branch_signature();
uint64_t branch_signature();

}  // namespace pcn::kernels
