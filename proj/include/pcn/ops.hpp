#pragma once

#include <vector>

#include "pcn/autograd.hpp"
#include "pcn/kernels.hpp"

namespace pcn {

// Running statistics and affine parameters of one batch-norm layer. gamma and
// beta are learnable and get bound to the tape by the caller; the running
// stats are updated in place during train-mode forwards.
template <class T>
struct BatchNormStateT {
  TensorT<T> gamma, beta;
  TensorT<T> running_mean, running_var;
  double momentum = 0.1;  // fraction of the new batch statistic blended in
  double eps = 1e-5;

  static BatchNormStateT make(int64_t channels) {
    BatchNormStateT s;
    s.gamma = TensorT<T>::full({channels}, T(1));
    s.beta = TensorT<T>({channels});
    s.running_mean = TensorT<T>({channels});
    s.running_var = TensorT<T>::full({channels}, T(1));
    return s;
  }
};

using BatchNormState = BatchNormStateT<float>;

namespace ops {

template <class T>
Var<T> conv2d(Var<T> x, Var<T> w, int64_t stride, int64_t pad) {
  Tape<T>& tape = *x.tape;
  TensorT<T> y = kernels::conv2d_forward(x.value(), w.value(), stride, pad);
  const int64_t h_in = x.value().dim(2), w_in = x.value().dim(3);
  const int64_t k = w.value().dim(2);
  const int32_t xid = x.id, wid = w.id;
  return tape.record(
      std::move(y), {x, w},
      [=](Tape<T>& t, const TensorT<T>& g) {
        if (t.requires_grad(xid))
          t.accumulate(xid,
                       kernels::conv2d_input_grad(g, t.value(wid), stride, pad,
                                                  h_in, w_in));
        if (t.requires_grad(wid))
          t.accumulate(
              wid, kernels::conv2d_weight_grad(t.value(xid), g, stride, pad, k));
      });
}

// Adjoint of the same-geometry conv2d. x has the conv's output channels;
// w is [C_a, C_b, k, k] mapping C_a -> C_b; stride 1 with "same" padding is
// the only supported geometry (k odd).
template <class T>
Var<T> conv_transpose2d(Var<T> x, Var<T> w) {
  Tape<T>& tape = *x.tape;
  const int64_t k = w.value().dim(2);
  if (k % 2 == 0)
    throw ConfigError("conv_transpose2d supports odd kernel sizes, got k=" +
                      std::to_string(k));
  const int64_t pad = (k - 1) / 2;
  const int64_t h = x.value().dim(2), wd = x.value().dim(3);
  TensorT<T> y = kernels::conv2d_input_grad(x.value(), w.value(), 1, pad, h, wd);
  const int32_t xid = x.id, wid = w.id;
  return tape.record(std::move(y), {x, w},
                     [=](Tape<T>& t, const TensorT<T>& g) {
                       if (t.requires_grad(xid))
                         t.accumulate(xid, kernels::conv2d_forward(
                                               g, t.value(wid), 1, pad));
                       if (t.requires_grad(wid))
                         t.accumulate(wid, kernels::conv2d_weight_grad(
                                               g, t.value(xid), 1, pad, k));
                     });
}

template <class T>
Var<T> batchnorm2d(Var<T> x, Var<T> gamma, Var<T> beta,
                   BatchNormStateT<T>& state, bool train_mode) {
  Tape<T>& tape = *x.tape;
  const int32_t xid = x.id, gid = gamma.id, bid = beta.id;
  const double eps = state.eps;
  if (train_mode) {
    TensorT<T> y, mean, var;
    kernels::batchnorm_train_forward(x.value(), gamma.value(), beta.value(),
                                     eps, y, mean, var);
    const int64_t m =
        x.value().dim(0) * x.value().dim(2) * x.value().dim(3);
    const double mom = state.momentum;
    // running update uses the unbiased batch variance
    const double bessel =
        m > 1 ? static_cast<double>(m) / static_cast<double>(m - 1) : 1.0;
    for (int64_t c = 0; c < mean.numel(); ++c) {
      state.running_mean[c] = static_cast<T>(
          (1.0 - mom) * state.running_mean[c] + mom * mean[c]);
      state.running_var[c] = static_cast<T>(
          (1.0 - mom) * state.running_var[c] + mom * var[c] * bessel);
    }
    return tape.record(
        std::move(y), {x, gamma, beta},
        [=, mean = std::move(mean), var = std::move(var)](
            Tape<T>& t, const TensorT<T>& g) {
          TensorT<T> gx, ggamma, gbeta;
          kernels::batchnorm_train_backward(t.value(xid), t.value(gid), mean,
                                            var, eps, g, gx, ggamma, gbeta);
          t.accumulate(xid, gx);
          t.accumulate(gid, ggamma);
          t.accumulate(bid, gbeta);
        });
  }
  TensorT<T> y = kernels::batchnorm_eval_forward(
      x.value(), gamma.value(), beta.value(), state.running_mean,
      state.running_var, eps);
  TensorT<T> mean = state.running_mean;
  TensorT<T> var = state.running_var;
  return tape.record(
      std::move(y), {x, gamma, beta},
      [=, mean = std::move(mean), var = std::move(var)](Tape<T>& t,
                                                        const TensorT<T>& g) {
        TensorT<T> gx, ggamma, gbeta;
        kernels::batchnorm_eval_backward(t.value(xid), t.value(gid), mean, var,
                                         eps, g, gx, ggamma, gbeta);
        t.accumulate(xid, gx);
        t.accumulate(gid, ggamma);
        t.accumulate(bid, gbeta);
      });
}

template <class T>
Var<T> relu(Var<T> x) {
  Tape<T>& tape = *x.tape;
  const int32_t xid = x.id;
  return tape.record(kernels::relu_forward(x.value()), {x},
                     [=](Tape<T>& t, const TensorT<T>& g) {
                       t.accumulate(xid,
                                    kernels::relu_backward(t.value(xid), g));
                     });
}

template <class T>
Var<T> maxpool2(Var<T> x) {
  Tape<T>& tape = *x.tape;
  std::vector<int64_t> argmax;
  TensorT<T> y = kernels::maxpool2_forward(x.value(), argmax);
  const int32_t xid = x.id;
  Shape xs = x.value().shape();
  return tape.record(std::move(y), {x},
                     [=, argmax = std::move(argmax)](Tape<T>& t,
                                                     const TensorT<T>& g) {
                       t.accumulate(
                           xid, kernels::maxpool2_backward(g, argmax, xs));
                     });
}

template <class T>
Var<T> global_avg_pool(Var<T> x) {
  Tape<T>& tape = *x.tape;
  const int32_t xid = x.id;
  Shape xs = x.value().shape();
  return tape.record(kernels::global_avg_pool_forward(x.value()), {x},
                     [=](Tape<T>& t, const TensorT<T>& g) {
                       t.accumulate(
                           xid, kernels::global_avg_pool_backward(g, xs));
                     });
}

template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  Tape<T>& tape = *x.tape;
  const int32_t xid = x.id, wid = w.id, bid = b.id;
  return tape.record(
      kernels::linear_forward(x.value(), w.value(), b.value()), {x, w, b},
      [=](Tape<T>& t, const TensorT<T>& g) {
        TensorT<T> gx, gw, gb;
        kernels::linear_backward(t.value(xid), t.value(wid), g, gx, gw, gb);
        t.accumulate(xid, gx);
        t.accumulate(wid, gw);
        t.accumulate(bid, gb);
      });
}

template <class T>
struct SoftmaxCeOut {
  Var<T> loss;            // scalar: mean over batch of -log p[label]
  TensorT<T> probs;       // [N, K], rows sum to 1
};

template <class T>
SoftmaxCeOut<T> softmax_cross_entropy(Var<T> logits,
                                      const std::vector<int>& labels) {
  Tape<T>& tape = *logits.tape;
  TensorT<T> probs = kernels::softmax_forward(logits.value());
  double loss = kernels::cross_entropy_from_probs(probs, labels);
  const int32_t lid = logits.id;
  Var<T> loss_var = tape.record(
      TensorT<T>::scalar(static_cast<T>(loss)), {logits},
      [lid, probs, labels](Tape<T>& t, const TensorT<T>& g) {
        t.accumulate(lid, kernels::softmax_ce_backward(probs, labels, g[0]));
      });
  return {loss_var, std::move(probs)};
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = *a.tape;
  if (!a.value().same_shape(b.value()))
    throw ShapeError("add shape mismatch: " + shape_str(a.value().shape()) +
                     " vs " + shape_str(b.value().shape()));
  const int32_t aid = a.id, bid = b.id;
  return tape.record(kernels::ew_add(a.value(), b.value()), {a, b},
                     [=](Tape<T>& t, const TensorT<T>& g) {
                       t.accumulate(aid, g);
                       t.accumulate(bid, g);
                     });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& tape = *a.tape;
  if (!a.value().same_shape(b.value()))
    throw ShapeError("sub shape mismatch: " + shape_str(a.value().shape()) +
                     " vs " + shape_str(b.value().shape()));
  const int32_t aid = a.id, bid = b.id;
  return tape.record(kernels::ew_sub(a.value(), b.value()), {a, b},
                     [=](Tape<T>& t, const TensorT<T>& g) {
                       t.accumulate(aid, g);
                       t.accumulate(bid, kernels::ew_neg(g));
                     });
}

// y[n,c,h,w] = alpha[c] * x[n,c,h,w]
template <class T>
Var<T> channel_scale(Var<T> x, Var<T> alpha) {
  Tape<T>& tape = *x.tape;
  const int32_t xid = x.id, aid = alpha.id;
  return tape.record(
      kernels::channel_scale_forward(x.value(), alpha.value()), {x, alpha},
      [=](Tape<T>& t, const TensorT<T>& g) {
        TensorT<T> gx, galpha;
        kernels::channel_scale_backward(t.value(xid), t.value(aid), g, gx,
                                        galpha);
        t.accumulate(xid, gx);
        t.accumulate(aid, galpha);
      });
}

template <class T>
Var<T> sum(Var<T> x) {
  Tape<T>& tape = *x.tape;
  double s = 0.0;
  for (int64_t i = 0; i < x.value().numel(); ++i) s += x.value()[i];
  const int32_t xid = x.id;
  Shape xs = x.value().shape();
  return tape.record(TensorT<T>::scalar(static_cast<T>(s)), {x},
                     [=](Tape<T>& t, const TensorT<T>& g) {
                       t.accumulate(xid, TensorT<T>::full(xs, g[0]));
                     });
}

// 0.5 * sum(x^2); the layer-wise prediction loss applied to an error map.
template <class T>
Var<T> half_squared_norm(Var<T> x) {
  Tape<T>& tape = *x.tape;
  double s = 0.0;
  for (int64_t i = 0; i < x.value().numel(); ++i)
    s += 0.5 * static_cast<double>(x.value()[i]) * x.value()[i];
  const int32_t xid = x.id;
  return tape.record(TensorT<T>::scalar(static_cast<T>(s)), {x},
                     [=](Tape<T>& t, const TensorT<T>& g) {
                       const TensorT<T>& xv = t.value(xid);
                       TensorT<T> gx(xv.shape());
                       for (int64_t i = 0; i < gx.numel(); ++i)
                         gx[i] = g[0] * xv[i];
                       t.accumulate(xid, gx);
                     });
}

// <x, c> with a constant c; a generic scalar probe for gradient checks.
template <class T>
Var<T> dot(Var<T> x, TensorT<T> c) {
  Tape<T>& tape = *x.tape;
  if (!x.value().same_shape(c))
    throw ShapeError("dot shape mismatch");
  double s = 0.0;
  for (int64_t i = 0; i < c.numel(); ++i)
    s += static_cast<double>(x.value()[i]) * c[i];
  const int32_t xid = x.id;
  return tape.record(TensorT<T>::scalar(static_cast<T>(s)), {x},
                     [=, c = std::move(c)](Tape<T>& t, const TensorT<T>& g) {
                       TensorT<T> gx(c.shape());
                       for (int64_t i = 0; i < gx.numel(); ++i)
                         gx[i] = g[0] * c[i];
                       t.accumulate(xid, gx);
                     });
}

}  // namespace ops
}  // namespace pcn
