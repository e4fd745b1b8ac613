#pragma once

#include <vector>

#include "pcn/ops.hpp"

namespace pcn {

// Learnables of one recurrent block: feedforward 3x3 kernel (C_in -> C_out),
// feedback 3x3 kernel used as a transposed convolution (C_out -> C_in), 1x1
// bypass kernel, one non-negative update rate per output filter, and the
// batch norm applied to the block input. Plain blocks carry no fb/alpha.
template <class T>
struct PcBlockParamsT {
  TensorT<T> ff;      // [C_out, C_in, 3, 3]
  TensorT<T> fb;      // [C_out, C_in, 3, 3]; empty for plain blocks
  TensorT<T> bp;      // [C_out, C_in, 1, 1]
  TensorT<T> alpha;   // [C_out]; empty for plain blocks
  BatchNormStateT<T> bn;  // over C_in
  bool pool_after = false;

  int64_t c_in() const { return ff.dim(1); }
  int64_t c_out() const { return ff.dim(0); }
  bool has_feedback() const { return !fb.empty(); }
};

using PcBlockParams = PcBlockParamsT<float>;

// alpha := max(alpha, 0); called after every optimizer step.
template <class T>
void clamp_alpha(PcBlockParamsT<T>& params) {
  for (int64_t i = 0; i < params.alpha.numel(); ++i)
    if (params.alpha[i] < T(0)) params.alpha[i] = T(0);
}

// Tape handles of one block's learnables for the current pass.
template <class T>
struct PcBlockVars {
  Var<T> ff, fb, bp, alpha, gamma, beta;
};

template <class T>
PcBlockVars<T> bind_block(Tape<T>& tape, PcBlockParamsT<T>& p,
                          bool requires_grad) {
  PcBlockVars<T> v;
  v.ff = tape.leaf(p.ff, requires_grad);
  if (p.has_feedback()) {
    v.fb = tape.leaf(p.fb, requires_grad);
    v.alpha = tape.leaf(p.alpha, requires_grad);
  }
  v.bp = tape.leaf(p.bp, requires_grad);
  v.gamma = tape.leaf(p.bn.gamma, requires_grad);
  v.beta = tape.leaf(p.bn.beta, requires_grad);
  return v;
}

// Per-cycle intermediates of one block forward: r has cycles+1 entries,
// p and e have cycles entries; e is rectified, so e >= 0 elementwise.
template <class T>
struct BlockTraceT {
  std::vector<TensorT<T>> r, p, e;
  std::vector<Var<T>> r_vars;  // handles to r(t); grads readable after backward
};

using BlockTrace = BlockTraceT<float>;

// One PcConv block:
//   x_bn = BN(x)
//   r(0) = ReLU(FFConv(x_bn))
//   for t = 1..cycles:
//     p = FBConv^T(r(t-1));  e = ReLU(x_bn - p);  r(t) = r(t-1) + alpha.FFConv(e)
//   y = r(cycles) + BPConv(x_bn), then 2x2 maxpool if pool_after.
// The same ff kernel drives both the initial response and the error updates.
template <class T>
Var<T> pc_block_forward(Var<T> x, const PcBlockVars<T>& vars,
                        PcBlockParamsT<T>& params, int cycles, bool train_mode,
                        BlockTraceT<T>* trace = nullptr) {
  if (cycles < 0) throw ContractError("cycle count must be >= 0");
  if (x.value().dim(1) != params.c_in())
    throw ShapeError("block expects " + std::to_string(params.c_in()) +
                     " input channels, got " +
                     std::to_string(x.value().dim(1)));
  if (cycles > 0 && !params.has_feedback())
    throw ContractError("plain block cannot run recurrent cycles");

  Var<T> x_bn = ops::batchnorm2d(x, vars.gamma, vars.beta, params.bn, train_mode);
  Var<T> r = ops::relu(ops::conv2d(x_bn, vars.ff, 1, 1));
  if (trace) {
    trace->r.push_back(r.value());
    trace->r_vars.push_back(r);
  }
  for (int t = 1; t <= cycles; ++t) {
    Var<T> p = ops::conv_transpose2d(r, vars.fb);
    Var<T> e = ops::relu(ops::sub(x_bn, p));
    Var<T> update = ops::channel_scale(ops::conv2d(e, vars.ff, 1, 1), vars.alpha);
    r = ops::add(r, update);
    if (trace) {
      trace->p.push_back(p.value());
      trace->e.push_back(e.value());
      trace->r.push_back(r.value());
      trace->r_vars.push_back(r);
    }
  }
  Var<T> y = ops::add(r, ops::conv2d(x_bn, vars.bp, 1, 0));
  if (params.pool_after) y = ops::maxpool2(y);
  return y;
}

// Eq.-style layer-wise objective: 0.5 * sum(e^2) over a rectified error map.
template <class T>
double prediction_loss(const TensorT<T>& e) {
  double s = 0.0;
  for (int64_t i = 0; i < e.numel(); ++i)
    s += 0.5 * static_cast<double>(e[i]) * e[i];
  return s;
}

}  // namespace pcn
