#include <doctest.h>

#include "pcn/block.hpp"
#include "pcn/model.hpp"
#include "pcn/rng.hpp"
#include "support/reference_ops.hpp"

using namespace pcn;

namespace {

// Small random block (C_in=3, C_out=4) shared by several cases.
PcBlockParamsT<float> small_block(uint64_t seed, bool pool) {
  Rng rng(seed);
  PcBlockParamsT<float> p;
  p.ff = rng.normal_tensor<float>({4, 3, 3, 3}, 0.3);
  p.fb = rng.normal_tensor<float>({4, 3, 3, 3}, 0.3);
  p.bp = rng.normal_tensor<float>({4, 3, 1, 1}, 0.5);
  p.alpha = tensor_full<float>({4}, 0.1f);
  p.bn = BatchNormState::make(3);
  p.pool_after = pool;
  return p;
}

Tensor run_block(PcBlockParamsT<float>& p, const Tensor& x, int cycles,
                 BlockTrace* trace = nullptr) {
  Tape<float> tape;
  tape.grad_enabled = false;
  PcBlockVars<float> v = bind_block(tape, p, false);
  Var<float> xin = tape.leaf(x, false);
  return pc_block_forward(xin, v, p, cycles, false, trace).value();
}

}  // namespace

TEST_CASE("scalar recursion by hand") {
  // 1x1 spatial, C_in = C_out = 1; only the kernel centers touch the input.
  PcBlockParamsT<float> p;
  p.ff = Tensor({1, 1, 3, 3});
  p.ff[4] = 0.5f;  // center tap
  p.fb = Tensor({1, 1, 3, 3});
  p.fb[4] = 1.0f;
  p.bp = Tensor({1, 1, 1, 1});  // zero bypass keeps y = r(T)
  p.alpha = tensor_full<float>({1}, 0.2f);
  p.bn = BatchNormState::make(1);
  p.bn.eps = 0.0;  // eval stats (mean 0, var 1) pass x through untouched
  p.pool_after = false;

  Tensor x = tensor_full<float>({1, 1, 1, 1}, 1.0f);

  BlockTrace trace;
  Tensor y = run_block(p, x, 1, &trace);
  // r0 = relu(0.5*1) = 0.5; p = 0.5; e = relu(1-0.5) = 0.5;
  // r1 = 0.5 + 0.2*(0.5*0.5) = 0.55
  CHECK(trace.r[0][0] == doctest::Approx(0.5f));
  CHECK(trace.p[0][0] == doctest::Approx(0.5f));
  CHECK(trace.e[0][0] == doctest::Approx(0.5f));
  CHECK(trace.r[1][0] == doctest::Approx(0.55f));
  CHECK(y[0] == doctest::Approx(0.55f));
}

TEST_CASE("alpha = 0 freezes the recursion for any T") {
  PcBlockParamsT<float> p = small_block(51, false);
  p.alpha = Tensor({4});  // zeros
  Rng rng(52);
  Tensor x = rng.uniform_tensor<float>({2, 3, 6, 6}, -1, 1);
  Tensor y0 = run_block(p, x, 0);
  for (int cycles : {1, 3, 5}) {
    Tensor yt = run_block(p, x, cycles);
    CHECK(testing::max_abs_diff(y0, yt) == 0.0);
  }
}

TEST_CASE("T=0 equals the plain composition relu(ff(bn)) + bp(bn)") {
  PcBlockParamsT<float> p = small_block(53, false);
  Rng rng(54);
  Tensor x = rng.uniform_tensor<float>({2, 3, 6, 6}, -1, 1);
  Tensor y = run_block(p, x, 0);

  Tensor x_bn = kernels::batchnorm_eval_forward(
      x, p.bn.gamma, p.bn.beta, p.bn.running_mean, p.bn.running_var, p.bn.eps);
  Tensor expect = kernels::relu_forward(kernels::conv2d_forward(x_bn, p.ff, 1, 1));
  Tensor bypass = kernels::conv2d_forward(x_bn, p.bp, 1, 0);
  for (int64_t i = 0; i < expect.numel(); ++i) expect[i] += bypass[i];
  CHECK(testing::max_abs_diff(y, expect) < 1e-6);
}

TEST_CASE("trace lengths and rectified errors") {
  PcBlockParamsT<float> p = small_block(55, false);
  Rng rng(56);
  Tensor x = rng.uniform_tensor<float>({2, 3, 6, 6}, -1, 1);
  BlockTrace trace;
  const int cycles = 4;
  run_block(p, x, cycles, &trace);
  CHECK(trace.r.size() == cycles + 1);
  CHECK(trace.p.size() == cycles);
  CHECK(trace.e.size() == cycles);
  for (const auto& e : trace.e)
    for (int64_t i = 0; i < e.numel(); ++i) CHECK(e[i] >= 0.0f);
  // spatial shape preserved at every step
  for (const auto& r : trace.r) {
    CHECK(r.dim(2) == 6);
    CHECK(r.dim(3) == 6);
  }
}

TEST_CASE("prediction_loss") {
  Tensor zero({4});
  CHECK(prediction_loss(zero) == 0.0);
  Tensor e({2});
  e[0] = 1.0f;
  e[1] = 1.0f;
  CHECK(prediction_loss(e) == doctest::Approx(1.0));
}

TEST_CASE("clamp_alpha projects negatives to zero") {
  PcBlockParamsT<float> p = small_block(57, false);
  p.alpha[0] = -0.1f;
  p.alpha[1] = 0.2f;
  p.alpha[2] = -1e-9f;
  clamp_alpha(p);
  CHECK(p.alpha[0] == 0.0f);
  CHECK(p.alpha[1] == 0.2f);
  CHECK(p.alpha[2] == 0.0f);
  Tensor before = p.alpha;
  clamp_alpha(p);  // already non-negative: unchanged
  CHECK(testing::max_abs_diff(before, p.alpha) == 0.0);
}

TEST_CASE("gradient flows through the feedback kernel only when T >= 1") {
  for (int cycles : {0, 2}) {
    PcBlockParamsT<float> p = small_block(58, false);
    Rng rng(59);
    Tensor x = rng.uniform_tensor<float>({2, 3, 6, 6}, -1, 1);
    Tape<float> tape;
    PcBlockVars<float> v = bind_block(tape, p, true);
    Var<float> xin = tape.leaf(x, false);
    Var<float> y = pc_block_forward(xin, v, p, cycles, true);
    tape.backward(ops::half_squared_norm(y));
    const Tensor& gfb = tape.grad(v.fb.id);
    double norm = 0;
    for (int64_t i = 0; i < gfb.numel(); ++i)
      norm += std::abs(static_cast<double>(gfb[i]));
    if (cycles == 0)
      CHECK(norm == 0.0);
    else
      CHECK(norm > 1e-6);
  }
}

TEST_CASE("block forward is bit-deterministic") {
  PcBlockParamsT<float> p = small_block(60, true);
  Rng rng(61);
  Tensor x = rng.uniform_tensor<float>({2, 3, 8, 8}, -1, 1);
  Tensor y1 = run_block(p, x, 3);
  Tensor y2 = run_block(p, x, 3);
  CHECK(testing::max_abs_diff(y1, y2) == 0.0);
}

TEST_CASE("negative cycle count is rejected") {
  PcBlockParamsT<float> p = small_block(62, false);
  Tape<float> tape;
  PcBlockVars<float> v = bind_block(tape, p, false);
  Var<float> xin = tape.leaf(Tensor({2, 3, 6, 6}), false);
  CHECK_THROWS_AS(pc_block_forward(xin, v, p, -1, false), ContractError);
}

TEST_CASE("channel mismatch is rejected") {
  PcBlockParamsT<float> p = small_block(63, false);
  Tape<float> tape;
  PcBlockVars<float> v = bind_block(tape, p, false);
  Var<float> xin = tape.leaf(Tensor({2, 5, 6, 6}), false);
  CHECK_THROWS_AS(pc_block_forward(xin, v, p, 1, false), ShapeError);
}
