#include <doctest.h>

#include "pcn/kernels.hpp"
#include "pcn/ops.hpp"
#include "pcn/rng.hpp"
#include "support/reference_ops.hpp"

using namespace pcn;
namespace ref = pcn::testing;

TEST_CASE("conv2d: all-ones 3x3 instance") {
  Tensor x = tensor_full<float>({1, 1, 3, 3}, 1.0f);
  Tensor w = tensor_full<float>({1, 1, 3, 3}, 1.0f);
  Tensor y = kernels::conv2d_forward(x, w, 1, 1);
  const float expect[9] = {4, 6, 4, 6, 9, 6, 4, 6, 4};
  for (int i = 0; i < 9; ++i) CHECK(y[i] == doctest::Approx(expect[i]));
}

TEST_CASE("conv2d: 1x1 identity kernel") {
  Rng rng(5);
  Tensor x = rng.uniform_tensor<float>({2, 1, 4, 4}, -1, 1);
  Tensor w = tensor_full<float>({1, 1, 1, 1}, 1.0f);
  Tensor y = kernels::conv2d_forward(x, w, 1, 0);
  CHECK(ref::max_abs_diff(x, y) == 0.0);
}

TEST_CASE("conv2d matches the naive reference on random instances") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    int64_t n = 1 + rng.below(4), ci = 1 + rng.below(8);
    int64_t co = 1 + rng.below(8);
    int64_t h = 2 + rng.below(15), w = 2 + rng.below(15);
    int64_t k = rng.coin() ? 3 : 1;
    int64_t pad = k == 3 ? 1 : 0;
    auto x = rng.uniform_tensor<float>({n, ci, h, w}, -1, 1);
    auto ker = rng.uniform_tensor<float>({co, ci, k, k}, -1, 1);
    Tensor fast = kernels::conv2d_forward(x, ker, 1, pad);
    Tensor slow = ref::naive_conv2d(x, ker, 1, pad);
    CHECK(ref::max_abs_diff(fast, slow) < 1e-5);
  }
  // f64 at tighter tolerance
  for (int trial = 0; trial < 10; ++trial) {
    auto x = rng.uniform_tensor<double>({2, 5, 9, 7}, -1, 1);
    auto ker = rng.uniform_tensor<double>({4, 5, 3, 3}, -1, 1);
    auto fast = kernels::conv2d_forward(x, ker, 1, 1);
    auto slow = ref::naive_conv2d(x, ker, 1, 1);
    CHECK(ref::max_abs_diff(fast, slow) < 1e-10);
  }
}

TEST_CASE("conv2d stride-2 7x7 stem geometry matches naive") {
  Rng rng(13);
  auto x = rng.uniform_tensor<float>({2, 3, 17, 16}, -1, 1);
  auto ker = rng.uniform_tensor<float>({4, 3, 7, 7}, -0.3, 0.3);
  Tensor fast = kernels::conv2d_forward(x, ker, 2, 3);
  Tensor slow = ref::naive_conv2d(x, ker, 2, 3);
  CHECK(fast.dim(2) == 9);  // floor((17+6-7)/2)+1
  CHECK(fast.dim(3) == 8);
  CHECK(ref::max_abs_diff(fast, slow) < 1e-5);
}

TEST_CASE("conv2d rejects bad geometry") {
  Tensor x({1, 3, 4, 4});
  CHECK_THROWS_AS(kernels::conv2d_forward(x, Tensor({2, 4, 3, 3}), 1, 1),
                  ShapeError);
  CHECK_THROWS_AS(kernels::conv2d_forward(x, Tensor({2, 3, 3, 3}), 1, -1),
                  ContractError);
  // output would be empty
  CHECK_THROWS_AS(kernels::conv2d_forward(Tensor({1, 3, 2, 2}),
                                          Tensor({2, 3, 7, 7}), 1, 0),
                  ShapeError);
}

TEST_CASE("conv_transpose2d: all-ones instance mirrors the conv example") {
  Tensor x = tensor_full<float>({1, 1, 3, 3}, 1.0f);
  Tensor w = tensor_full<float>({1, 1, 3, 3}, 1.0f);
  TensorT<float> y = kernels::conv2d_input_grad(x, w, 1, 1, 3, 3);
  const float expect[9] = {4, 6, 4, 6, 9, 6, 4, 6, 4};
  for (int i = 0; i < 9; ++i) CHECK(y[i] == doctest::Approx(expect[i]));
}

TEST_CASE("conv_transpose2d equals its direct-summation reference") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    int64_t ca = 1 + rng.below(6), cb = 1 + rng.below(6);
    auto x = rng.uniform_tensor<float>({2, ca, 6, 5}, -1, 1);
    auto w = rng.uniform_tensor<float>({ca, cb, 3, 3}, -1, 1);
    Tensor fast = kernels::conv2d_input_grad(x, w, 1, 1, 6, 5);
    Tensor slow = ref::naive_conv_transpose2d(x, w);
    CHECK(ref::max_abs_diff(fast, slow) < 1e-5);
  }
}

TEST_CASE("conv_transpose2d is the exact adjoint of conv2d") {
  Rng rng(19);
  for (int seed = 0; seed < 10; ++seed) {
    Rng r(mix_seed(19, seed));
    int64_t ci = 1 + r.below(5), co = 1 + r.below(5);
    int64_t h = 3 + r.below(6), w = 3 + r.below(6);
    auto x = r.uniform_tensor<float>({2, ci, h, w}, -1, 1);
    auto ker = r.uniform_tensor<float>({co, ci, 3, 3}, -1, 1);
    auto y = r.uniform_tensor<float>({2, co, h, w}, -1, 1);
    Tensor cx = kernels::conv2d_forward(x, ker, 1, 1);
    Tensor cty = kernels::conv2d_input_grad(y, ker, 1, 1, h, w);
    double lhs = ref::inner(cx, y);
    double rhs = ref::inner(x, cty);
    CHECK(std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs)}) < 1e-5);
  }
}

TEST_CASE("conv_transpose2d rejects unsupported geometry") {
  Tape<float> t;
  auto x = t.leaf(Tensor({1, 2, 4, 4}), false);
  auto w = t.leaf(Tensor({2, 3, 2, 2}), false);
  CHECK_THROWS_AS(ops::conv_transpose2d(x, w), ConfigError);
}

TEST_CASE("batchnorm train mode: constant input collapses to beta") {
  Tensor x = tensor_full<float>({2, 2, 3, 3}, 5.0f);
  Tensor gamma = tensor_full<float>({2}, 1.0f);
  Tensor beta({2});
  Tensor y, mean, var;
  kernels::batchnorm_train_forward(x, gamma, beta, 1e-5, y, mean, var);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(std::abs(y[i]) < 1e-3);

  // gamma = 0 -> output == beta broadcast
  Tensor g0({2});
  Tensor beta2({2});
  beta2[0] = 1.5f;
  beta2[1] = -0.5f;
  Rng rng(23);
  Tensor xr = rng.uniform_tensor<float>({2, 2, 3, 3}, -1, 1);
  kernels::batchnorm_train_forward(xr, g0, beta2, 1e-5, y, mean, var);
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t c = 0; c < 2; ++c)
      for (int64_t i = 0; i < 9; ++i)
        CHECK(y[(n * 2 + c) * 9 + i] == doctest::Approx(beta2[c]));
}

TEST_CASE("batchnorm train mode normalizes to zero mean unit variance") {
  Rng rng(29);
  Tensor x = rng.uniform_tensor<float>({4, 3, 8, 8}, -2, 3);
  Tensor gamma = tensor_full<float>({3}, 1.0f);
  Tensor beta({3});
  Tensor y, mean, var;
  kernels::batchnorm_train_forward(x, gamma, beta, 1e-8, y, mean, var);
  const int64_t m = 4 * 64;
  for (int64_t c = 0; c < 3; ++c) {
    double sum = 0, sq = 0;
    for (int64_t n = 0; n < 4; ++n)
      for (int64_t i = 0; i < 64; ++i) {
        float v = y[(n * 3 + c) * 64 + i];
        sum += v;
        sq += static_cast<double>(v) * v;
      }
    CHECK(std::abs(sum / m) < 1e-4);
    CHECK(std::abs(sq / m - 1.0) < 1e-4);
  }
}

TEST_CASE("batchnorm rejects degenerate train batches") {
  Tensor x({1, 2, 1, 1});
  Tensor gamma = tensor_full<float>({2}, 1.0f);
  Tensor beta({2});
  Tensor y, mean, var;
  CHECK_THROWS_AS(
      kernels::batchnorm_train_forward(x, gamma, beta, 1e-5, y, mean, var),
      ContractError);
}

TEST_CASE("relu basics") {
  Tensor x({3});
  x[0] = -1;
  x[1] = 0;
  x[2] = 2;
  Tensor y = kernels::relu_forward(x);
  CHECK(y[0] == 0);
  CHECK(y[1] == 0);
  CHECK(y[2] == 2);
  Tensor all_neg = tensor_full<float>({2, 2}, -3.0f);
  Tensor z = kernels::relu_forward(all_neg);
  for (int64_t i = 0; i < 4; ++i) CHECK(z[i] == 0.0f);
  // idempotence
  Rng rng(31);
  Tensor r = rng.uniform_tensor<float>({64}, -1, 1);
  Tensor once = kernels::relu_forward(r);
  Tensor twice = kernels::relu_forward(once);
  CHECK(ref::max_abs_diff(once, twice) == 0.0);
}

TEST_CASE("maxpool2 basics and brute-force equivalence") {
  Tensor x({1, 1, 2, 2});
  x[0] = 1;
  x[1] = 2;
  x[2] = 3;
  x[3] = 4;
  std::vector<int64_t> am;
  Tensor y = kernels::maxpool2_forward(x, am);
  CHECK(y.numel() == 1);
  CHECK(y[0] == 4.0f);

  Tensor c = tensor_full<float>({2, 3, 4, 4}, 2.5f);
  Tensor yc = kernels::maxpool2_forward(c, am);
  CHECK(yc.shape() == Shape{2, 3, 2, 2});
  for (int64_t i = 0; i < yc.numel(); ++i) CHECK(yc[i] == 2.5f);

  Rng rng(37);
  Tensor r = rng.uniform_tensor<float>({1, 1, 4, 4}, -1, 1);
  Tensor fast = kernels::maxpool2_forward(r, am);
  Tensor slow = ref::naive_maxpool2(r);
  CHECK(ref::max_abs_diff(fast, slow) == 0.0);

  CHECK_THROWS_AS(kernels::maxpool2_forward(Tensor({1, 1, 3, 4}), am),
                  ShapeError);
}

TEST_CASE("maxpool2 ties route to the first element in scan order") {
  Tensor x = tensor_full<float>({1, 1, 2, 2}, 1.0f);
  std::vector<int64_t> am;
  kernels::maxpool2_forward(x, am);
  CHECK(am[0] == 0);
}

TEST_CASE("global_avg_pool") {
  Tensor x({1, 1, 2, 2});
  x[0] = 1;
  x[1] = 2;
  x[2] = 3;
  x[3] = 4;
  Tensor y = kernels::global_avg_pool_forward(x);
  CHECK(y[0] == doctest::Approx(2.5f));

  Tensor one({1, 3, 1, 1});
  one[0] = 5;
  one[1] = -1;
  one[2] = 0.25;
  Tensor y1 = kernels::global_avg_pool_forward(one);
  for (int64_t i = 0; i < 3; ++i) CHECK(y1[i] == one[i]);

  Rng rng(41);
  Tensor r = rng.uniform_tensor<float>({2, 4, 5, 5}, -1, 1);
  Tensor yr = kernels::global_avg_pool_forward(r);
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t c = 0; c < 4; ++c) {
      double s = 0;
      for (int64_t i = 0; i < 25; ++i) s += r[(n * 4 + c) * 25 + i];
      CHECK(std::abs(yr[n * 4 + c] - s / 25) < 1e-6);
    }
}

TEST_CASE("linear") {
  // identity weights, zero bias
  Tensor x({2, 3});
  for (int64_t i = 0; i < 6; ++i) x[i] = static_cast<float>(i);
  Tensor w({3, 3});
  w[0] = w[4] = w[8] = 1.0f;
  Tensor b({3});
  Tensor y = kernels::linear_forward(x, w, b);
  CHECK(ref::max_abs_diff(x, Tensor({2, 3}, {y[0], y[1], y[2], y[3], y[4], y[5]})) == 0.0);

  // zero input -> rows equal bias
  Tensor x0({2, 3});
  Tensor b2({2});
  b2[0] = 3;
  b2[1] = -1;
  Tensor w2({2, 3});
  Tensor yb = kernels::linear_forward(x0, w2, b2);
  CHECK(yb[0] == 3.0f);
  CHECK(yb[1] == -1.0f);
  CHECK(yb[2] == 3.0f);
  CHECK(yb[3] == -1.0f);

  // random case vs explicit dots
  Rng rng(43);
  Tensor xr = rng.uniform_tensor<float>({3, 7}, -1, 1);
  Tensor wr = rng.uniform_tensor<float>({4, 7}, -1, 1);
  Tensor br = rng.uniform_tensor<float>({4}, -1, 1);
  Tensor yr = kernels::linear_forward(xr, wr, br);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 4; ++j) {
      double s = br[j];
      for (int64_t t = 0; t < 7; ++t) s += static_cast<double>(xr[i * 7 + t]) * wr[j * 7 + t];
      CHECK(std::abs(yr[i * 4 + j] - s) < 1e-6);
    }

  CHECK_THROWS_AS(kernels::linear_forward(xr, Tensor({4, 6}), br), ShapeError);
}

TEST_CASE("softmax cross entropy: uniform logits give ln K") {
  Tensor logits({2, 10});
  Tensor probs = kernels::softmax_forward(logits);
  double loss = kernels::cross_entropy_from_probs(probs, {3, 7});
  CHECK(loss == doctest::Approx(std::log(10.0)).epsilon(1e-6));
  CHECK(std::abs(loss - 2.302585) < 1e-5);
}

TEST_CASE("softmax cross entropy: dominant logit drives loss to zero") {
  Tensor logits({1, 2});
  logits[0] = 100.0f;
  logits[1] = 0.0f;
  Tensor probs = kernels::softmax_forward(logits);
  double loss = kernels::cross_entropy_from_probs(probs, {0});
  CHECK(loss < 1e-6);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(47);
  Tensor logits = rng.uniform_tensor<float>({8, 13}, -30, 30);
  Tensor probs = kernels::softmax_forward(logits);
  for (int64_t i = 0; i < 8; ++i) {
    double s = 0;
    for (int64_t j = 0; j < 13; ++j) s += probs[i * 13 + j];
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("out-of-range labels are rejected") {
  Tensor logits({1, 3});
  Tensor probs = kernels::softmax_forward(logits);
  CHECK_THROWS_AS(kernels::cross_entropy_from_probs(probs, {3}), ContractError);
  CHECK_THROWS_AS(kernels::cross_entropy_from_probs(probs, {-1}),
                  ContractError);
}
