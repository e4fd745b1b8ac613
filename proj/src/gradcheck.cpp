#include "pcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pcn/block.hpp"
#include "pcn/ops.hpp"
#include "pcn/rng.hpp"

namespace pcn {

TensorD finite_diff_grad(const ScalarFn& f, const TensorD& x, double eps) {
  if (eps <= 0.0) throw ContractError("finite_diff_grad requires eps > 0");
  TensorD g(x.shape());
  TensorD probe = x;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double v = x[i];
    probe[i] = v + eps;
    double hi = f(probe);
    probe[i] = v - eps;
    double lo = f(probe);
    probe[i] = v;
    g[i] = (hi - lo) / (2.0 * eps);
  }
  return g;
}

double guarded_rel_err(double analytic, double numeric) {
  double denom = std::max({1e-3, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

double GradcheckReport::worst() const {
  double w = 0.0;
  for (const auto& c : checks) w = std::max(w, c.worst);
  return w;
}

const std::string& GradcheckReport::worst_name() const {
  static const std::string none = "(none)";
  const std::string* name = &none;
  double w = -1.0;
  for (const auto& c : checks) {
    if (c.worst > w) {
      w = c.worst;
      name = &c.name;
    }
  }
  return *name;
}

namespace {

constexpr double kEps = 1e-5;

// One op instance: base inputs, a pure scalar evaluation, and the tape-based
// gradients to test. The evaluation path never touches backward kernels, so
// the two routes stay independent.
struct FdCase {
  std::vector<TensorD> inputs;
  std::function<double(const std::vector<TensorD>&)> loss;
  std::function<std::vector<TensorD>(const std::vector<TensorD>&)> grads;
};

// Central difference of one coordinate with kink detection: returns false
// (and skips the comparison) when the two probe evaluations took different
// relu/argmax branches, i.e. the interval contains a non-differentiable
// point and the difference quotient is not a derivative estimate.
bool probed_fd(const std::function<double()>& eval, double& slot, double v,
               double eps, double& fd_out) {
  kernels::BranchTraceScope scope;
  slot = v + eps;
  kernels::reset_branch_signature();
  double hi = eval();
  uint64_t sig_hi = kernels::branch_signature();
  slot = v - eps;
  kernels::reset_branch_signature();
  double lo = eval();
  uint64_t sig_lo = kernels::branch_signature();
  slot = v;
  if (sig_hi != sig_lo) return false;
  fd_out = (hi - lo) / (2.0 * eps);
  return true;
}

void run_case(const FdCase& c, GradCheck& chk) {
  std::vector<TensorD> analytic = c.grads(c.inputs);
  std::vector<TensorD> probe = c.inputs;
  auto eval = [&]() { return c.loss(probe); };
  for (size_t i = 0; i < c.inputs.size(); ++i) {
    for (int64_t j = 0; j < c.inputs[i].numel(); ++j) {
      double fd = 0.0;
      if (!probed_fd(eval, probe[i][j], c.inputs[i][j], kEps, fd)) {
        ++chk.skipped;
        continue;
      }
      chk.worst = std::max(chk.worst, guarded_rel_err(analytic[i][j], fd));
    }
  }
}

TensorD nudge_off_zero(TensorD t, double margin) {
  for (int64_t i = 0; i < t.numel(); ++i) {
    if (std::fabs(t[i]) < margin) t[i] += t[i] >= 0 ? 2 * margin : -2 * margin;
  }
  return t;
}

// Builds a tape over `inputs` (all requiring grad), applies `apply` to get a
// scalar var, and hands back per-input grads (or the scalar loss value).
template <class Apply>
FdCase make_case(std::vector<TensorD> inputs, Apply apply) {
  FdCase c;
  c.inputs = std::move(inputs);
  c.loss = [apply](const std::vector<TensorD>& ins) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : ins) vars.push_back(tape.leaf(t, false));
    tape.grad_enabled = false;
    return static_cast<double>(apply(tape, vars).value()[0]);
  };
  c.grads = [apply](const std::vector<TensorD>& ins) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : ins) vars.push_back(tape.leaf(t, true));
    Var<double> loss = apply(tape, vars);
    tape.backward(loss);
    std::vector<TensorD> out;
    for (auto& v : vars) out.push_back(tape.grad(v.id));
    return out;
  };
  return c;
}

}  // namespace

GradcheckReport gradcheck_ops(uint64_t base_seed, int seeds) {
  GradcheckReport report;
  auto add = [&](const std::string& name,
                 const std::function<FdCase(Rng&)>& build) {
    GradCheck chk{name, 0.0, 0};
    for (int s = 0; s < seeds; ++s) {
      Rng rng(mix_seed(base_seed, 7777 + s));
      FdCase c = build(rng);
      run_case(c, chk);
    }
    report.checks.push_back(chk);
  };

  auto u = [](Rng& rng, Shape shape) {
    return rng.uniform_tensor<double>(std::move(shape), -1.0, 1.0);
  };
  // fixed probe directions keep the scalar loss sensitive to every output
  auto probe = [](Rng& rng, const TensorD& y) {
    return rng.uniform_tensor<double>(y.shape(), -1.0, 1.0);
  };

  add("conv2d_3x3", [&](Rng& rng) {
    auto x = u(rng, {2, 3, 5, 5});
    auto w = u(rng, {4, 3, 3, 3});
    auto c = probe(rng, kernels::conv2d_forward(x, w, 1, 1));
    return make_case({x, w}, [c](Tape<double>& t, auto& v) {
      return ops::dot(ops::conv2d(v[0], v[1], 1, 1), c);
    });
  });
  add("conv2d_1x1", [&](Rng& rng) {
    auto x = u(rng, {2, 3, 5, 5});
    auto w = u(rng, {4, 3, 1, 1});
    auto c = probe(rng, kernels::conv2d_forward(x, w, 1, 0));
    return make_case({x, w}, [c](Tape<double>& t, auto& v) {
      return ops::dot(ops::conv2d(v[0], v[1], 1, 0), c);
    });
  });
  add("conv2d_7x7_s2", [&](Rng& rng) {
    auto x = u(rng, {1, 3, 9, 9});
    auto w = u(rng, {2, 3, 7, 7});
    auto c = probe(rng, kernels::conv2d_forward(x, w, 2, 3));
    return make_case({x, w}, [c](Tape<double>& t, auto& v) {
      return ops::dot(ops::conv2d(v[0], v[1], 2, 3), c);
    });
  });
  add("conv_transpose2d_3x3", [&](Rng& rng) {
    auto x = u(rng, {2, 4, 5, 5});
    auto w = u(rng, {4, 3, 3, 3});
    auto c = probe(rng, kernels::conv2d_input_grad(x, w, 1, 1, 5, 5));
    return make_case({x, w}, [c](Tape<double>& t, auto& v) {
      return ops::dot(ops::conv_transpose2d(v[0], v[1]), c);
    });
  });
  add("conv_transpose2d_1x1", [&](Rng& rng) {
    auto x = u(rng, {2, 4, 5, 5});
    auto w = u(rng, {4, 3, 1, 1});
    auto c = probe(rng, kernels::conv2d_input_grad(x, w, 1, 0, 5, 5));
    return make_case({x, w}, [c](Tape<double>& t, auto& v) {
      return ops::dot(ops::conv_transpose2d(v[0], v[1]), c);
    });
  });
  add("batchnorm2d_train", [&](Rng& rng) {
    auto x = u(rng, {3, 4, 3, 3});
    auto gamma = rng.uniform_tensor<double>({4}, 0.5, 1.5);
    auto beta = u(rng, {4});
    TensorD y;
    {
      TensorD mean, var, yy;
      kernels::batchnorm_train_forward(x, gamma, beta, 1e-5, yy, mean, var);
      y = yy;
    }
    auto c = probe(rng, y);
    return make_case({x, gamma, beta}, [c](Tape<double>& t, auto& v) {
      BatchNormStateT<double> st = BatchNormStateT<double>::make(4);
      return ops::dot(ops::batchnorm2d(v[0], v[1], v[2], st, true), c);
    });
  });
  add("batchnorm2d_eval", [&](Rng& rng) {
    auto x = u(rng, {3, 4, 3, 3});
    auto gamma = rng.uniform_tensor<double>({4}, 0.5, 1.5);
    auto beta = u(rng, {4});
    auto mean = u(rng, {4});
    auto var = rng.uniform_tensor<double>({4}, 0.5, 1.5);
    auto c = probe(rng, x);
    return make_case({x, gamma, beta}, [c, mean, var](Tape<double>& t, auto& v) {
      BatchNormStateT<double> st = BatchNormStateT<double>::make(4);
      st.running_mean = mean;
      st.running_var = var;
      return ops::dot(ops::batchnorm2d(v[0], v[1], v[2], st, false), c);
    });
  });
  add("relu", [&](Rng& rng) {
    auto x = nudge_off_zero(u(rng, {2, 3, 4, 4}), 1e-3);
    auto c = probe(rng, x);
    return make_case({x}, [c](Tape<double>& t, auto& v) {
      return ops::dot(ops::relu(v[0]), c);
    });
  });
  add("maxpool2", [&](Rng& rng) {
    auto x = u(rng, {2, 3, 4, 4});
    std::vector<int64_t> am;
    auto c = probe(rng, kernels::maxpool2_forward(x, am));
    return make_case({x}, [c](Tape<double>& t, auto& v) {
      return ops::dot(ops::maxpool2(v[0]), c);
    });
  });
  add("global_avg_pool", [&](Rng& rng) {
    auto x = u(rng, {2, 3, 4, 4});
    auto c = probe(rng, kernels::global_avg_pool_forward(x));
    return make_case({x}, [c](Tape<double>& t, auto& v) {
      return ops::dot(ops::global_avg_pool(v[0]), c);
    });
  });
  add("linear", [&](Rng& rng) {
    auto x = u(rng, {3, 5});
    auto w = u(rng, {4, 5});
    auto b = u(rng, {4});
    auto c = probe(rng, kernels::linear_forward(x, w, b));
    return make_case({x, w, b}, [c](Tape<double>& t, auto& v) {
      return ops::dot(ops::linear(v[0], v[1], v[2]), c);
    });
  });
  add("softmax_cross_entropy", [&](Rng& rng) {
    auto logits = u(rng, {3, 5});
    std::vector<int> labels = {0, 2, 4};
    return make_case({logits}, [labels](Tape<double>& t, auto& v) {
      return ops::softmax_cross_entropy(v[0], labels).loss;
    });
  });
  add("channel_scale", [&](Rng& rng) {
    auto x = u(rng, {2, 3, 4, 4});
    auto a = u(rng, {3});
    auto c = probe(rng, x);
    return make_case({x, a}, [c](Tape<double>& t, auto& v) {
      return ops::dot(ops::channel_scale(v[0], v[1]), c);
    });
  });
  add("add_sub", [&](Rng& rng) {
    auto a = u(rng, {2, 3, 2, 2});
    auto b = u(rng, {2, 3, 2, 2});
    auto d = u(rng, {2, 3, 2, 2});
    auto c = probe(rng, a);
    return make_case({a, b, d}, [c](Tape<double>& t, auto& v) {
      return ops::dot(ops::sub(ops::add(v[0], v[1]), v[2]), c);
    });
  });
  add("sum", [&](Rng& rng) {
    auto x = u(rng, {2, 3, 2, 2});
    return make_case({x}, [](Tape<double>& t, auto& v) {
      return ops::sum(v[0]);
    });
  });
  add("half_squared_norm", [&](Rng& rng) {
    auto x = u(rng, {2, 3, 2, 2});
    return make_case({x}, [](Tape<double>& t, auto& v) {
      return ops::half_squared_norm(v[0]);
    });
  });
  add("pc_block", [&](Rng& rng) {
    // full block: BN -> r0 -> 2 cycles -> bypass merge -> pool
    auto x = u(rng, {2, 3, 6, 6});
    auto ff = rng.normal_tensor<double>({4, 3, 3, 3}, 0.3);
    auto fb = rng.normal_tensor<double>({4, 3, 3, 3}, 0.3);
    auto bp = rng.normal_tensor<double>({4, 3, 1, 1}, 0.5);
    auto alpha = rng.uniform_tensor<double>({4}, 0.05, 0.3);
    auto gamma = rng.uniform_tensor<double>({3}, 0.5, 1.5);
    auto beta = u(rng, {3});
    TensorD c;
    {
      PcBlockParamsT<double> params;
      params.ff = ff;
      params.fb = fb;
      params.bp = bp;
      params.alpha = alpha;
      params.bn = BatchNormStateT<double>::make(3);
      params.pool_after = true;
      Tape<double> tape;
      tape.grad_enabled = false;
      PcBlockVars<double> bv;
      bv.ff = tape.leaf(ff, false);
      bv.fb = tape.leaf(fb, false);
      bv.bp = tape.leaf(bp, false);
      bv.alpha = tape.leaf(alpha, false);
      bv.gamma = tape.leaf(gamma, false);
      bv.beta = tape.leaf(beta, false);
      Var<double> y =
          pc_block_forward(tape.leaf(x, false), bv, params, 2, true);
      c = rng.uniform_tensor<double>(y.value().shape(), -1.0, 1.0);
    }
    return make_case(
        {x, ff, fb, bp, alpha, gamma, beta},
        [c](Tape<double>& t, auto& v) {
          PcBlockParamsT<double> params;
          params.ff = v[1].value();
          params.fb = v[2].value();
          params.bp = v[3].value();
          params.alpha = v[4].value();
          params.bn = BatchNormStateT<double>::make(3);
          params.pool_after = true;
          PcBlockVars<double> bv;
          bv.ff = v[1];
          bv.fb = v[2];
          bv.bp = v[3];
          bv.alpha = v[4];
          bv.gamma = v[5];
          bv.beta = v[6];
          return ops::dot(pc_block_forward(v[0], bv, params, 2, true), c);
        });
  });
  return report;
}

namespace {

double model_loss(ModelT<double>& m, const TensorT<double>& x,
                  const std::vector<int>& labels) {
  Tape<double> tape;
  tape.grad_enabled = false;
  ModelVars<double> vars = bind_model(tape, m, false);
  Var<double> xin = tape.leaf(x, false);
  ForwardOut<double> out = model_forward(m, tape, vars, xin);
  return static_cast<double>(
      ops::softmax_cross_entropy(out.logits, labels).loss.value()[0]);
}

}  // namespace

GradcheckReport gradcheck_model(Arch arch, const std::vector<int>& cycle_counts,
                                uint64_t base_seed, int seeds, int64_t hw,
                                int samples_per_tensor) {
  GradcheckReport report;
  for (int cycles : cycle_counts) {
    GradCheck chk{"pcn_" + arch_to_string(arch) + "_T" +
                      std::to_string(cycles),
                  0.0, 0};
    for (int s = 0; s < seeds; ++s) {
      Rng rng(mix_seed(base_seed, 991 * (s + 1) + cycles));
      ModelT<double> model =
          build_pcn<double>(arch, cycles, 10, mix_seed(base_seed, s));
      model.train_mode = true;
      TensorT<double> x = rng.uniform_tensor<double>({2, 3, hw, hw}, -1.0, 1.0);
      std::vector<int> labels = {static_cast<int>(rng.below(10)),
                                 static_cast<int>(rng.below(10))};

      // Analytic grads for every learnable and the input, one pass.
      Tape<double> tape;
      ModelVars<double> vars = bind_model(tape, model, true);
      Var<double> xin = tape.leaf(x, true);
      ForwardOut<double> out = model_forward(model, tape, vars, xin);
      auto ce = ops::softmax_cross_entropy(out.logits, labels);
      tape.backward(ce.loss);

      auto params = model.parameters();
      for (size_t p = 0; p <= params.size(); ++p) {
        const bool is_input = p == params.size();
        TensorT<double>* theta = is_input ? &x : params[p].tensor;
        const TensorD& analytic =
            tape.grad(is_input ? xin.id : vars.ordered[p].id);
        auto eval = [&]() { return model_loss(model, x, labels); };
        int compared = 0;
        // resample kink-crossing probes so the sample budget is spent on
        // coordinates where the difference quotient is a valid oracle
        for (int attempt = 0;
             compared < samples_per_tensor && attempt < 4 * samples_per_tensor;
             ++attempt) {
          int64_t i = rng.below(theta->numel());
          double fd = 0.0;
          if (!probed_fd(eval, (*theta)[i], (*theta)[i], kEps, fd)) {
            ++chk.skipped;
            continue;
          }
          ++compared;
          chk.worst = std::max(chk.worst, guarded_rel_err(analytic[i], fd));
        }
      }
    }
    report.checks.push_back(chk);
  }
  return report;
}

}  // namespace pcn
