#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pcn/model.hpp"

namespace pcn {

using ScalarFn = std::function<double(const TensorD&)>;

// Central differences: element i = (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
TensorD finite_diff_grad(const ScalarFn& f, const TensorD& x, double eps);

// |a - n| / max(|a|, |n|, 1e-3): relative for meaningful magnitudes,
// effectively absolute near zero so FD noise on zero gradients cannot blow up.
double guarded_rel_err(double analytic, double numeric);

struct GradCheck {
  std::string name;
  double worst = 0.0;
  // probes discarded because they crossed a relu/argmax kink, where central
  // differences do not estimate the derivative
  int64_t skipped = 0;
};

struct GradcheckReport {
  std::vector<GradCheck> checks;

  double worst() const;
  const std::string& worst_name() const;
  bool pass(double tol) const { return worst() < tol; }
};

// Per-operation checks over small random instances, `seeds` seeds each,
// all coordinates of every input compared against central differences.
GradcheckReport gradcheck_ops(uint64_t base_seed, int seeds);

// End-to-end check: full architecture on hw x hw inputs (batch 2, train-mode
// BN), sampling `samples_per_tensor` coordinates of every learnable and of
// the input.
GradcheckReport gradcheck_model(Arch arch, const std::vector<int>& cycle_counts,
                                uint64_t base_seed, int seeds, int64_t hw,
                                int samples_per_tensor);

}  // namespace pcn
