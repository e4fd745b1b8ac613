#pragma once

#include <string>
#include <vector>

#include "pcn/data.hpp"
#include "pcn/model.hpp"

namespace pcn {

// [layer x cycle] grid of per-layer, per-cycle scalars. Entries may be NaN
// (excluded from any averaging by the producers).
struct AnalysisMatrix {
  int64_t layers = 0;
  int64_t cycles = 0;
  std::vector<double> values;  // layer-major

  double at(int64_t l, int64_t t) const { return values[l * cycles + t]; }
  double& at(int64_t l, int64_t t) { return values[l * cycles + t]; }
};

// CSV rows "layer,cycle,value"; layers are 1-based, cycle numbering starts
// at cycle_base (1 for error norms e(t), 0 for update indices t -> t+1).
std::string matrix_to_csv(const AnalysisMatrix& m, int cycle_base);

// Mean over examples of the per-example L2 norm of e(t), per block and cycle
// t = 1..cycles. Evaluation-mode batch norm; cycles may differ from the
// model's training-time setting. cycles == 0 gives an empty [L x 0] matrix.
AnalysisMatrix error_trajectory(Model& model, const Dataset& ds, int cycles,
                                int64_t limit = 0, int batch_size = 128);

// Per block: channel-collapsed (per-location L2) final-cycle error map,
// bilinearly rescaled to the input size, averaged across blocks, min-max
// normalized to [0,1]. An all-zero accumulated map stays all zero.
Tensor saliency_map(Model& model, const Tensor& image, int cycles_override = -1);

// Batch-mean cosine between the recurrent update delta_r(t) = r(t+1) - r(t)
// and the classification-loss gradient at r(t), where the gradient comes
// from a fresh pass with this block truncated at t cycles (downstream blocks
// run their full count). Rows: blocks; columns: t = 0..cycles-1.
AnalysisMatrix cosine_diagnostic(Model& model, const Dataset& ds, int cycles,
                                 int64_t limit = 0, int batch_size = 128);

}  // namespace pcn
