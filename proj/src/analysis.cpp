#include "pcn/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace pcn {

namespace {

Tensor batch_slice(const Dataset& ds, int64_t lo, int64_t hi) {
  const int64_t px = 3 * 32 * 32;
  return Tensor({hi - lo, 3, 32, 32},
                std::vector<float>(ds.images.data() + lo * px,
                                   ds.images.data() + hi * px));
}

double example_l2(const Tensor& t, int64_t example) {
  const int64_t per = t.numel() / t.dim(0);
  const float* p = t.data() + example * per;
  double s = 0.0;
  for (int64_t i = 0; i < per; ++i) s += static_cast<double>(p[i]) * p[i];
  return std::sqrt(s);
}

}  // namespace

std::string matrix_to_csv(const AnalysisMatrix& m, int cycle_base) {
  std::string out = "layer,cycle,value\n";
  char buf[96];
  for (int64_t l = 0; l < m.layers; ++l) {
    for (int64_t t = 0; t < m.cycles; ++t) {
      std::snprintf(buf, sizeof(buf), "%lld,%lld,%.9g\n",
                    static_cast<long long>(l + 1),
                    static_cast<long long>(t + cycle_base), m.at(l, t));
      out += buf;
    }
  }
  return out;
}

AnalysisMatrix error_trajectory(Model& model, const Dataset& ds, int cycles,
                                int64_t limit, int batch_size) {
  if (cycles < 0) throw ContractError("cycle count must be >= 0");
  const bool was_train = model.train_mode;
  model.train_mode = false;
  const int64_t L = static_cast<int64_t>(model.blocks.size());
  AnalysisMatrix m;
  m.layers = L;
  m.cycles = cycles;
  m.values.assign(static_cast<size_t>(L * cycles), 0.0);
  if (cycles == 0) return m;

  const int64_t n = limit > 0 ? std::min<int64_t>(limit, ds.size()) : ds.size();
  for (int64_t lo = 0; lo < n; lo += batch_size) {
    int64_t hi = std::min<int64_t>(lo + batch_size, n);
    Tape<float> tape;
    tape.grad_enabled = false;
    ModelVars<float> vars = bind_model(tape, model, false);
    Var<float> x = tape.leaf(batch_slice(ds, lo, hi), false);
    ForwardOpts<float> opts;
    opts.cycles_override = cycles;
    opts.want_traces = true;
    ForwardOut<float> out = model_forward(model, tape, vars, x, opts);
    for (int64_t l = 0; l < L; ++l) {
      for (int t = 0; t < cycles; ++t) {
        const Tensor& e = out.traces[l].e[t];
        for (int64_t i = 0; i < hi - lo; ++i)
          m.at(l, t) += example_l2(e, i);
      }
    }
  }
  for (double& v : m.values) v /= static_cast<double>(n);
  model.train_mode = was_train;
  return m;
}

Tensor saliency_map(Model& model, const Tensor& image, int cycles_override) {
  if (image.shape() != Shape{3, 32, 32} && image.rank() != 4)
    throw ShapeError("saliency_map expects a single [3,H,W] image");
  const bool was_train = model.train_mode;
  model.train_mode = false;
  Tensor batch({1, image.dim(0), image.dim(image.rank() - 2),
                image.dim(image.rank() - 1)},
               std::vector<float>(image.data(), image.data() + image.numel()));
  const int64_t h_in = batch.dim(2), w_in = batch.dim(3);

  Tape<float> tape;
  tape.grad_enabled = false;
  ModelVars<float> vars = bind_model(tape, model, false);
  Var<float> x = tape.leaf(std::move(batch), false);
  ForwardOpts<float> opts;
  opts.cycles_override = cycles_override;
  opts.want_traces = true;
  ForwardOut<float> out = model_forward(model, tape, vars, x, opts);
  model.train_mode = was_train;

  Tensor acc({h_in, w_in});
  int64_t used = 0;
  for (auto& tr : out.traces) {
    if (tr.e.empty()) continue;
    const Tensor& e = tr.e.back();  // final cycle
    const int64_t c = e.dim(1), h = e.dim(2), w = e.dim(3);
    Tensor collapsed({h, w});
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t xx = 0; xx < w; ++xx) {
        double s = 0.0;
        for (int64_t ch = 0; ch < c; ++ch) {
          float v = e[(ch * h + y) * w + xx];
          s += static_cast<double>(v) * v;
        }
        collapsed[y * w + xx] = static_cast<float>(std::sqrt(s));
      }
    }
    Tensor up = kernels::bilinear_resize(collapsed, h_in, w_in);
    for (int64_t i = 0; i < acc.numel(); ++i) acc[i] += up[i];
    ++used;
  }
  if (used > 0)
    for (int64_t i = 0; i < acc.numel(); ++i)
      acc[i] /= static_cast<float>(used);
  float mn = std::numeric_limits<float>::infinity(), mx = -mn;
  for (int64_t i = 0; i < acc.numel(); ++i) {
    mn = std::min(mn, acc[i]);
    mx = std::max(mx, acc[i]);
  }
  if (mx - mn > 1e-12f) {
    const float inv = 1.0f / (mx - mn);
    for (int64_t i = 0; i < acc.numel(); ++i) acc[i] = (acc[i] - mn) * inv;
  } else {
    for (int64_t i = 0; i < acc.numel(); ++i) acc[i] = 0.0f;
  }
  return acc;
}

AnalysisMatrix cosine_diagnostic(Model& model, const Dataset& ds, int cycles,
                                 int64_t limit, int batch_size) {
  if (cycles < 0) throw ContractError("cycle count must be >= 0");
  const bool was_train = model.train_mode;
  model.train_mode = false;
  const int64_t L = static_cast<int64_t>(model.blocks.size());
  AnalysisMatrix m;
  m.layers = L;
  m.cycles = cycles;
  m.values.assign(static_cast<size_t>(L * cycles), 0.0);
  if (cycles == 0) return m;
  std::vector<int64_t> counts(static_cast<size_t>(L * cycles), 0);

  const int64_t n = limit > 0 ? std::min<int64_t>(limit, ds.size()) : ds.size();
  for (int64_t lo = 0; lo < n; lo += batch_size) {
    int64_t hi = std::min<int64_t>(lo + batch_size, n);
    Tensor batch = batch_slice(ds, lo, hi);
    std::vector<int> labels(ds.labels.begin() + lo, ds.labels.begin() + hi);

    // Full trajectory r(0..T) per block.
    std::vector<BlockTraceT<float>> full_traces;
    {
      Tape<float> tape;
      tape.grad_enabled = false;
      ModelVars<float> vars = bind_model(tape, model, false);
      Var<float> x = tape.leaf(batch, false);
      ForwardOpts<float> opts;
      opts.cycles_override = cycles;
      opts.want_traces = true;
      full_traces = model_forward(model, tape, vars, x, opts).traces;
    }

    for (int64_t l = 0; l < L; ++l) {
      for (int t = 0; t < cycles; ++t) {
        // Gradient of the loss with block l truncated at t cycles; every
        // other block runs the full count.
        Tape<float> tape;
        ModelVars<float> vars = bind_model(tape, model, true);
        Var<float> x = tape.leaf(batch, false);
        ForwardOpts<float> opts;
        opts.cycles_per_block.assign(static_cast<size_t>(L), cycles);
        opts.cycles_per_block[static_cast<size_t>(l)] = t;
        opts.want_traces = true;
        ForwardOut<float> out = model_forward(model, tape, vars, x, opts);
        auto ce = ops::softmax_cross_entropy(out.logits, labels);
        tape.backward(ce.loss);
        Var<float> r_t = out.traces[l].r_vars.back();
        const Tensor& g = r_t.tape->grad(r_t.id);

        const Tensor& r_now = full_traces[l].r[t];
        const Tensor& r_next = full_traces[l].r[t + 1];
        const int64_t per = r_now.numel() / r_now.dim(0);
        for (int64_t i = 0; i < hi - lo; ++i) {
          double dot = 0.0, ndr = 0.0, ng = 0.0;
          const float* a = r_next.data() + i * per;
          const float* b = r_now.data() + i * per;
          const float* gg = g.data() + i * per;
          for (int64_t j = 0; j < per; ++j) {
            double dr = static_cast<double>(a[j]) - b[j];
            dot += dr * gg[j];
            ndr += dr * dr;
            ng += static_cast<double>(gg[j]) * gg[j];
          }
          if (ndr <= 0.0 || ng <= 0.0) continue;  // not-a-value, excluded
          m.at(l, t) += dot / (std::sqrt(ndr) * std::sqrt(ng));
          counts[static_cast<size_t>(l * cycles + t)]++;
        }
      }
    }
  }
  for (int64_t i = 0; i < L * cycles; ++i) {
    if (counts[static_cast<size_t>(i)] > 0)
      m.values[static_cast<size_t>(i)] /= counts[static_cast<size_t>(i)];
    else
      m.values[static_cast<size_t>(i)] =
          std::numeric_limits<double>::quiet_NaN();
  }
  model.train_mode = was_train;
  return m;
}

}  // namespace pcn
