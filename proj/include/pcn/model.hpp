#pragma once

#include <string>
#include <vector>

#include "pcn/block.hpp"
#include "pcn/rng.hpp"

namespace pcn {

enum class Arch { A, B, C, D, E };

inline Arch arch_from_string(const std::string& s) {
  if (s == "A" || s == "a") return Arch::A;
  if (s == "B" || s == "b") return Arch::B;
  if (s == "C" || s == "c") return Arch::C;
  if (s == "D" || s == "d") return Arch::D;
  if (s == "E" || s == "e") return Arch::E;
  throw ConfigError("unknown architecture '" + s + "' (expected A..E)");
}

inline std::string arch_to_string(Arch a) {
  switch (a) {
    case Arch::A: return "A";
    case Arch::B: return "B";
    case Arch::C: return "C";
    case Arch::D: return "D";
    case Arch::E: return "E";
  }
  return "?";
}

struct BlockCfg {
  int64_t c_in, c_out;
  bool pool;
};

// Declarative architecture: channel chain, pooling flags, recurrence depth.
struct ModelSpec {
  Arch arch = Arch::A;
  int cycles = 1;
  int num_classes = 10;
  bool plain = false;
  bool has_stem = false;  // 7x7/stride-2/pad-3 conv to 64 channels (arch E)
  std::vector<BlockCfg> blocks;

  static ModelSpec make(Arch arch, int cycles, int num_classes, bool plain);
  int64_t input_size() const { return arch == Arch::E ? 224 : 32; }
  int64_t top_channels() const { return blocks.back().c_out; }
};

// Per-layer parameter breakdown for reporting.
struct ParamCountRow {
  std::string name;
  int64_t count;
};
int64_t param_count(const ModelSpec& spec);
std::vector<ParamCountRow> param_count_rows(const ModelSpec& spec);

template <class T>
struct ModelT {
  ModelSpec spec;
  TensorT<T> stem;  // empty unless spec.has_stem
  std::vector<PcBlockParamsT<T>> blocks;
  TensorT<T> fc_w, fc_b;
  bool train_mode = false;

  struct ParamRef {
    std::string name;
    TensorT<T>* tensor;
    bool is_alpha;
  };

  // Learnable tensors, in a fixed order.
  std::vector<ParamRef> parameters() {
    std::vector<ParamRef> out;
    if (!stem.empty()) out.push_back({"stem.w", &stem, false});
    for (size_t i = 0; i < blocks.size(); ++i) {
      std::string b = "blocks." + std::to_string(i) + ".";
      auto& blk = blocks[i];
      out.push_back({b + "ff", &blk.ff, false});
      if (blk.has_feedback()) {
        out.push_back({b + "fb", &blk.fb, false});
        out.push_back({b + "alpha", &blk.alpha, true});
      }
      out.push_back({b + "bp", &blk.bp, false});
      out.push_back({b + "bn.gamma", &blk.bn.gamma, false});
      out.push_back({b + "bn.beta", &blk.bn.beta, false});
    }
    out.push_back({"fc.w", &fc_w, false});
    out.push_back({"fc.b", &fc_b, false});
    return out;
  }

  // Everything a checkpoint must carry: learnables plus BN running stats.
  std::vector<ParamRef> state_tensors() {
    std::vector<ParamRef> out = parameters();
    for (size_t i = 0; i < blocks.size(); ++i) {
      std::string b = "blocks." + std::to_string(i) + ".";
      out.push_back({b + "bn.running_mean", &blocks[i].bn.running_mean, false});
      out.push_back({b + "bn.running_var", &blocks[i].bn.running_var, false});
    }
    return out;
  }
};

using Model = ModelT<float>;

namespace detail {

inline const std::vector<BlockCfg>& arch_blocks(Arch arch) {
  static const std::vector<BlockCfg> a = {{3, 16, false},  {16, 16, false},
                                          {16, 32, true},  {32, 32, false},
                                          {32, 64, true},  {64, 64, false}};
  static const std::vector<BlockCfg> b = {{3, 16, false},  {16, 32, false},
                                          {32, 64, true},  {64, 64, false},
                                          {64, 128, true}, {128, 128, false}};
  static const std::vector<BlockCfg> c = {
      {3, 64, false},   {64, 64, false},   {64, 128, true},  {128, 128, false},
      {128, 256, true}, {256, 256, false}, {256, 256, false}, {256, 256, false}};
  static const std::vector<BlockCfg> d = {
      {3, 64, false},   {64, 64, false},   {64, 128, true},  {128, 128, false},
      {128, 256, true}, {256, 256, false}, {256, 512, false}, {512, 512, false}};
  static const std::vector<BlockCfg> e = {
      {64, 64, false},  {64, 128, true},  {128, 128, false}, {128, 128, true},
      {128, 128, false}, {128, 256, true}, {256, 256, false}, {256, 256, false},
      {256, 512, true}, {512, 512, false}, {512, 512, false}};
  switch (arch) {
    case Arch::A: return a;
    case Arch::B: return b;
    case Arch::C: return c;
    case Arch::D: return d;
    case Arch::E: return e;
  }
  throw ConfigError("unknown architecture");
}

// Stable per-tensor seed stream: plain and recurrent builds draw identical
// values for the tensors they share.
inline uint64_t tensor_seed(uint64_t seed, int block, int role) {
  return mix_seed(seed, static_cast<uint64_t>((block + 2) * 16 + role));
}

}  // namespace detail

inline ModelSpec ModelSpec::make(Arch arch, int cycles, int num_classes,
                                 bool plain) {
  if (cycles < 0) throw ContractError("cycle count must be >= 0");
  if (num_classes < 2) throw ConfigError("need at least 2 classes");
  ModelSpec s;
  s.arch = arch;
  s.cycles = plain ? 0 : cycles;
  s.num_classes = num_classes;
  s.plain = plain;
  s.has_stem = arch == Arch::E;
  s.blocks = detail::arch_blocks(arch);
  return s;
}

inline int64_t param_count(const ModelSpec& spec) {
  int64_t total = 0;
  for (const auto& row : param_count_rows(spec)) total += row.count;
  return total;
}

inline std::vector<ParamCountRow> param_count_rows(const ModelSpec& spec) {
  std::vector<ParamCountRow> rows;
  if (spec.has_stem) rows.push_back({"stem", 7 * 7 * 3 * 64});
  for (size_t i = 0; i < spec.blocks.size(); ++i) {
    const auto& b = spec.blocks[i];
    int64_t c = 9 * b.c_in * b.c_out        // ff
                + b.c_in * b.c_out          // bp
                + 2 * b.c_in;               // bn gamma/beta
    if (!spec.plain) c += 9 * b.c_out * b.c_in + b.c_out;  // fb + alpha
    rows.push_back({"block" + std::to_string(i + 1), c});
  }
  rows.push_back({"classifier",
                  static_cast<int64_t>(spec.num_classes) *
                          (spec.blocks.back().c_out + 1)});
  return rows;
}

template <class T>
ModelT<T> build_model(const ModelSpec& spec, uint64_t seed) {
  ModelT<T> m;
  m.spec = spec;
  if (spec.has_stem) {
    Rng r(detail::tensor_seed(seed, -1, 0));
    m.stem = r.normal_tensor<T>({64, 3, 7, 7}, std::sqrt(2.0 / (49.0 * 3.0)));
  }
  for (size_t i = 0; i < spec.blocks.size(); ++i) {
    const auto& cfg = spec.blocks[i];
    PcBlockParamsT<T> blk;
    {
      Rng r(detail::tensor_seed(seed, static_cast<int>(i), 0));
      blk.ff = r.normal_tensor<T>({cfg.c_out, cfg.c_in, 3, 3},
                                  std::sqrt(2.0 / (9.0 * cfg.c_in)));
    }
    if (!spec.plain) {
      Rng r(detail::tensor_seed(seed, static_cast<int>(i), 1));
      blk.fb = r.normal_tensor<T>({cfg.c_out, cfg.c_in, 3, 3},
                                  std::sqrt(2.0 / (9.0 * cfg.c_out)));
      blk.alpha = TensorT<T>::full({cfg.c_out}, T(0.1));
    }
    {
      Rng r(detail::tensor_seed(seed, static_cast<int>(i), 2));
      blk.bp = r.normal_tensor<T>({cfg.c_out, cfg.c_in, 1, 1},
                                  std::sqrt(2.0 / cfg.c_in));
    }
    blk.bn = BatchNormStateT<T>::make(cfg.c_in);
    blk.pool_after = cfg.pool;
    m.blocks.push_back(std::move(blk));
  }
  {
    Rng r(detail::tensor_seed(seed, static_cast<int>(spec.blocks.size()), 3));
    int64_t c = spec.top_channels();
    m.fc_w = r.normal_tensor<T>({spec.num_classes, c}, std::sqrt(1.0 / c));
    m.fc_b = TensorT<T>({spec.num_classes});
  }
  return m;
}

template <class T>
ModelT<T> build_pcn(Arch arch, int cycles, int num_classes, uint64_t seed) {
  return build_model<T>(ModelSpec::make(arch, cycles, num_classes, false),
                        seed);
}

template <class T>
ModelT<T> build_plain(Arch arch, int num_classes, uint64_t seed) {
  return build_model<T>(ModelSpec::make(arch, 0, num_classes, true), seed);
}

template <class T>
void clamp_all_alphas(ModelT<T>& m) {
  for (auto& b : m.blocks) clamp_alpha(b);
}

// Tape handles for every learnable, aligned with parameters() order.
template <class T>
struct ModelVars {
  Var<T> stem;
  std::vector<PcBlockVars<T>> blocks;
  Var<T> fc_w, fc_b;
  std::vector<Var<T>> ordered;
};

template <class T>
ModelVars<T> bind_model(Tape<T>& tape, ModelT<T>& m, bool requires_grad) {
  ModelVars<T> v;
  if (!m.stem.empty()) {
    v.stem = tape.leaf(m.stem, requires_grad);
    v.ordered.push_back(v.stem);
  }
  for (auto& blk : m.blocks) {
    PcBlockVars<T> bv = bind_block(tape, blk, requires_grad);
    v.blocks.push_back(bv);
    v.ordered.push_back(bv.ff);
    if (blk.has_feedback()) {
      v.ordered.push_back(bv.fb);
      v.ordered.push_back(bv.alpha);
    }
    v.ordered.push_back(bv.bp);
    v.ordered.push_back(bv.gamma);
    v.ordered.push_back(bv.beta);
  }
  v.fc_w = tape.leaf(m.fc_w, requires_grad);
  v.fc_b = tape.leaf(m.fc_b, requires_grad);
  v.ordered.push_back(v.fc_w);
  v.ordered.push_back(v.fc_b);
  return v;
}

template <class T>
struct ForwardOut {
  Var<T> logits;
  std::vector<BlockTraceT<T>> traces;  // filled only when requested
};

template <class T>
struct ForwardOpts {
  int cycles_override = -1;            // >= 0 replaces spec.cycles everywhere
  std::vector<int> cycles_per_block;   // non-empty: exact per-block counts
  bool want_traces = false;
};

template <class T>
ForwardOut<T> model_forward(ModelT<T>& m, Tape<T>& tape, ModelVars<T>& vars,
                            Var<T> x, const ForwardOpts<T>& opts = {}) {
  const auto& xs = x.value().shape();
  if (xs.size() != 4 || xs[1] != (m.spec.has_stem ? 3 : m.spec.blocks[0].c_in))
    throw ShapeError("model expects [N,3,H,W] input, got " + shape_str(xs));
  if (!opts.cycles_per_block.empty() &&
      opts.cycles_per_block.size() != m.blocks.size())
    throw ContractError("cycles_per_block length must equal block count");
  ForwardOut<T> out;
  Var<T> h = x;
  if (m.spec.has_stem) h = ops::conv2d(h, vars.stem, 2, 3);
  for (size_t i = 0; i < m.blocks.size(); ++i) {
    int cycles = m.spec.cycles;
    if (opts.cycles_override >= 0) cycles = opts.cycles_override;
    if (!opts.cycles_per_block.empty()) cycles = opts.cycles_per_block[i];
    if (m.spec.plain) cycles = 0;
    BlockTraceT<T>* tr = nullptr;
    if (opts.want_traces) {
      out.traces.emplace_back();
      tr = &out.traces.back();
    }
    h = pc_block_forward(h, vars.blocks[i], m.blocks[i], cycles, m.train_mode,
                         tr);
  }
  h = ops::global_avg_pool(h);
  out.logits = ops::linear(h, vars.fc_w, vars.fc_b);
  return out;
}

// Convenience eval-style forward on a fresh tape; returns logits values.
template <class T>
TensorT<T> forward_logits(ModelT<T>& m, const TensorT<T>& batch,
                          int cycles_override = -1) {
  Tape<T> tape;
  tape.grad_enabled = false;
  ModelVars<T> vars = bind_model(tape, m, false);
  Var<T> x = tape.leaf(batch, false);
  ForwardOpts<T> opts;
  opts.cycles_override = cycles_override;
  return model_forward(m, tape, vars, x, opts).logits.value();
}

}  // namespace pcn
