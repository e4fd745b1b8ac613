// pcn: train, evaluate and analyze predictive-coding networks.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "pcn/analysis.hpp"
#include "pcn/checkpoint.hpp"
#include "pcn/config.hpp"
#include "pcn/data.hpp"
#include "pcn/gradcheck.hpp"
#include "pcn/io.hpp"
#include "pcn/parallel.hpp"
#include "pcn/trainer.hpp"

namespace {

struct UsageError : pcn::Error {
  using pcn::Error::Error;
};

struct TrainOpts {
  std::string arch;
  int cycles = -1;
  bool plain = false;
  std::string dataset = "cifar10";
  std::string data_dir;
  std::string out;
  int classes = 10;
  int epochs = 20;
  int batch_size = 128;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  uint64_t seed = 0;
  bool no_augment = false;
  bool zero_wall_time = false;
  int64_t limit_train = 0;
  int64_t limit_test = 0;
  int64_t eval_limit = 0;
};

// Keys accepted in --config files; unknown keys are rejected.
void apply_config_file(TrainOpts& o, const std::string& path,
                       const CLI::App* cmd) {
  pcn::KvText kv;
  try {
    kv = pcn::KvText::read_file(path);
  } catch (const pcn::Error& e) {
    throw UsageError(e.what());
  }
  auto flag_given = [&](const std::string& flag) {
    return cmd->count(flag) > 0;
  };
  for (const auto& [key, value] : kv.items()) {
    try {
      if (key == "arch") {
        if (!flag_given("--arch")) o.arch = value;
      } else if (key == "cycles") {
        if (!flag_given("--cycles")) o.cycles = std::stoi(value);
      } else if (key == "plain") {
        if (!flag_given("--plain")) o.plain = value == "1" || value == "true";
      } else if (key == "dataset") {
        if (!flag_given("--dataset")) o.dataset = value;
      } else if (key == "data_dir") {
        if (!flag_given("--data-dir")) o.data_dir = value;
      } else if (key == "out") {
        if (!flag_given("--out")) o.out = value;
      } else if (key == "classes") {
        if (!flag_given("--classes")) o.classes = std::stoi(value);
      } else if (key == "epochs") {
        if (!flag_given("--epochs")) o.epochs = std::stoi(value);
      } else if (key == "batch_size") {
        if (!flag_given("--batch-size")) o.batch_size = std::stoi(value);
      } else if (key == "lr") {
        if (!flag_given("--lr")) o.lr = std::stod(value);
      } else if (key == "momentum") {
        if (!flag_given("--momentum")) o.momentum = std::stod(value);
      } else if (key == "weight_decay") {
        if (!flag_given("--weight-decay")) o.weight_decay = std::stod(value);
      } else if (key == "seed") {
        if (!flag_given("--seed")) o.seed = std::stoull(value);
      } else if (key == "augment") {
        if (!flag_given("--no-augment"))
          o.no_augment = !(value == "1" || value == "true");
      } else if (key == "zero_wall_time") {
        if (!flag_given("--zero-wall-time"))
          o.zero_wall_time = value == "1" || value == "true";
      } else if (key == "limit_train") {
        if (!flag_given("--limit-train")) o.limit_train = std::stoll(value);
      } else if (key == "limit_test") {
        if (!flag_given("--limit-test")) o.limit_test = std::stoll(value);
      } else if (key == "eval_limit") {
        if (!flag_given("--eval-limit")) o.eval_limit = std::stoll(value);
      } else {
        throw UsageError("unknown config key '" + key + "' in " + path);
      }
    } catch (const std::invalid_argument&) {
      throw UsageError("bad value for config key '" + key + "': " + value);
    }
  }
}

std::pair<pcn::Dataset, pcn::Dataset> load_data(const std::string& dataset,
                                                const std::string& data_dir,
                                                int classes, uint64_t seed,
                                                int64_t limit_train,
                                                int64_t limit_test) {
  pcn::Dataset train, test;
  if (dataset == "synthetic") {
    int64_t n_train = limit_train > 0 ? limit_train : 10000;
    int64_t n_test = limit_test > 0 ? limit_test : 2000;
    train = pcn::synthetic_dataset(classes, n_train, pcn::mix_seed(seed, 11));
    test = pcn::synthetic_dataset(classes, n_test, pcn::mix_seed(seed, 23));
  } else if (dataset == "cifar10" || dataset == "cifar100") {
    if (data_dir.empty())
      throw UsageError("--data-dir (or PCN_DATA_DIR) is required for " +
                       dataset);
    auto pair = dataset == "cifar10" ? pcn::load_cifar10(data_dir)
                                     : pcn::load_cifar100(data_dir);
    train = pcn::take(pair.first, limit_train);
    test = pcn::take(pair.second, limit_test);
  } else {
    throw UsageError("unknown dataset '" + dataset + "'");
  }
  pcn::normalize_pair(train, test);
  return {std::move(train), std::move(test)};
}

int cmd_train(TrainOpts& o, const CLI::App* cmd, const std::string& config) {
  if (!config.empty()) apply_config_file(o, config, cmd);
  if (o.arch.empty()) throw UsageError("--arch is required");
  if (o.plain && cmd->count("--cycles") > 0)
    throw UsageError("--plain models run no recurrent cycles; drop --cycles");
  if (!o.plain && o.cycles < 0)
    throw UsageError("--cycles is required (or use --plain)");
  pcn::Arch arch;
  try {
    arch = pcn::arch_from_string(o.arch);
  } catch (const pcn::ConfigError& e) {
    throw UsageError(e.what());
  }
  if (arch == pcn::Arch::E)
    throw UsageError("arch E expects 224x224 inputs; no bundled dataset "
                     "matches it (use gradcheck/params)");

  int classes = o.dataset == "cifar100" ? 100 : (o.dataset == "cifar10" ? 10 : o.classes);
  auto [train_ds, test_ds] = load_data(o.dataset, o.data_dir, classes, o.seed,
                                       o.limit_train, o.limit_test);

  pcn::Model model = o.plain
                         ? pcn::build_plain<float>(arch, classes, o.seed)
                         : pcn::build_pcn<float>(arch, o.cycles, classes, o.seed);
  pcn::TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.lr0 = o.lr;
  cfg.momentum = o.momentum;
  cfg.weight_decay = o.weight_decay;
  cfg.seed = o.seed;
  cfg.augment = !o.no_augment;
  cfg.zero_wall_time = o.zero_wall_time;
  cfg.out_dir = o.out;
  cfg.eval_limit = o.eval_limit;
  cfg.verbose = true;

  pcn::TrainLog log = pcn::train(model, train_ds, test_ds, cfg);
  std::printf("final test error: %.4f\n", log.rows.back().test_err);
  if (!o.out.empty())
    std::printf("wrote %s/{train_log.csv,last.ckpt,best.ckpt}\n",
                o.out.c_str());
  return 0;
}

pcn::Dataset load_eval_split(const std::string& dataset,
                             const std::string& data_dir, int classes,
                             uint64_t seed, int64_t limit) {
  auto [train, test] =
      load_data(dataset, data_dir, classes, seed, 0, limit);
  (void)train;
  return test;
}

int cmd_eval(const std::string& ckpt, const std::string& dataset,
             const std::string& data_dir, int cycles, int64_t limit,
             uint64_t seed) {
  pcn::Model model = pcn::load_checkpoint(ckpt);
  pcn::Dataset test = load_eval_split(dataset, data_dir,
                                      model.spec.num_classes, seed, limit);
  if (test.num_classes != model.spec.num_classes)
    throw pcn::ConfigError("checkpoint expects " +
                           std::to_string(model.spec.num_classes) +
                           " classes, dataset has " +
                           std::to_string(test.num_classes));
  double err = pcn::evaluate(model, test, 256, 0, cycles);
  std::printf("test error: %.4f (cycles=%d, n=%lld)\n", err,
              cycles >= 0 ? cycles : model.spec.cycles,
              static_cast<long long>(test.size()));
  return 0;
}

struct AnalyzeOpts {
  std::string checkpoint, mode, out, dataset = "synthetic", data_dir;
  std::string image_file, raw_out;
  int cycles = -1;
  int64_t limit = 256;
  int64_t index = 0;
  uint64_t seed = 0;
};

pcn::Tensor load_raw_image(const std::string& path) {
  std::string bytes = pcn::read_text_file(path);
  if (bytes.size() != 3072)
    throw pcn::IoError("--image-file must hold exactly 3072 bytes "
                       "(3x32x32 channel-planar), got " +
                       std::to_string(bytes.size()));
  pcn::Tensor img({3, 32, 32});
  for (int64_t i = 0; i < img.numel(); ++i)
    img[i] = static_cast<float>(static_cast<uint8_t>(bytes[i])) / 255.0f;
  return img;
}

int cmd_analyze(const AnalyzeOpts& o) {
  if (o.mode != "trajectory" && o.mode != "saliency" && o.mode != "cosine")
    throw UsageError("--mode must be one of trajectory|saliency|cosine");
  if (o.mode == "cosine" && !o.image_file.empty())
    throw UsageError("cosine mode needs labeled data; --image-file has no "
                     "labels (use --dataset)");
  pcn::Model model = pcn::load_checkpoint(o.checkpoint);
  int cycles = o.cycles >= 0 ? o.cycles : model.spec.cycles;

  if (o.mode == "saliency") {
    pcn::Tensor img;
    if (!o.image_file.empty()) {
      img = load_raw_image(o.image_file);
      // saliency expects network-scale inputs; apply a per-image standardization
      pcn::Dataset tmp;
      tmp.images = pcn::Tensor({1, 3, 32, 32},
                               std::vector<float>(img.data(),
                                                  img.data() + img.numel()));
      tmp.labels = {0};
      pcn::compute_channel_stats(tmp);
      pcn::apply_normalization(tmp, tmp.channel_mean, tmp.channel_std);
      img = pcn::image_at(tmp, 0);
    } else {
      pcn::Dataset test = load_eval_split(o.dataset, o.data_dir,
                                          model.spec.num_classes, o.seed, 0);
      if (o.index < 0 || o.index >= test.size())
        throw UsageError("--index out of range");
      img = pcn::image_at(test, o.index);
    }
    pcn::Tensor map = pcn::saliency_map(model, img, cycles);
    pcn::write_pgm(o.out, map);
    if (!o.raw_out.empty()) pcn::write_raw_map(o.raw_out, map);
    std::printf("wrote %s (%lldx%lld)\n", o.out.c_str(),
                static_cast<long long>(map.dim(0)),
                static_cast<long long>(map.dim(1)));
    return 0;
  }

  pcn::Dataset test = load_eval_split(o.dataset, o.data_dir,
                                      model.spec.num_classes, o.seed, o.limit);
  if (test.num_classes != model.spec.num_classes)
    throw pcn::ConfigError("checkpoint expects " +
                           std::to_string(model.spec.num_classes) +
                           " classes, dataset has " +
                           std::to_string(test.num_classes));
  if (o.mode == "trajectory") {
    pcn::AnalysisMatrix m =
        pcn::error_trajectory(model, test, cycles, o.limit);
    pcn::write_text_file(o.out, pcn::matrix_to_csv(m, 1));
  } else {
    pcn::AnalysisMatrix m = pcn::cosine_diagnostic(model, test, cycles, o.limit);
    pcn::write_text_file(o.out, pcn::matrix_to_csv(m, 0));
  }
  std::printf("wrote %s (%zu blocks x %d cycles)\n", o.out.c_str(),
              model.blocks.size(), cycles);
  return 0;
}

int cmd_gradcheck(const std::string& arch_s, std::vector<int> cycles,
                  uint64_t seed, int seeds, int64_t hw, int samples) {
  pcn::Arch arch;
  try {
    arch = pcn::arch_from_string(arch_s);
  } catch (const pcn::ConfigError& e) {
    throw UsageError(e.what());
  }
  if (cycles.empty()) cycles = {1, 3, 5};
  auto t0 = std::chrono::steady_clock::now();
  pcn::GradcheckReport ops_report = pcn::gradcheck_ops(seed, seeds);
  pcn::GradcheckReport model_report =
      pcn::gradcheck_model(arch, cycles, seed, seeds, hw, samples);
  double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  int64_t skipped = 0;
  for (const auto& c : ops_report.checks) {
    std::printf("  %-24s max rel err %.3e\n", c.name.c_str(), c.worst);
    skipped += c.skipped;
  }
  for (const auto& c : model_report.checks) {
    std::printf("  %-24s max rel err %.3e\n", c.name.c_str(), c.worst);
    skipped += c.skipped;
  }
  if (skipped > 0)
    std::printf("  (%lld probes crossed a relu/argmax kink and were "
                "resampled; central differences are not derivatives there)\n",
                static_cast<long long>(skipped));
  double worst = std::max(ops_report.worst(), model_report.worst());
  const std::string& worst_name = ops_report.worst() > model_report.worst()
                                      ? ops_report.worst_name()
                                      : model_report.worst_name();
  std::printf("worst relative error: %.3e (%s), %.1fs\n", worst,
              worst_name.c_str(), elapsed);
  if (worst >= 1e-4) {
    std::fprintf(stderr, "gradcheck FAILED: %s at %.3e (tolerance 1e-4)\n",
                 worst_name.c_str(), worst);
    return 1;
  }
  std::printf("gradcheck passed (tolerance 1e-4)\n");
  return 0;
}

int cmd_params(const std::string& arch_s, int classes, bool plain) {
  pcn::Arch arch;
  try {
    arch = pcn::arch_from_string(arch_s);
  } catch (const pcn::ConfigError& e) {
    throw UsageError(e.what());
  }
  pcn::ModelSpec spec = pcn::ModelSpec::make(arch, plain ? 0 : 1, classes, plain);
  auto rows = pcn::param_count_rows(spec);
  int64_t total = 0;
  for (const auto& r : rows) {
    std::printf("  %-12s %10lld\n", r.name.c_str(),
                static_cast<long long>(r.count));
    total += r.count;
  }
  std::printf("total: %lld (%.2fM)\n", static_cast<long long>(total),
              static_cast<double>(total) / 1e6);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"predictive-coding network engine"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads for operator internals (0 = auto)");

  // train
  TrainOpts t;
  std::string config_file;
  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--arch", t.arch, "architecture A..E");
  train->add_option("--cycles", t.cycles, "recurrent cycles per block");
  train->add_flag("--plain", t.plain, "feedforward-only counterpart");
  train->add_option("--dataset", t.dataset, "cifar10|cifar100|synthetic");
  train->add_option("--data-dir", t.data_dir, "CIFAR binary batch directory")
      ->envname("PCN_DATA_DIR");
  train->add_option("--out", t.out, "output directory (checkpoints, CSV log)");
  train->add_option("--classes", t.classes, "classes for synthetic data");
  train->add_option("--epochs", t.epochs, "training epochs");
  train->add_option("--batch-size", t.batch_size, "minibatch size");
  train->add_option("--lr", t.lr, "initial learning rate");
  train->add_option("--momentum", t.momentum, "Nesterov momentum");
  train->add_option("--weight-decay", t.weight_decay, "L2 weight decay");
  train->add_option("--seed", t.seed, "RNG seed");
  train->add_flag("--no-augment", t.no_augment, "disable crop/flip");
  train->add_flag("--zero-wall-time", t.zero_wall_time,
                  "write 0.0 wall time into the CSV log");
  train->add_option("--limit-train", t.limit_train, "cap training examples");
  train->add_option("--limit-test", t.limit_test, "cap test examples");
  train->add_option("--eval-limit", t.eval_limit,
                    "cap per-epoch evaluation examples");
  train->add_option("--config", config_file, "key=value config file");

  // eval
  std::string e_ckpt, e_dataset = "synthetic", e_data_dir;
  int e_cycles = -1;
  int64_t e_limit = 0;
  uint64_t e_seed = 0;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", e_ckpt)->required();
  eval->add_option("--dataset", e_dataset, "cifar10|cifar100|synthetic");
  eval->add_option("--data-dir", e_data_dir)->envname("PCN_DATA_DIR");
  eval->add_option("--cycles", e_cycles, "override inference cycle count");
  eval->add_option("--limit-test", e_limit, "cap test examples");
  eval->add_option("--seed", e_seed, "seed for synthetic data");

  // analyze
  AnalyzeOpts a;
  CLI::App* analyze = app.add_subcommand("analyze", "behavioral analyses");
  analyze->add_option("--checkpoint", a.checkpoint)->required();
  analyze->add_option("--mode", a.mode, "trajectory|saliency|cosine")
      ->required();
  analyze->add_option("--out", a.out, "output file (CSV or PGM)")->required();
  analyze->add_option("--dataset", a.dataset, "cifar10|cifar100|synthetic");
  analyze->add_option("--data-dir", a.data_dir)->envname("PCN_DATA_DIR");
  analyze->add_option("--cycles", a.cycles, "override inference cycle count");
  analyze->add_option("--limit", a.limit, "examples to analyze");
  analyze->add_option("--index", a.index, "dataset image for saliency");
  analyze->add_option("--image-file", a.image_file,
                      "raw 3072-byte RGB image for saliency");
  analyze->add_option("--raw", a.raw_out, "also dump raw f32 saliency map");
  analyze->add_option("--seed", a.seed, "seed for synthetic data");

  // gradcheck
  std::string g_arch = "A";
  std::vector<int> g_cycles;
  uint64_t g_seed = 0;
  int g_seeds = 10, g_samples = 4;
  int64_t g_hw = 8;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck->add_option("--arch", g_arch, "architecture for the e2e check");
  gradcheck->add_option("--cycles", g_cycles,
                        "cycle counts to check (default 1 3 5)");
  gradcheck->add_option("--seed", g_seed, "base seed");
  gradcheck->add_option("--seeds", g_seeds, "number of seeds");
  gradcheck->add_option("--hw", g_hw, "input height/width");
  gradcheck->add_option("--samples", g_samples, "coordinates per tensor");

  // params
  std::string p_arch;
  int p_classes = 0;
  bool p_plain = false;
  CLI::App* params = app.add_subcommand("params", "parameter counts");
  params->add_option("--arch", p_arch)->required();
  params->add_option("--classes", p_classes)->required();
  params->add_flag("--plain", p_plain);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  pcn::set_num_threads(threads);
  try {
    if (*train) return cmd_train(t, train, config_file);
    if (*eval) return cmd_eval(e_ckpt, e_dataset, e_data_dir, e_cycles,
                               e_limit, e_seed);
    if (*analyze) return cmd_analyze(a);
    if (*gradcheck)
      return cmd_gradcheck(g_arch, g_cycles, g_seed, g_seeds, g_hw, g_samples);
    if (*params) return cmd_params(p_arch, p_classes, p_plain);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
