#include "pcn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pcn/checkpoint.hpp"

namespace pcn {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (lr0 <= 0) throw ConfigError("lr0 must be > 0");
  if (momentum < 0 || momentum >= 1)
    throw ConfigError("momentum must be in [0,1)");
  if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs)
    throw ContractError("epoch out of range");
  double frac = static_cast<double>(epoch) / cfg.epochs;
  int drops = 0;
  for (double p : cfg.lr_drop_points)
    if (p <= frac) ++drops;
  return cfg.lr0 / std::pow(cfg.lr_drop_factor, drops);
}

void sgd_update(Tensor& theta, const Tensor& grad, Tensor& velocity, double lr,
                double momentum, double weight_decay) {
  if (!theta.same_shape(grad) || !theta.same_shape(velocity))
    throw ShapeError("sgd_update shape mismatch");
  const float mu = static_cast<float>(momentum);
  const float wd = static_cast<float>(weight_decay);
  const float step = static_cast<float>(lr);
  for (int64_t i = 0; i < theta.numel(); ++i) {
    float g = grad[i] + wd * theta[i];
    velocity[i] = mu * velocity[i] + g;
    theta[i] -= step * (g + mu * velocity[i]);
  }
}

namespace {

Tensor gather_batch(const Dataset& ds, const std::vector<int64_t>& order,
                    int64_t lo, int64_t hi, bool augment_images, Rng* aug_rng) {
  const int64_t n = hi - lo;
  Tensor batch({n, 3, 32, 32});
  for (int64_t i = 0; i < n; ++i) {
    Tensor img = image_at(ds, order[static_cast<size_t>(lo + i)]);
    if (augment_images) img = augment(img, *aug_rng);
    std::copy(img.data(), img.data() + img.numel(),
              batch.data() + i * img.numel());
  }
  return batch;
}

int argmax_row(const float* row, int k) {
  int best = 0;
  for (int j = 1; j < k; ++j)
    if (row[j] > row[best]) best = j;  // ties go to the lowest index
  return best;
}

std::string format_row(const EpochRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%.10g,%.6f,%.6f,%.6f,%.3f", r.epoch,
                r.lr, r.train_loss, r.train_err, r.test_err, r.wall_time_s);
  return buf;
}

}  // namespace

std::string TrainLog::to_csv() const {
  std::string out = "epoch,lr,train_loss,train_err,test_err,wall_time_s\n";
  for (const auto& r : rows) out += format_row(r) + "\n";
  return out;
}

double evaluate(Model& model, const Dataset& ds, int batch_size, int64_t limit,
                int cycles_override) {
  const bool was_train = model.train_mode;
  model.train_mode = false;
  const int64_t n = limit > 0 ? std::min<int64_t>(limit, ds.size()) : ds.size();
  int64_t wrong = 0;
  const int k = model.spec.num_classes;
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  for (int64_t lo = 0; lo < n; lo += batch_size) {
    int64_t hi = std::min<int64_t>(lo + batch_size, n);
    Tensor batch = gather_batch(ds, order, lo, hi, false, nullptr);
    Tensor logits = forward_logits(model, batch, cycles_override);
    for (int64_t i = 0; i < hi - lo; ++i) {
      int pred = argmax_row(logits.data() + i * k, k);
      if (pred != ds.labels[static_cast<size_t>(lo + i)]) ++wrong;
    }
  }
  model.train_mode = was_train;
  return static_cast<double>(wrong) / static_cast<double>(n);
}

TrainLog train(Model& model, const Dataset& train_ds, const Dataset& test_ds,
               const TrainConfig& cfg) {
  cfg.validate();
  if (train_ds.num_classes != model.spec.num_classes)
    throw ConfigError("dataset has " + std::to_string(train_ds.num_classes) +
                      " classes, model expects " +
                      std::to_string(model.spec.num_classes));
  const bool io = !cfg.out_dir.empty();
  if (io) std::filesystem::create_directories(cfg.out_dir);

  auto params = model.parameters();
  std::vector<Tensor> velocity;
  velocity.reserve(params.size());
  for (auto& p : params) velocity.emplace_back(p.tensor->shape());

  TrainLog log;
  double best_err = 2.0;
  auto t_start = std::chrono::steady_clock::now();
  int64_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    model.train_mode = true;

    std::vector<int64_t> order(static_cast<size_t>(train_ds.size()));
    for (int64_t i = 0; i < train_ds.size(); ++i)
      order[static_cast<size_t>(i)] = i;
    Rng shuffle_rng(mix_seed(cfg.seed, 0x1000 + epoch));
    shuffle_rng.shuffle(order);
    Rng aug_rng(mix_seed(cfg.seed, 0x2000 + epoch));

    double loss_sum = 0.0;
    int64_t seen = 0, wrong = 0;
    for (int64_t lo = 0; lo < train_ds.size(); lo += cfg.batch_size) {
      int64_t hi = std::min<int64_t>(lo + cfg.batch_size, train_ds.size());
      Tensor batch =
          gather_batch(train_ds, order, lo, hi, cfg.augment, &aug_rng);
      std::vector<int> labels(static_cast<size_t>(hi - lo));
      for (int64_t i = 0; i < hi - lo; ++i)
        labels[static_cast<size_t>(i)] =
            train_ds.labels[static_cast<size_t>(order[lo + i])];

      Tape<float> tape;
      ModelVars<float> vars = bind_model(tape, model, true);
      Var<float> x = tape.leaf(std::move(batch), false);
      ForwardOut<float> out = model_forward(model, tape, vars, x);
      auto ce = ops::softmax_cross_entropy(out.logits, labels);
      tape.backward(ce.loss);

      const int k = model.spec.num_classes;
      for (int64_t i = 0; i < hi - lo; ++i) {
        int pred = argmax_row(ce.probs.data() + i * k, k);
        if (pred != labels[static_cast<size_t>(i)]) ++wrong;
      }
      loss_sum += static_cast<double>(ce.loss.value()[0]) * (hi - lo);
      seen += hi - lo;

      for (size_t p = 0; p < params.size(); ++p) {
        const Tensor& g = tape.grad(vars.ordered[p].id);
        if (!g.all_finite())
          throw Error("non-finite gradient in " + params[p].name +
                      " at step " + std::to_string(step));
        sgd_update(*params[p].tensor, g, velocity[p], lr, cfg.momentum,
                   cfg.weight_decay);
      }
      clamp_all_alphas(model);
      ++step;
    }

    model.train_mode = false;
    double test_err = evaluate(model, test_ds, 256, cfg.eval_limit);
    double wall =
        cfg.zero_wall_time
            ? 0.0
            : std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t_start)
                  .count();
    EpochRow row{epoch, lr, loss_sum / seen,
                 static_cast<double>(wrong) / seen, test_err, wall};
    log.rows.push_back(row);
    if (cfg.verbose)
      std::printf("epoch %3d  lr %.5f  loss %.4f  train_err %.4f  test_err %.4f\n",
                  epoch, lr, row.train_loss, row.train_err, row.test_err);

    if (io) {
      std::ofstream csv(cfg.out_dir + "/train_log.csv",
                        std::ios::binary | std::ios::trunc);
      if (!csv) throw IoError("cannot write " + cfg.out_dir + "/train_log.csv");
      csv << log.to_csv();
      save_checkpoint(model, cfg.out_dir + "/last.ckpt");
      if (test_err < best_err) {
        best_err = test_err;
        save_checkpoint(model, cfg.out_dir + "/best.ckpt");
      }
    } else if (test_err < best_err) {
      best_err = test_err;
    }
  }
  return log;
}

}  // namespace pcn
