#pragma once

#include <array>
#include <string>
#include <vector>

#include "pcn/data.hpp"
#include "pcn/model.hpp"

namespace pcn {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 128;
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  uint64_t seed = 0;
  std::array<double, 3> lr_drop_points{0.5, 0.75, 0.875};
  double lr_drop_factor = 10.0;
  bool augment = true;
  // Writes 0.0 into the wall_time_s column so logs byte-reproduce.
  bool zero_wall_time = false;
  std::string out_dir;   // empty: no checkpoints / CSV
  int64_t eval_limit = 0;  // 0 = evaluate the whole test split
  bool verbose = false;

  void validate() const;
};

struct EpochRow {
  int epoch;
  double lr, train_loss, train_err, test_err, wall_time_s;
};

struct TrainLog {
  std::vector<EpochRow> rows;
  std::string to_csv() const;  // header: epoch,lr,train_loss,train_err,test_err,wall_time_s
};

// lr0 / factor^d, d = number of drop points f with f <= epoch/epochs.
double lr_schedule(int epoch, const TrainConfig& cfg);

// Nesterov step on one tensor: g' = g + wd*theta; v = mu*v + g';
// theta -= lr*(g' + mu*v).
void sgd_update(Tensor& theta, const Tensor& grad, Tensor& velocity, double lr,
                double momentum, double weight_decay);

// Error rate (1 - accuracy) with argmax ties broken toward the lowest index.
double evaluate(Model& model, const Dataset& ds, int batch_size = 256,
                int64_t limit = 0, int cycles_override = -1);

// Full loop: per-epoch shuffle + augmentation, train-mode BN, per-epoch eval,
// CSV log, best/last checkpoints under cfg.out_dir.
TrainLog train(Model& model, const Dataset& train_ds, const Dataset& test_ds,
               const TrainConfig& cfg);

}  // namespace pcn
