#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "pcn/rng.hpp"
#include "pcn/tensor.hpp"

namespace pcn {

struct Dataset {
  Tensor images;  // [N, 3, 32, 32], values start in [0,1]
  std::vector<int> labels;
  int num_classes = 10;
  std::array<float, 3> channel_mean{0.f, 0.f, 0.f};
  std::array<float, 3> channel_std{1.f, 1.f, 1.f};
  bool normalized = false;

  int64_t size() const { return images.empty() ? 0 : images.dim(0); }
};

// Standard CIFAR binary batches: each record is 1 label byte (CIFAR-10) or
// 2 label bytes (CIFAR-100 coarse,fine) followed by 3072 channel-planar
// pixel bytes. Pixels are scaled to [0,1].
std::pair<Dataset, Dataset> load_cifar10(const std::string& dir);
std::pair<Dataset, Dataset> load_cifar100(const std::string& dir);

// Re-emits records in the binary batch layout (inverse of the loader's
// parse, before normalization).
std::vector<uint8_t> serialize_cifar_records(const Dataset& ds,
                                             bool cifar100_layout);
// Writes data_batch_1..5.bin + test_batch.bin (or train.bin/test.bin).
void write_cifar_dir(const Dataset& train, const Dataset& test,
                     const std::string& dir, bool cifar100_layout);

// x := (x - mean_c) / max(std_c, 1e-8), stats from the training split.
void compute_channel_stats(Dataset& ds);
void apply_normalization(Dataset& ds, const std::array<float, 3>& mean,
                         const std::array<float, 3>& stddev);
Dataset normalize(Dataset ds, const Dataset& stats_from);
// Computes stats on train, applies them to both splits.
void normalize_pair(Dataset& train, Dataset& test);

// Zero-pad 4, random 32x32 crop, horizontal flip with p=0.5.
Tensor augment_shift_flip(const Tensor& image, int dx, int dy, bool flip);
Tensor augment(const Tensor& image, Rng& rng);

// Class-separable oriented gratings plus noise; balanced labels.
Dataset synthetic_dataset(int num_classes, int64_t n, uint64_t seed);

Dataset take(const Dataset& ds, int64_t n);
Tensor image_at(const Dataset& ds, int64_t index);

}  // namespace pcn
