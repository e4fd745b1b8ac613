#include "pcn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "pcn/errors.hpp"

namespace pcn {

namespace {

constexpr int64_t kImagePixels = 3 * 32 * 32;

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open dataset file: " + path);
  f.seekg(0, std::ios::end);
  std::streamoff len = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(len));
  f.read(reinterpret_cast<char*>(bytes.data()), len);
  if (!f) throw IoError("failed reading dataset file: " + path);
  return bytes;
}

// Appends records from one batch file. label_bytes is 1 (CIFAR-10) or
// 2 (CIFAR-100: coarse then fine; the fine label is kept).
void parse_batch(const std::string& path, int label_bytes,
                 std::vector<float>& pixels, std::vector<int>& labels) {
  std::vector<uint8_t> bytes = read_file_bytes(path);
  const int64_t rec = label_bytes + kImagePixels;
  const int64_t n = static_cast<int64_t>(bytes.size()) / rec;
  if (static_cast<int64_t>(bytes.size()) % rec != 0)
    throw IoError("truncated record in " + path + " at byte offset " +
                  std::to_string(n * rec) + " (file size " +
                  std::to_string(bytes.size()) + ", record size " +
                  std::to_string(rec) + ")");
  if (n == 0) throw IoError("dataset file is empty: " + path);
  pixels.reserve(pixels.size() + static_cast<size_t>(n * kImagePixels));
  labels.reserve(labels.size() + static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const uint8_t* r = bytes.data() + i * rec;
    labels.push_back(static_cast<int>(r[label_bytes - 1]));
    const uint8_t* px = r + label_bytes;
    for (int64_t j = 0; j < kImagePixels; ++j)
      pixels.push_back(static_cast<float>(px[j]) / 255.0f);
  }
}

Dataset make_dataset(std::vector<float> pixels, std::vector<int> labels,
                     int num_classes) {
  Dataset ds;
  int64_t n = static_cast<int64_t>(labels.size());
  ds.images = Tensor({n, 3, 32, 32}, std::move(pixels));
  ds.labels = std::move(labels);
  ds.num_classes = num_classes;
  for (int v : ds.labels)
    if (v < 0 || v >= num_classes)
      throw IoError("dataset label " + std::to_string(v) +
                    " outside [0," + std::to_string(num_classes) + ")");
  return ds;
}

}  // namespace

std::pair<Dataset, Dataset> load_cifar10(const std::string& dir) {
  std::vector<float> px;
  std::vector<int> labels;
  for (int b = 1; b <= 5; ++b)
    parse_batch(dir + "/data_batch_" + std::to_string(b) + ".bin", 1, px,
                labels);
  Dataset train = make_dataset(std::move(px), std::move(labels), 10);
  std::vector<float> tpx;
  std::vector<int> tlabels;
  parse_batch(dir + "/test_batch.bin", 1, tpx, tlabels);
  Dataset test = make_dataset(std::move(tpx), std::move(tlabels), 10);
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> load_cifar100(const std::string& dir) {
  std::vector<float> px;
  std::vector<int> labels;
  parse_batch(dir + "/train.bin", 2, px, labels);
  Dataset train = make_dataset(std::move(px), std::move(labels), 100);
  std::vector<float> tpx;
  std::vector<int> tlabels;
  parse_batch(dir + "/test.bin", 2, tpx, tlabels);
  Dataset test = make_dataset(std::move(tpx), std::move(tlabels), 100);
  return {std::move(train), std::move(test)};
}

std::vector<uint8_t> serialize_cifar_records(const Dataset& ds,
                                             bool cifar100_layout) {
  if (ds.normalized)
    throw ContractError("cannot re-serialize a normalized dataset");
  const int label_bytes = cifar100_layout ? 2 : 1;
  const int64_t rec = label_bytes + kImagePixels;
  std::vector<uint8_t> out(static_cast<size_t>(ds.size() * rec));
  for (int64_t i = 0; i < ds.size(); ++i) {
    uint8_t* r = out.data() + i * rec;
    // CIFAR-100 re-serialization writes the fine label into both slots;
    // the loader ignores the coarse byte.
    for (int b = 0; b < label_bytes; ++b)
      r[b] = static_cast<uint8_t>(ds.labels[static_cast<size_t>(i)]);
    const float* px = ds.images.data() + i * kImagePixels;
    for (int64_t j = 0; j < kImagePixels; ++j)
      r[label_bytes + j] =
          static_cast<uint8_t>(std::lround(px[j] * 255.0f));
  }
  return out;
}

void write_cifar_dir(const Dataset& train, const Dataset& test,
                     const std::string& dir, bool cifar100_layout) {
  std::filesystem::create_directories(dir);
  auto write = [](const std::string& path, const uint8_t* p, size_t n) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write dataset file: " + path);
    f.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  std::vector<uint8_t> tr = serialize_cifar_records(train, cifar100_layout);
  std::vector<uint8_t> te = serialize_cifar_records(test, cifar100_layout);
  if (cifar100_layout) {
    write(dir + "/train.bin", tr.data(), tr.size());
    write(dir + "/test.bin", te.data(), te.size());
    return;
  }
  const int64_t rec = 1 + kImagePixels;
  const int64_t n = train.size();
  const int64_t per = (n + 4) / 5;
  for (int b = 0; b < 5; ++b) {
    int64_t lo = std::min<int64_t>(b * per, n);
    int64_t hi = std::min<int64_t>(lo + per, n);
    write(dir + "/data_batch_" + std::to_string(b + 1) + ".bin",
          tr.data() + lo * rec, static_cast<size_t>((hi - lo) * rec));
  }
  write(dir + "/test_batch.bin", te.data(), te.size());
}

void compute_channel_stats(Dataset& ds) {
  const int64_t n = ds.size();
  const int64_t hw = 32 * 32;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0, sq = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const float* p = ds.images.data() + (i * 3 + c) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        sum += p[j];
        sq += static_cast<double>(p[j]) * p[j];
      }
    }
    const double m = static_cast<double>(n * hw);
    double mean = sum / m;
    double var = sq / m - mean * mean;
    if (var < 0) var = 0;
    ds.channel_mean[c] = static_cast<float>(mean);
    ds.channel_std[c] = static_cast<float>(std::sqrt(var));
  }
}

void apply_normalization(Dataset& ds, const std::array<float, 3>& mean,
                         const std::array<float, 3>& stddev) {
  const int64_t n = ds.size();
  const int64_t hw = 32 * 32;
  for (int c = 0; c < 3; ++c) {
    const float m = mean[c];
    const float inv = 1.0f / std::max(stddev[c], 1e-8f);
    for (int64_t i = 0; i < n; ++i) {
      float* p = ds.images.data() + (i * 3 + c) * hw;
      for (int64_t j = 0; j < hw; ++j) p[j] = (p[j] - m) * inv;
    }
  }
  ds.channel_mean = mean;
  ds.channel_std = stddev;
  ds.normalized = true;
}

Dataset normalize(Dataset ds, const Dataset& stats_from) {
  Dataset stats = stats_from;  // stats are recomputed, source left untouched
  compute_channel_stats(stats);
  apply_normalization(ds, stats.channel_mean, stats.channel_std);
  return ds;
}

void normalize_pair(Dataset& train, Dataset& test) {
  compute_channel_stats(train);
  auto mean = train.channel_mean;
  auto stddev = train.channel_std;
  apply_normalization(train, mean, stddev);
  apply_normalization(test, mean, stddev);
}

Tensor augment_shift_flip(const Tensor& image, int dx, int dy, bool flip) {
  if (image.shape() != Shape{3, 32, 32})
    throw ShapeError("augment expects a [3,32,32] image, got " +
                     shape_str(image.shape()));
  if (dx < 0 || dx > 8 || dy < 0 || dy > 8)
    throw ContractError("crop offset must be in [0,8]");
  Tensor out({3, 32, 32});
  // crop window starts at (dy, dx) inside the zero-padded 40x40 canvas
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 32; ++y) {
      int sy = y + dy - 4;
      for (int x = 0; x < 32; ++x) {
        int sx = x + dx - 4;
        float v = 0.0f;
        if (sy >= 0 && sy < 32 && sx >= 0 && sx < 32)
          v = image[(c * 32 + sy) * 32 + sx];
        int ox = flip ? 31 - x : x;
        out[(c * 32 + y) * 32 + ox] = v;
      }
    }
  }
  return out;
}

Tensor augment(const Tensor& image, Rng& rng) {
  int dx = static_cast<int>(rng.below(9));
  int dy = static_cast<int>(rng.below(9));
  bool flip = rng.coin();
  return augment_shift_flip(image, dx, dy, flip);
}

Dataset synthetic_dataset(int num_classes, int64_t n, uint64_t seed) {
  if (num_classes < 2) throw ContractError("need at least 2 classes");
  if (n < num_classes) throw ContractError("need n >= num_classes");
  Rng rng(mix_seed(seed, 0x5d47));
  Dataset ds;
  ds.images = Tensor({n, 3, 32, 32});
  ds.labels.resize(static_cast<size_t>(n));
  ds.num_classes = num_classes;
  const double pi = 3.14159265358979323846;
  for (int64_t i = 0; i < n; ++i) {
    int label = static_cast<int>(i % num_classes);
    ds.labels[static_cast<size_t>(i)] = label;
    double theta = pi * label / num_classes;
    double freq = 2.0 + (label % 3);
    double phase = rng.uniform(-0.5, 0.5);
    double co = std::cos(theta), si = std::sin(theta);
    for (int c = 0; c < 3; ++c) {
      double amp = 0.22 + 0.04 * c;
      float* plane = ds.images.data() + (i * 3 + c) * 1024;
      for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
          double u = (x * co + y * si) / 32.0;
          double v = 0.5 + amp * std::sin(2.0 * pi * freq * u + phase) +
                     0.15 * rng.normal();
          plane[y * 32 + x] =
              static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
  }
  return ds;
}

Dataset take(const Dataset& ds, int64_t n) {
  if (n <= 0 || n >= ds.size()) return ds;
  Dataset out;
  out.images = Tensor({n, 3, 32, 32},
                      std::vector<float>(ds.images.data(),
                                         ds.images.data() + n * kImagePixels));
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + n);
  out.num_classes = ds.num_classes;
  out.channel_mean = ds.channel_mean;
  out.channel_std = ds.channel_std;
  out.normalized = ds.normalized;
  return out;
}

Tensor image_at(const Dataset& ds, int64_t index) {
  if (index < 0 || index >= ds.size())
    throw ContractError("image index out of range");
  return Tensor({3, 32, 32},
                std::vector<float>(ds.images.data() + index * kImagePixels,
                                   ds.images.data() + (index + 1) * kImagePixels));
}

}  // namespace pcn
