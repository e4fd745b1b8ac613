#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "pcn/data.hpp"
#include "pcn/io.hpp"
#include "support/reference_ops.hpp"

using namespace pcn;

namespace {

std::string tmp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace

TEST_CASE("cifar10 loader round-trips the source bytes") {
  Dataset train = synthetic_dataset(10, 250, 7);
  Dataset test = synthetic_dataset(10, 60, 8);
  std::string dir = tmp_dir("pcn_cifar_fixture");
  write_cifar_dir(train, test, dir, false);

  auto [ltrain, ltest] = load_cifar10(dir);
  CHECK(ltrain.size() == 250);
  CHECK(ltest.size() == 60);
  for (int v : ltrain.labels) CHECK(v < 10);
  CHECK(ltrain.labels == train.labels);

  // re-serialization reproduces the on-disk bytes
  std::vector<uint8_t> reser = serialize_cifar_records(ltrain, false);
  std::string disk;
  for (int b = 1; b <= 5; ++b)
    disk += read_text_file(dir + "/data_batch_" + std::to_string(b) + ".bin");
  REQUIRE(disk.size() == reser.size());
  CHECK(std::memcmp(disk.data(), reser.data(), reser.size()) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pixel byte 255 maps to exactly 1.0") {
  Dataset ds;
  ds.images = tensor_full<float>({5, 3, 32, 32}, 1.0f);
  ds.labels = {0, 1, 2, 3, 4};
  std::string dir = tmp_dir("pcn_cifar_255");
  Dataset test = ds;
  write_cifar_dir(ds, test, dir, false);
  auto [train, t2] = load_cifar10(dir);
  for (int64_t i = 0; i < train.images.numel(); ++i)
    CHECK(train.images[i] == 1.0f);
  std::filesystem::remove_all(dir);
}

TEST_CASE("truncated batch files name the byte offset") {
  std::string dir = tmp_dir("pcn_cifar_trunc");
  Dataset train = synthetic_dataset(10, 10, 1);
  Dataset test = synthetic_dataset(10, 10, 2);
  write_cifar_dir(train, test, dir, false);
  std::string path = dir + "/data_batch_1.bin";
  std::string bytes = read_text_file(path);
  write_text_file(path, bytes.substr(0, bytes.size() - 100));
  try {
    load_cifar10(dir);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    std::string msg = e.what();
    CHECK(msg.find("data_batch_1.bin") != std::string::npos);
    CHECK(msg.find("offset") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("missing files raise I/O errors naming the file") {
  try {
    load_cifar10("/nonexistent_dir_pcn");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("data_batch_1.bin") != std::string::npos);
  }
}

TEST_CASE("cifar100 layout: two label bytes, fine label kept") {
  Dataset train = synthetic_dataset(100, 300, 3);
  Dataset test = synthetic_dataset(100, 100, 4);
  std::string dir = tmp_dir("pcn_cifar100_fixture");
  write_cifar_dir(train, test, dir, true);
  auto [ltrain, ltest] = load_cifar100(dir);
  CHECK(ltrain.size() == 300);
  CHECK(ltrain.num_classes == 100);
  for (int v : ltrain.labels) CHECK(v < 100);
  CHECK(ltrain.labels == train.labels);  // order preserved
  std::filesystem::remove_all(dir);
}

TEST_CASE("normalization: train moments go to ~0/1, constant channel guarded") {
  Dataset train = synthetic_dataset(10, 600, 5);
  Dataset test = synthetic_dataset(10, 100, 6);
  normalize_pair(train, test);
  const int64_t hw = 1024;
  for (int c = 0; c < 3; ++c) {
    double sum = 0, sq = 0;
    for (int64_t i = 0; i < train.size(); ++i) {
      const float* p = train.images.data() + (i * 3 + c) * hw;
      for (int64_t j = 0; j < hw; ++j) {
        sum += p[j];
        sq += static_cast<double>(p[j]) * p[j];
      }
    }
    double m = static_cast<double>(train.size() * hw);
    CHECK(std::abs(sum / m) < 1e-3);
    CHECK(std::abs(std::sqrt(sq / m) - 1.0) < 1e-3);
  }

  // constant channel: guarded divide keeps values finite (zeros)
  Dataset flat;
  flat.images = tensor_full<float>({4, 3, 32, 32}, 0.5f);
  flat.labels = {0, 1, 2, 3};
  Dataset stats_src = flat;
  Dataset out = normalize(flat, stats_src);
  for (int64_t i = 0; i < out.images.numel(); ++i)
    CHECK(out.images[i] == 0.0f);
}

TEST_CASE("test split uses train statistics") {
  Dataset train = synthetic_dataset(10, 500, 9);
  Dataset test = synthetic_dataset(10, 500, 10);
  normalize_pair(train, test);
  CHECK(train.channel_mean == test.channel_mean);
  // test moments near but not exactly 0/1
  double sum = 0;
  for (int64_t i = 0; i < test.images.numel(); ++i) sum += test.images[i];
  double mean = sum / test.images.numel();
  CHECK(std::abs(mean) < 0.05);
  CHECK(mean != 0.0);
}

TEST_CASE("augmentation: center crop without flip is the identity") {
  Dataset ds = synthetic_dataset(10, 10, 11);
  Tensor img = image_at(ds, 0);
  Tensor out = augment_shift_flip(img, 4, 4, false);
  CHECK(testing::max_abs_diff(img, out) == 0.0);
}

TEST_CASE("augmentation: double flip is the identity") {
  Dataset ds = synthetic_dataset(10, 10, 12);
  Tensor img = image_at(ds, 3);
  Tensor out = augment_shift_flip(augment_shift_flip(img, 4, 4, true), 4, 4, true);
  CHECK(testing::max_abs_diff(img, out) == 0.0);
}

TEST_CASE("corner crop shifts content by 4 pixels and zero-fills") {
  // marker image: a single bright pixel at (8, 8) on channel 0
  Tensor img({3, 32, 32});
  img[(0 * 32 + 8) * 32 + 8] = 1.0f;
  Tensor out = augment_shift_flip(img, 0, 0, false);
  // crop origin (0,0) of the padded canvas shifts content down-right by 4
  CHECK(out[(0 * 32 + 12) * 32 + 12] == 1.0f);
  // rows/cols that came from the zero pad stay zero
  for (int x = 0; x < 32; ++x) {
    CHECK(out[(0 * 32 + 0) * 32 + x] == 0.0f);
    CHECK(out[(0 * 32 + 3) * 32 + x] == 0.0f);
  }
}

TEST_CASE("augmentation preserves shape and the flip-only pixel multiset") {
  Dataset ds = synthetic_dataset(10, 13, 13);
  Tensor img = image_at(ds, 1);
  Tensor flipped = augment_shift_flip(img, 4, 4, true);
  CHECK(flipped.shape() == img.shape());
  std::vector<float> a(img.data(), img.data() + img.numel());
  std::vector<float> b(flipped.data(), flipped.data() + flipped.numel());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);
}

TEST_CASE("synthetic dataset: determinism, balance, separability") {
  Dataset a = synthetic_dataset(10, 1000, 21);
  Dataset b = synthetic_dataset(10, 1000, 21);
  CHECK(testing::max_abs_diff(a.images, b.images) == 0.0);
  CHECK(a.labels == b.labels);

  // balance within +-1
  std::vector<int> counts(10, 0);
  for (int v : a.labels) counts[static_cast<size_t>(v)]++;
  int mn = *std::min_element(counts.begin(), counts.end());
  int mx = *std::max_element(counts.begin(), counts.end());
  CHECK(mx - mn <= 1);

  CHECK_THROWS_AS(synthetic_dataset(10, 5, 1), ContractError);
}

TEST_CASE("a linear probe on raw pixels beats chance") {
  // nearest-centroid probe: train on 400, test on 200 held-out images
  Dataset train = synthetic_dataset(4, 400, 31);
  Dataset test = synthetic_dataset(4, 200, 32);
  const int64_t d = 3 * 32 * 32;
  std::vector<std::vector<double>> centroid(4, std::vector<double>(d, 0.0));
  std::vector<int> count(4, 0);
  for (int64_t i = 0; i < train.size(); ++i) {
    int lab = train.labels[static_cast<size_t>(i)];
    count[lab]++;
    const float* p = train.images.data() + i * d;
    for (int64_t j = 0; j < d; ++j) centroid[lab][j] += p[j];
  }
  for (int c = 0; c < 4; ++c)
    for (int64_t j = 0; j < d; ++j) centroid[c][j] /= count[c];
  int64_t hit = 0;
  for (int64_t i = 0; i < test.size(); ++i) {
    const float* p = test.images.data() + i * d;
    double best = 1e300;
    int arg = 0;
    for (int c = 0; c < 4; ++c) {
      double dist = 0;
      for (int64_t j = 0; j < d; ++j) {
        double diff = p[j] - centroid[c][j];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        arg = c;
      }
    }
    if (arg == test.labels[static_cast<size_t>(i)]) ++hit;
  }
  double acc = static_cast<double>(hit) / test.size();
  CHECK(acc > 0.5);  // chance is 0.25
}
