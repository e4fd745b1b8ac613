#pragma once

#include <string>

#include "pcn/tensor.hpp"

namespace pcn {

// Binary PGM (P5, maxval 255) from a [H,W] map with values in [0,1].
void write_pgm(const std::string& path, const Tensor& map01);

struct PgmImage {
  int64_t h = 0, w = 0;
  std::vector<uint8_t> pixels;
};
PgmImage read_pgm(const std::string& path);

// Raw little-endian f32 dump with a two-u32 header (H, W).
void write_raw_map(const std::string& path, const Tensor& map);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace pcn
