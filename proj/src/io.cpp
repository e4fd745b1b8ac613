#include "pcn/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace pcn {

void write_pgm(const std::string& path, const Tensor& map01) {
  if (map01.rank() != 2)
    throw ShapeError("write_pgm expects [H,W], got " +
                     shape_str(map01.shape()));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write PGM: " + path);
  f << "P5\n" << map01.dim(1) << " " << map01.dim(0) << "\n255\n";
  for (int64_t i = 0; i < map01.numel(); ++i) {
    float v = std::min(1.0f, std::max(0.0f, map01[i]));
    f.put(static_cast<char>(std::lround(v * 255.0f)));
  }
  if (!f) throw IoError("failed writing PGM: " + path);
}

PgmImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open PGM: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw IoError("not a binary PGM (P5): " + path);
  int64_t w, h, maxval;
  f >> w >> h >> maxval;
  if (!f || maxval != 255) throw IoError("unsupported PGM header: " + path);
  f.get();  // single whitespace after maxval
  PgmImage img;
  img.h = h;
  img.w = w;
  img.pixels.resize(static_cast<size_t>(h * w));
  f.read(reinterpret_cast<char*>(img.pixels.data()),
         static_cast<std::streamsize>(img.pixels.size()));
  if (!f) throw IoError("truncated PGM: " + path);
  return img;
}

void write_raw_map(const std::string& path, const Tensor& map) {
  if (map.rank() != 2)
    throw ShapeError("write_raw_map expects [H,W], got " +
                     shape_str(map.shape()));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write raw map: " + path);
  uint32_t hw[2] = {static_cast<uint32_t>(map.dim(0)),
                    static_cast<uint32_t>(map.dim(1))};
  f.write(reinterpret_cast<const char*>(hw), sizeof(hw));
  f.write(reinterpret_cast<const char*>(map.data()),
          static_cast<std::streamsize>(map.numel() * sizeof(float)));
  if (!f) throw IoError("failed writing raw map: " + path);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write file: " + path);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("failed writing file: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace pcn
