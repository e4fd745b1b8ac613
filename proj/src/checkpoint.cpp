#include "pcn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "pcn/config.hpp"

namespace pcn {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'N', 'C', 'K', 'P', 'T', '1'};

template <class T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const std::string& path) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated checkpoint: " + path);
  return v;
}

}  // namespace

void save_checkpoint(Model& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  auto tensors = model.state_tensors();
  write_pod<uint32_t>(os, static_cast<uint32_t>(tensors.size()));
  for (auto& ref : tensors) {
    write_pod<uint16_t>(os, static_cast<uint16_t>(ref.name.size()));
    os.write(ref.name.data(), static_cast<std::streamsize>(ref.name.size()));
    write_pod<uint8_t>(os, 0);  // f32
    const Tensor& t = *ref.tensor;
    write_pod<uint8_t>(os, static_cast<uint8_t>(t.rank()));
    for (int64_t d : t.shape()) write_pod<uint32_t>(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  KvText footer;
  footer.set("arch", arch_to_string(model.spec.arch));
  footer.set("cycles", std::to_string(model.spec.cycles));
  footer.set("classes", std::to_string(model.spec.num_classes));
  footer.set("plain", model.spec.plain ? "1" : "0");
  std::string text = footer.serialize();
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not a PCN checkpoint: " + path);
  uint32_t count = read_pod<uint32_t>(is, path);
  struct Rec {
    std::string name;
    Tensor tensor;
  };
  std::vector<Rec> recs;
  recs.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t nlen = read_pod<uint16_t>(is, path);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    uint8_t dtype = read_pod<uint8_t>(is, path);
    if (dtype != 0)
      throw IoError("checkpoint tensor '" + name +
                    "' has unsupported dtype tag " + std::to_string(dtype));
    uint8_t rank = read_pod<uint8_t>(is, path);
    Shape shape(rank);
    for (int r = 0; r < rank; ++r)
      shape[r] = read_pod<uint32_t>(is, path);
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!is) throw IoError("truncated checkpoint: " + path);
    recs.push_back({std::move(name), std::move(t)});
  }
  std::string footer((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
  KvText kv = KvText::parse(footer);
  ModelSpec spec = ModelSpec::make(
      arch_from_string(kv.get("arch")), std::stoi(kv.get("cycles")),
      std::stoi(kv.get("classes")), kv.get("plain") == "1");
  Model model = build_model<float>(spec, 0);
  auto tensors = model.state_tensors();
  if (tensors.size() != recs.size())
    throw IoError("checkpoint holds " + std::to_string(recs.size()) +
                  " tensors, model needs " + std::to_string(tensors.size()));
  for (size_t i = 0; i < recs.size(); ++i) {
    // order is fixed by state_tensors(); names double as a sanity check
    if (tensors[i].name != recs[i].name)
      throw IoError("checkpoint tensor '" + recs[i].name +
                    "' does not match expected '" + tensors[i].name + "'");
    if (tensors[i].tensor->shape() != recs[i].tensor.shape())
      throw IoError("checkpoint tensor '" + recs[i].name + "' has shape " +
                    shape_str(recs[i].tensor.shape()) + ", expected " +
                    shape_str(tensors[i].tensor->shape()));
    *tensors[i].tensor = std::move(recs[i].tensor);
  }
  return model;
}

}  // namespace pcn
