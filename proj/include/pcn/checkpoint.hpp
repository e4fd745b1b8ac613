#pragma once

#include <string>

#include "pcn/model.hpp"

namespace pcn {

// Container layout (little-endian):
//   magic "PCNCKPT1"
//   u32 tensor count
//   per tensor: u16 name length, name bytes, u8 dtype (0=f32, 1=f64),
//               u8 rank, u32 dims[rank], raw element data
//   footer: the model spec as key=value text (arch/cycles/classes/plain)
// Round-trips are bit-exact.
void save_checkpoint(Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace pcn
