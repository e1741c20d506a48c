#pragma once

#include <string>

#include "offrec/params.hpp"

namespace offrec::nn {

// Binary checkpoint format:
//   magic "ORECv1" (6 bytes), endianness flag (1 byte, 0x01 = little),
//   u32 parameter count, then per parameter:
//   u32 name length, name bytes (UTF-8), u32 ndims, u64 dims...,
//   raw little-endian f64 values.
void save_checkpoint(const ParamStore& store, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

}  // namespace offrec::nn
