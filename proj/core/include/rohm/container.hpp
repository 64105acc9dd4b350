#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "rohm/common.hpp"

namespace rohm {

// Simple self-describing binary container for named arrays.
//
// Layout (little endian):
//   magic   "ROHM" (4 bytes)
//   version u32
//   count   u32
//   then per array:
//     name_len u32, name bytes
//     dtype    u32  (0 = float32, 1 = uint8)
//     ndim     u32
//     shape    ndim x i64
//     payload  raw bytes, C order
//
// float64 tensors are stored as float32 on disk; uint8 stays uint8.
// Reading returns exactly the on-disk dtypes.

constexpr uint32_t kContainerVersion = 1;

using NamedArrays = std::map<std::string, Tensor>;

void write_container(const std::filesystem::path& path, const NamedArrays& arrays);
NamedArrays read_container(const std::filesystem::path& path);

}  // namespace rohm
