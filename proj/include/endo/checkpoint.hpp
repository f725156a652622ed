#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "endo/tensor.hpp"

namespace endo {

// Binary parameter file: "NNCKPT1\n", then per block
//   u32 name length, name bytes, u32 rank, u32 dims..., f64 values
// with every integer and float little-endian.
inline constexpr char kCheckpointMagic[] = "NNCKPT1\n";

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);
NamedTensors read_checkpoint(const std::filesystem::path& path);

// Loads values into existing blocks by name; every block must be present
// with a matching shape.
void load_checkpoint(const std::filesystem::path& path, ParamStore& params);

}  // namespace endo
