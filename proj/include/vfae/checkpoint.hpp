#pragma once

// Text checkpoint format (version 1):
//
//   VFAE-CHECKPOINT 1
//   count <n>
//   param <name> <rows> <cols>
//   <row-major values, one matrix row per line, 17 significant digits>
//   ...
//   end
//
// Names contain no whitespace. Values round-trip exactly.

#include <filesystem>
#include <iosfwd>

#include "vfae/tensor.hpp"

namespace vfae {

inline constexpr const char* kCheckpointMagic = "VFAE-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& os, const ParameterStore& store);
ParameterStore read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store);
ParameterStore load_checkpoint(const std::filesystem::path& path);

/// Loads values into an existing store; names and shapes must agree.
void load_checkpoint_into(const std::filesystem::path& path, ParameterStore& store);

}  // namespace vfae
