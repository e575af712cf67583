#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fermi/drqn.hpp"

namespace fermi {

/// Binary model file, little-endian:
///   "DRQN" | u32 version | u32 obs_dim | u32 hidden | u32 num_channels
///   | u64 param_count | param_count x f64 in ParamLayout order
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const DrqnNet& net);
DrqnNet decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const DrqnNet& net);
DrqnNet load_checkpoint(const std::filesystem::path& path);

}  // namespace fermi
