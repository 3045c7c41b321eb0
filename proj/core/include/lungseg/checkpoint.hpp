#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lungseg/unet.hpp"

namespace lungseg {

/// Checkpoint layout, all integers uint32 little-endian:
///   "LUNGSEG1" | depth | base_channels | input_size |
///   per parameter in declaration order: n c h w | n*c*h*w float32 LE
std::vector<std::uint8_t> serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Throws FileMissing or CheckpointError.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace lungseg
