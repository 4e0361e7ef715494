// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include <nlohmann/json.hpp>

#include "tailcast/nn.hpp"

namespace tailcast::nn {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  ParamSet params;
  nlohmann::json metadata;
};

/// Writes `<manifest>` (JSON) and a sibling blob with the ".bin" extension
/// holding little-endian float64 tensors in manifest order. The manifest
/// carries shapes, byte offsets and the blob CRC-32.
void save_checkpoint(const std::filesystem::path& manifest, const ParamSet& params,
                     const nlohmann::json& metadata);

Checkpoint load_checkpoint(const std::filesystem::path& manifest);

std::uint32_t crc32(std::span<const unsigned char> bytes);

}  // namespace tailcast::nn
