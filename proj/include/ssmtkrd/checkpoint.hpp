#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssmtkrd/types.hpp"

namespace ssmtkrd {

// Binary checkpoint layout (normative; see docs/checkpoint-format.md):
//   bytes 0..7   magic "SSMTKRD1"
//   bytes 8..11  header_len, u32 little-endian
//   bytes 12..   UTF-8 JSON header: config + ordered tensor manifest
//                (name, shape, dtype "f32", byte offset)
//   tensors      f32 little-endian, offsets ascending and 64-byte aligned
// File size equals the last offset plus the last tensor's byte length.

inline constexpr char kCheckpointMagic[8] = {'S', 'S', 'M', 'T', 'K', 'R', 'D', '1'};

// Seeded weights per the initialization rules: projections and biases
// uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], a_diag = -exp(u) with u
// uniform in [0, ln 16]. Identical (config, seed) gives identical tensors.
Model generate_model(const ModelConfig& cfg);

std::vector<uint8_t> serialize_checkpoint(const Model& model);
Model parse_checkpoint(std::span<const uint8_t> bytes);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

// generate_model + save_checkpoint.
void generate_checkpoint(const ModelConfig& cfg, const std::string& path);

}  // namespace ssmtkrd
