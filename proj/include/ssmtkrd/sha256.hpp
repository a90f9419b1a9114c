#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace ssmtkrd {

// Plain SHA-256, used for checkpoint fingerprints in the CLI and tests.
std::string sha256_hex(std::span<const uint8_t> data);

}  // namespace ssmtkrd
