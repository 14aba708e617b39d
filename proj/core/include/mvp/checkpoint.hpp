#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvp/parameters.hpp"

namespace mvp {

// Versioned binary checkpoint: "MVPC" magic, architecture descriptor,
// little-endian 64-bit tensors in the fixed traversal order, and a trailing
// FNV-1a checksum over everything before it.  Loading a tampered file raises
// VerificationError.
void save_checkpoint(const Parameters& params, const std::string& path);
Parameters load_checkpoint(const std::string& path);

std::uint64_t fnv1a64(const unsigned char* data, std::size_t len);

}  // namespace mvp
