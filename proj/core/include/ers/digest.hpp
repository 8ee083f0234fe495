#pragma once

#include <string>
#include <string_view>
#include <cstdint>

namespace ers {

/// 128-bit content fingerprint: SHA-256 truncated to its first 16 bytes and
/// rendered as 32 lowercase hex characters. Stable across runs and platforms.
std::string fingerprint_hex(std::string_view bytes);

/// Deterministic 64-bit hash (FNV-1a). Used for deriving RNG stream seeds
/// from string keys, not for content integrity.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace ers
