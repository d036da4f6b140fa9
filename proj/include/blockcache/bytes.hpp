#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace blockcache {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

// 32-byte SHA-256 output; used for addresses, transaction ids, block heads
// and Merkle nodes alike.
using Digest = std::array<std::uint8_t, 32>;

inline constexpr Digest kZeroDigest{};

std::string to_hex(ByteSpan data);
inline std::string to_hex(const Digest& d) { return to_hex(ByteSpan(d.data(), d.size())); }

// Returns false on odd length or non-hex characters.
bool from_hex(const std::string& hex, Bytes& out);

inline ByteSpan as_span(const Bytes& b) { return ByteSpan(b.data(), b.size()); }
inline ByteSpan as_span(const Digest& d) { return ByteSpan(d.data(), d.size()); }
inline ByteSpan as_span(const std::string& s) {
  return ByteSpan(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

inline Bytes to_bytes(ByteSpan s) { return Bytes(s.begin(), s.end()); }
inline Bytes to_bytes(const std::string& s) { return to_bytes(as_span(s)); }

}  // namespace blockcache
