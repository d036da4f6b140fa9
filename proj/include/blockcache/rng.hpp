#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "blockcache/bytes.hpp"
#include "blockcache/crypto.hpp"

namespace blockcache {

// Deterministic random stream for simulations and experiments. mt19937_64
// output is pinned by the standard; the bounded/real mappings below avoid
// std::uniform_*_distribution, whose output is implementation-defined, so
// the same seed yields the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, bound) by rejection; bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    // Largest multiple of bound that fits in 64 bits.
    std::uint64_t rem = (std::uint64_t(0) - bound) % bound;
    std::uint64_t limit = std::uint64_t(0) - rem;  // 2^64 - rem, mod 2^64; 0 means "accept all"
    for (;;) {
      std::uint64_t x = gen_();
      if (limit == 0 || x < limit) return x % bound;
    }
  }

  // Uniform double in [0, 1) with 53 random bits.
  double real() { return double(gen_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 gen_;
};

// Stable 64-bit sub-seed derivation, e.g. per Monte Carlo trial, so parallel
// or reordered trials see identical streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t lane) {
  std::uint8_t buf[16];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(seed >> (56 - 8 * i));
  for (int i = 0; i < 8; ++i) buf[8 + i] = static_cast<std::uint8_t>(lane >> (56 - 8 * i));
  Digest d = sha256(ByteSpan(buf, sizeof buf));
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out = (out << 8) | d[i];
  return out;
}

}  // namespace blockcache
