#pragma once

#include <cstdint>
#include <vector>

#include "blockcache/bytes.hpp"
#include "blockcache/crypto.hpp"

namespace blockcache {

// Chunked content with a Merkle tree over the chunk digests. Leaf nodes are
// H(0x00 || chunk), inner nodes H(0x01 || left || right); a node without a
// sibling is promoted unchanged.
class MerkleContent {
 public:
  static MerkleContent from_bytes(Bytes content, std::size_t chunk_size);

  // Reproducible pseudorandom content for the (provider, content) pair, so
  // roots match across runs and processes.
  static MerkleContent synthetic(std::uint32_t provider, std::uint32_t content,
                                 std::size_t chunk_count, std::size_t chunk_size);

  const Digest& root() const { return levels_.back()[0]; }
  std::size_t leaf_count() const { return levels_[0].size(); }
  std::size_t chunk_size() const { return chunk_size_; }
  const Bytes& bytes() const { return content_; }

  Bytes chunk(std::size_t index) const;
  // Sibling digests from leaf level upward; levels where the node has no
  // sibling contribute nothing.
  std::vector<Digest> auth_path(std::size_t index) const;

 private:
  Bytes content_;
  std::size_t chunk_size_ = 0;
  std::vector<std::vector<Digest>> levels_;
};

// Recomputes the root from one chunk and its authentication path. Returns
// false on any mismatch or malformed path; never throws.
bool verify_merkle_path(const Digest& root, std::size_t leaf_count, std::size_t index,
                        ByteSpan chunk, const std::vector<Digest>& path);

struct PoRChallenge {
  std::size_t leaf_count = 0;
  std::vector<std::uint32_t> indices;  // drawn independently, repeats allowed
};

struct PoRResponse {
  struct Proof {
    Bytes chunk;
    std::vector<Digest> path;
  };
  std::vector<Proof> proofs;  // one per challenged index, in order
};

// Draws `count` independent uniform leaf indices from the seed digest
// (rejection sampling; stream extends by re-digesting). Requires
// 1 <= count <= leaf_count.
PoRChallenge por_challenge(const Digest& seed, std::size_t leaf_count, std::size_t count);

// Answers a challenge from locally held content (whatever its bytes are; a
// prover missing chunks simply produces proofs that fail verification).
PoRResponse por_respond(const MerkleContent& held, const PoRChallenge& challenge);

// True iff every challenged index carries a valid proof against the
// committed root. Never throws on malformed input.
bool por_verify(const Digest& root, const PoRChallenge& challenge, const PoRResponse& response);

}  // namespace blockcache
