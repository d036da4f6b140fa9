#include "blockcache/merkle.hpp"

#include <stdexcept>

#include "blockcache/encoding.hpp"

namespace blockcache {

static Digest leaf_digest(ByteSpan chunk) {
  const std::uint8_t tag = 0x00;
  return sha256_cat({ByteSpan(&tag, 1), chunk});
}

static Digest node_digest(const Digest& left, const Digest& right) {
  const std::uint8_t tag = 0x01;
  return sha256_cat({ByteSpan(&tag, 1), as_span(left), as_span(right)});
}

MerkleContent MerkleContent::from_bytes(Bytes content, std::size_t chunk_size) {
  if (content.empty() || chunk_size == 0)
    throw std::invalid_argument("content and chunk size must be non-empty");
  MerkleContent mc;
  mc.content_ = std::move(content);
  mc.chunk_size_ = chunk_size;

  std::vector<Digest> leaves;
  for (std::size_t off = 0; off < mc.content_.size(); off += chunk_size) {
    std::size_t len = std::min(chunk_size, mc.content_.size() - off);
    leaves.push_back(leaf_digest(ByteSpan(mc.content_.data() + off, len)));
  }
  mc.levels_.push_back(std::move(leaves));
  while (mc.levels_.back().size() > 1) {
    const auto& below = mc.levels_.back();
    std::vector<Digest> above;
    for (std::size_t i = 0; i < below.size(); i += 2) {
      if (i + 1 < below.size())
        above.push_back(node_digest(below[i], below[i + 1]));
      else
        above.push_back(below[i]);
    }
    mc.levels_.push_back(std::move(above));
  }
  return mc;
}

MerkleContent MerkleContent::synthetic(std::uint32_t provider, std::uint32_t content,
                                       std::size_t chunk_count, std::size_t chunk_size) {
  Bytes bytes;
  bytes.reserve(chunk_count * chunk_size);
  std::uint64_t counter = 0;
  Encoder seed;
  seed.put_u32(provider);
  seed.put_u32(content);
  while (bytes.size() < chunk_count * chunk_size) {
    Encoder e;
    e.put_bytes(as_span(seed.bytes()));
    e.put_u64(counter++);
    Digest d = sha256(as_span(e.bytes()));
    for (std::uint8_t b : d) {
      if (bytes.size() == chunk_count * chunk_size) break;
      bytes.push_back(b);
    }
  }
  return from_bytes(std::move(bytes), chunk_size);
}

Bytes MerkleContent::chunk(std::size_t index) const {
  std::size_t off = index * chunk_size_;
  if (off >= content_.size()) throw std::out_of_range("chunk index");
  std::size_t len = std::min(chunk_size_, content_.size() - off);
  return Bytes(content_.begin() + off, content_.begin() + off + len);
}

std::vector<Digest> MerkleContent::auth_path(std::size_t index) const {
  if (index >= leaf_count()) throw std::out_of_range("leaf index");
  std::vector<Digest> path;
  std::size_t pos = index;
  for (std::size_t level = 0; level + 1 < levels_.size(); ++level) {
    std::size_t sibling = pos ^ 1;
    if (sibling < levels_[level].size()) path.push_back(levels_[level][sibling]);
    pos >>= 1;
  }
  return path;
}

bool verify_merkle_path(const Digest& root, std::size_t leaf_count, std::size_t index,
                        ByteSpan chunk, const std::vector<Digest>& path) {
  if (leaf_count == 0 || index >= leaf_count) return false;
  Digest node = leaf_digest(chunk);
  std::size_t pos = index;
  std::size_t level_size = leaf_count;
  std::size_t used = 0;
  while (level_size > 1) {
    std::size_t sibling = pos ^ 1;
    if (sibling < level_size) {
      if (used >= path.size()) return false;
      const Digest& sib = path[used++];
      node = (pos & 1) ? node_digest(sib, node) : node_digest(node, sib);
    }
    pos >>= 1;
    level_size = (level_size + 1) / 2;
  }
  return used == path.size() && node == root;
}

PoRChallenge por_challenge(const Digest& seed, std::size_t leaf_count, std::size_t count) {
  if (count == 0) throw std::invalid_argument("challenge count must be at least 1");
  if (count > leaf_count) throw std::invalid_argument("challenge count exceeds leaf count");

  if (leaf_count > 256) throw std::invalid_argument("leaf count above 256 unsupported");

  PoRChallenge ch;
  ch.leaf_count = leaf_count;
  // Unbiased per-byte rejection against the largest multiple of leaf_count.
  const std::uint32_t bound = static_cast<std::uint32_t>(leaf_count);
  const std::uint32_t accept = 256 / bound * bound;
  Digest stream = seed;
  std::size_t offset = 0;
  while (ch.indices.size() < count) {
    if (offset == stream.size()) {
      stream = sha256(as_span(stream));
      offset = 0;
    }
    std::uint8_t byte = stream[offset++];
    if (byte < accept) ch.indices.push_back(byte % bound);
  }
  return ch;
}

PoRResponse por_respond(const MerkleContent& held, const PoRChallenge& challenge) {
  PoRResponse resp;
  for (std::uint32_t idx : challenge.indices) {
    PoRResponse::Proof p;
    if (idx < held.leaf_count()) {
      p.chunk = held.chunk(idx);
      p.path = held.auth_path(idx);
    }
    resp.proofs.push_back(std::move(p));
  }
  return resp;
}

bool por_verify(const Digest& root, const PoRChallenge& challenge, const PoRResponse& response) {
  if (challenge.indices.empty()) return false;  // vacuous proofs are not accepted
  if (response.proofs.size() != challenge.indices.size()) return false;
  for (std::size_t i = 0; i < challenge.indices.size(); ++i) {
    const auto& proof = response.proofs[i];
    if (!verify_merkle_path(root, challenge.leaf_count, challenge.indices[i],
                            as_span(proof.chunk), proof.path))
      return false;
  }
  return true;
}

}  // namespace blockcache
