#pragma once

#include <initializer_list>

#include "blockcache/bytes.hpp"

namespace blockcache {

Digest sha256(ByteSpan data);
// Digest of the concatenation of several fragments, without materializing it.
Digest sha256_cat(std::initializer_list<ByteSpan> parts);

// HMAC-SHA256(key, data).
Digest hmac_sha256(ByteSpan key, ByteSpan data);

// Node address per the ledger rules: the digest of the public key.
Digest derive_address(ByteSpan public_key);

// Key pair and address of one market participant (CP, CH, mobile user or
// contract account).
//
// The scheme is a deterministic keyed-digest construction, not a
// curve-based signature: pk = H(tag || sk) and a signature is
// HMAC-SHA256(pk, message). Verification needs only the public key, which
// the chain file publishes in its key directory. This authenticates
// messages against accidental or bit-level tampering; it is not
// forgery-resistant against a holder of the public key, which matches the
// simulator's honest-but-verifiable threat model. Signing sits behind
// this interface so a production scheme can replace it.
struct NodeIdentity {
  Bytes secret_key;
  Bytes public_key;
  Digest address{};

  // Deterministically derives an identity from seed material.
  static NodeIdentity from_seed(ByteSpan seed);

  Bytes sign(ByteSpan message) const;
};

bool verify_signature(ByteSpan public_key, ByteSpan message, ByteSpan signature);

}  // namespace blockcache
