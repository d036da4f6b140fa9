#include "blockcache/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <cstring>
#include <stdexcept>

namespace blockcache {

namespace {

// One context per thread; EVP_DigestInit_ex resets it for every use.
EVP_MD_CTX* digest_ctx() {
  thread_local EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
  return ctx;
}

constexpr char kPkTag[] = "blockcache.pk.v1";

}  // namespace

Digest sha256(ByteSpan data) { return sha256_cat({data}); }

Digest sha256_cat(std::initializer_list<ByteSpan> parts) {
  EVP_MD_CTX* ctx = digest_ctx();
  if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 init failed");
  for (ByteSpan p : parts) {
    if (!p.empty() && EVP_DigestUpdate(ctx, p.data(), p.size()) != 1)
      throw std::runtime_error("sha256 update failed");
  }
  Digest out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size())
    throw std::runtime_error("sha256 final failed");
  return out;
}

Digest hmac_sha256(ByteSpan key, ByteSpan data) {
  Digest out{};
  unsigned int len = 0;
  if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(),
            out.data(), &len) ||
      len != out.size())
    throw std::runtime_error("hmac failed");
  return out;
}

Digest derive_address(ByteSpan public_key) {
  if (public_key.empty()) throw std::invalid_argument("derive_address: empty public key");
  return sha256(public_key);
}

NodeIdentity NodeIdentity::from_seed(ByteSpan seed) {
  NodeIdentity id;
  Digest sk = sha256(seed);
  id.secret_key.assign(sk.begin(), sk.end());
  Digest pk = sha256_cat({as_span(std::string(kPkTag)), as_span(id.secret_key)});
  id.public_key.assign(pk.begin(), pk.end());
  id.address = derive_address(as_span(id.public_key));
  return id;
}

Bytes NodeIdentity::sign(ByteSpan message) const {
  Digest tag = hmac_sha256(as_span(public_key), message);
  return Bytes(tag.begin(), tag.end());
}

bool verify_signature(ByteSpan public_key, ByteSpan message, ByteSpan signature) {
  if (public_key.empty() || signature.size() != 32) return false;
  Digest expect = hmac_sha256(public_key, message);
  // Constant-time compare; the simulator does not need it but it costs nothing.
  unsigned char diff = 0;
  for (size_t i = 0; i < expect.size(); ++i) diff |= expect[i] ^ signature[i];
  return diff == 0;
}

}  // namespace blockcache
