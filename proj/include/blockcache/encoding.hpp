#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "blockcache/bytes.hpp"

namespace blockcache {

// Canonical encoding: fixed-width big-endian integers, u32-length-prefixed
// byte strings, u32-count-prefixed lists, one-byte presence flags for
// optional fields, fields concatenated in declared order. The full layout
// is documented in docs/FORMATS.md and is byte-for-byte normative: block
// heads and transaction ids are digests of these encodings.
class Encoder {
 public:
  void put_u8(std::uint8_t v) { buf_.push_back(v); }
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_digest(const Digest& d) { buf_.insert(buf_.end(), d.begin(), d.end()); }
  void put_bytes(ByteSpan b);
  void put_bool(bool b) { put_u8(b ? 1 : 0); }
  void put_optional_digest(const std::optional<Digest>& d) {
    put_bool(d.has_value());
    if (d) put_digest(*d);
  }

  const Bytes& bytes() const { return buf_; }
  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

struct DecodeError : std::runtime_error {
  explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

// Bounds-checked reader over an immutable buffer; throws DecodeError on
// truncation or malformed prefixes, never reads past the end.
class Decoder {
 public:
  explicit Decoder(ByteSpan data) : data_(data) {}

  std::uint8_t get_u8();
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  Digest get_digest();
  Bytes get_bytes(std::size_t max_len = kMaxBytesLen);
  bool get_bool();
  std::optional<Digest> get_optional_digest();

  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }
  void expect_done() const {
    if (!done()) throw DecodeError("trailing bytes after decoded value");
  }

  static constexpr std::size_t kMaxBytesLen = 1u << 24;

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw DecodeError("unexpected end of input");
  }
  ByteSpan data_;
  std::size_t pos_ = 0;
};

}  // namespace blockcache
