#include "blockcache/encoding.hpp"

namespace blockcache {

void Encoder::put_u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8)
    buf_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Encoder::put_u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8)
    buf_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Encoder::put_bytes(ByteSpan b) {
  put_u32(static_cast<std::uint32_t>(b.size()));
  buf_.insert(buf_.end(), b.begin(), b.end());
}

std::uint8_t Decoder::get_u8() {
  need(1);
  return data_[pos_++];
}

std::uint32_t Decoder::get_u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
  return v;
}

std::uint64_t Decoder::get_u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
  return v;
}

Digest Decoder::get_digest() {
  need(32);
  Digest d;
  for (auto& b : d) b = data_[pos_++];
  return d;
}

Bytes Decoder::get_bytes(std::size_t max_len) {
  std::uint32_t len = get_u32();
  if (len > max_len) throw DecodeError("byte string length out of range");
  need(len);
  Bytes out(data_.begin() + pos_, data_.begin() + pos_ + len);
  pos_ += len;
  return out;
}

bool Decoder::get_bool() {
  std::uint8_t v = get_u8();
  if (v > 1) throw DecodeError("invalid boolean byte");
  return v == 1;
}

std::optional<Digest> Decoder::get_optional_digest() {
  if (!get_bool()) return std::nullopt;
  return get_digest();
}

}  // namespace blockcache
