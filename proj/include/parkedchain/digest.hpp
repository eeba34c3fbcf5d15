#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace parkedchain {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> bytes);
Digest sha256(std::string_view text);
Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> bytes);

std::string to_hex(const Digest& d);
Digest from_hex(std::string_view hex);

/// Canonical little-endian field encoding. Digests of encoded records do not
/// depend on host byte order or struct layout.
class Encoder {
 public:
  Encoder& u8(std::uint8_t v);
  Encoder& u32(std::uint32_t v);
  Encoder& u64(std::uint64_t v);
  Encoder& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
  Encoder& f64(double v);
  Encoder& str(std::string_view s);
  Encoder& digest(const Digest& d);

  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  Digest sha256() const { return parkedchain::sha256(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

}  // namespace parkedchain
