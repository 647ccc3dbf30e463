#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rostam {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

Bytes to_bytes(std::string_view s);
std::string to_string(ByteView b);

// Concatenates any number of byte ranges.
template <typename... Parts>
Bytes concat(const Parts&... parts) {
  Bytes out;
  out.reserve((std::size(parts) + ... + 0));
  (out.insert(out.end(), std::begin(parts), std::end(parts)), ...);
  return out;
}

std::string base64url_encode(ByteView data);
// Throws Error(kEncoding) on characters outside the url-safe alphabet or on
// padding.
Bytes base64url_decode(std::string_view text);

std::string hex_encode(ByteView data);

// Constant-time equality; false on length mismatch.
bool secure_equal(ByteView a, ByteView b);

// Overwrites the buffer before release.
void secure_wipe(Bytes& b);

}  // namespace rostam
