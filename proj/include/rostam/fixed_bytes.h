#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>

#include "rostam/bytes.h"
#include "rostam/error.h"

namespace rostam {

// Fixed-length byte string with a phantom tag so that, e.g., a token cannot
// be passed where a fingerprint is expected.
template <std::size_t N, typename Tag>
struct FixedBytes {
  static constexpr std::size_t kSize = N;

  std::array<std::uint8_t, N> value{};

  static FixedBytes from(ByteView bytes) {
    if (bytes.size() != N) {
      throw Error(ErrorCode::kEncoding,
                  "expected " + std::to_string(N) + " bytes, got " +
                      std::to_string(bytes.size()));
    }
    FixedBytes out;
    std::copy(bytes.begin(), bytes.end(), out.value.begin());
    return out;
  }

  static FixedBytes from_base64url(std::string_view text) {
    return from(base64url_decode(text));
  }

  ByteView view() const { return value; }
  Bytes bytes() const { return Bytes(value.begin(), value.end()); }
  std::string base64url() const { return base64url_encode(value); }
  std::string hex() const { return hex_encode(value); }

  auto operator<=>(const FixedBytes&) const = default;
};

using PairingToken = FixedBytes<16, struct PairingTokenTag>;
using Fingerprint = FixedBytes<32, struct FingerprintTag>;
using LookupTag = FixedBytes<32, struct LookupTagTag>;
using Challenge = FixedBytes<16, struct ChallengeTag>;
using CredentialId = FixedBytes<16, struct CredentialIdTag>;
using SessionId = FixedBytes<16, struct SessionIdTag>;
using ClientId = FixedBytes<16, struct ClientIdTag>;
using ClientSecret = FixedBytes<32, struct ClientSecretTag>;

}  // namespace rostam
