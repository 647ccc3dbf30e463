#pragma once

// Key material, credential sealing, key wrapping and login assertions.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "rostam/bytes.h"
#include "rostam/clock.h"
#include "rostam/fixed_bytes.h"
#include "rostam/rng.h"
#include "rostam/rsa.h"

namespace rostam {

inline constexpr std::size_t kMasterKeyBytes = 32;
inline constexpr std::size_t kNonceBytes = 16;
inline constexpr std::size_t kMacBytes = 32;
inline constexpr std::int64_t kAssertionWindowSeconds = 120;

namespace detail {
struct MasterKeyAccess;
}

// 256-bit root secret for all credential encryption. Once made unexportable
// the raw bytes are reachable only through the library's own primitives.
class MasterKey {
 public:
  static MasterKey from_bytes(ByteView bytes);

  MasterKey(const MasterKey&) = default;
  MasterKey& operator=(const MasterKey&) = default;
  ~MasterKey();

  bool exportable() const noexcept { return exportable_; }
  void make_unexportable() noexcept { exportable_ = false; }

  // Throws Error(kState) once the key is unexportable.
  Bytes export_bytes() const;

 private:
  MasterKey() = default;
  friend struct detail::MasterKeyAccess;

  std::array<std::uint8_t, kMasterKeyBytes> bytes_{};
  bool exportable_ = true;
};

namespace detail {
struct MasterKeyAccess {
  static ByteView raw(const MasterKey& key) { return key.bytes_; }
};
}  // namespace detail

struct DeviceKeyPair {
  std::string device_id;
  RsaKeyPair keys;
};

struct SigningKeyPair {
  RsaKeyPair keys;
};

struct SubKeys {
  std::array<std::uint8_t, 32> enc{};
  std::array<std::uint8_t, 32> mac{};
  std::array<std::uint8_t, 32> lookup{};
};

// nonce(16) ∥ ciphertext ∥ mac(32) on the wire.
struct EncryptedBlob {
  std::array<std::uint8_t, kNonceBytes> nonce{};
  Bytes ciphertext;
  std::array<std::uint8_t, kMacBytes> mac{};

  Bytes encode() const;
  // Throws Error(kEncoding) when shorter than nonce + mac.
  static EncryptedBlob decode(ByteView wire);

  bool operator==(const EncryptedBlob&) const = default;
};

enum class WrapMode : std::uint8_t { kDirect = 1, kHybrid = 2 };

// Direct: body is a single OAEP block. Hybrid: wrapped_key is an OAEP block
// holding an ephemeral key, body is the payload sealed under it.
struct WrappedPayload {
  WrapMode mode = WrapMode::kDirect;
  Bytes wrapped_key;
  Bytes body;

  // mode(1) ∥ wrapped_key ∥ body
  Bytes encode() const;
  // Throws Error(kUnwrap) on malformed input.
  static WrappedPayload decode(ByteView wire);

  bool operator==(const WrappedPayload&) const = default;
};

struct Assertion {
  std::string user_id;
  Challenge challenge;
  Timestamp issued_at = 0;
  Bytes signature;
};

MasterKey generate_master_key(Rng& rng);
DeviceKeyPair generate_device_keypair(Rng& rng, std::string device_id);
SigningKeyPair generate_signing_keypair(Rng& rng);
PairingToken generate_token(Rng& rng);

// SHA-256 over the given bytes, normally a canonical public-key encoding.
Fingerprint fingerprint(ByteView encoded_public_key);
Fingerprint fingerprint(const RsaPublicKey& key);
// Validates the encoding first; throws Error(kEncoding) if malformed.
Fingerprint fingerprint_checked(ByteView encoded_public_key);

SubKeys derive_subkeys(const MasterKey& key);

// Contexts accepted by seal_field / open_field.
bool is_field_context(std::string_view context);

// AES-256-CTR with a fresh random initial counter block, then HMAC-SHA-256
// over len(context) ∥ context ∥ nonce ∥ ciphertext.
EncryptedBlob seal_field(const MasterKey& key, std::string_view context,
                         ByteView plaintext, Rng& rng);
// The MAC is checked before any decryption. Throws Error(kIntegrity).
Bytes open_field(const MasterKey& key, std::string_view context,
                 const EncryptedBlob& blob);

LookupTag lookup_tag(const MasterKey& key, std::string_view canonical_url);

WrappedPayload wrap(const RsaPublicKey& recipient, ByteView payload, Rng& rng);
// Throws Error(kUnwrap) for every failure cause.
Bytes unwrap(const RsaPrivateKey& key, const WrappedPayload& wrapped);

// user_id is length-prefixed in the signed message.
Bytes assertion_message(std::string_view user_id, const Challenge& challenge,
                        Timestamp issued_at);
Assertion sign_assertion(const RsaPrivateKey& key, std::string user_id,
                         const Challenge& challenge, Timestamp issued_at);
bool verify_assertion(const RsaPublicKey& key, const Assertion& assertion,
                      const Challenge& expected_challenge, Timestamp now,
                      std::int64_t window = kAssertionWindowSeconds);

}  // namespace rostam
