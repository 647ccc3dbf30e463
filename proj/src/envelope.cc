#include "rostam/envelope.h"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <memory>

#include "rostam/error.h"

namespace rostam {
namespace {

constexpr std::string_view kWrapContext = "wrap";

std::array<std::uint8_t, 32> hmac_sha256(ByteView key, ByteView data) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
           data.data(), data.size(), out.data(), &len) == nullptr ||
      len != out.size()) {
    throw Error(ErrorCode::kInvalidArgument, "hmac failure");
  }
  return out;
}

Bytes aes256_ctr(ByteView key, ByteView iv, ByteView input) {
  struct CtxDeleter {
    void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
  };
  std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter> ctx(EVP_CIPHER_CTX_new());
  Bytes out(input.size());
  int len = 0;
  if (!ctx ||
      EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_ctr(), nullptr, key.data(),
                         iv.data()) != 1 ||
      (!input.empty() &&
       EVP_EncryptUpdate(ctx.get(), out.data(), &len, input.data(),
                         static_cast<int>(input.size())) != 1)) {
    throw Error(ErrorCode::kInvalidArgument, "aes-ctr failure");
  }
  return out;
}

Bytes mac_input(std::string_view context, ByteView nonce, ByteView ct) {
  Bytes m;
  m.reserve(1 + context.size() + nonce.size() + ct.size());
  m.push_back(static_cast<std::uint8_t>(context.size()));
  m.insert(m.end(), context.begin(), context.end());
  m.insert(m.end(), nonce.begin(), nonce.end());
  m.insert(m.end(), ct.begin(), ct.end());
  return m;
}

EncryptedBlob seal_with(const SubKeys& keys, std::string_view context,
                        ByteView plaintext, Rng& rng) {
  EncryptedBlob blob;
  rng.fill(blob.nonce);
  blob.ciphertext = aes256_ctr(keys.enc, blob.nonce, plaintext);
  blob.mac = hmac_sha256(keys.mac,
                         mac_input(context, blob.nonce, blob.ciphertext));
  return blob;
}

Bytes open_with(const SubKeys& keys, std::string_view context,
                const EncryptedBlob& blob) {
  auto expected =
      hmac_sha256(keys.mac, mac_input(context, blob.nonce, blob.ciphertext));
  if (!secure_equal(expected, blob.mac)) {
    throw Error(ErrorCode::kIntegrity, "mac verification failed");
  }
  return aes256_ctr(keys.enc, blob.nonce, blob.ciphertext);
}

SubKeys derive_from(ByteView root) {
  SubKeys k;
  k.enc = hmac_sha256(root, to_bytes("enc"));
  k.mac = hmac_sha256(root, to_bytes("mac"));
  k.lookup = hmac_sha256(root, to_bytes("lookup"));
  return k;
}

void wipe(SubKeys& k) {
  OPENSSL_cleanse(k.enc.data(), k.enc.size());
  OPENSSL_cleanse(k.mac.data(), k.mac.size());
  OPENSSL_cleanse(k.lookup.data(), k.lookup.size());
}

}  // namespace

MasterKey MasterKey::from_bytes(ByteView bytes) {
  if (bytes.size() != kMasterKeyBytes) {
    throw Error(ErrorCode::kEncoding, "master key must be 32 bytes");
  }
  MasterKey key;
  std::copy(bytes.begin(), bytes.end(), key.bytes_.begin());
  return key;
}

MasterKey::~MasterKey() { OPENSSL_cleanse(bytes_.data(), bytes_.size()); }

Bytes MasterKey::export_bytes() const {
  if (!exportable_) {
    throw Error(ErrorCode::kState, "master key is unexportable");
  }
  return Bytes(bytes_.begin(), bytes_.end());
}

Bytes EncryptedBlob::encode() const { return concat(nonce, ciphertext, mac); }

EncryptedBlob EncryptedBlob::decode(ByteView wire) {
  if (wire.size() < kNonceBytes + kMacBytes) {
    throw Error(ErrorCode::kEncoding, "blob: too short");
  }
  EncryptedBlob blob;
  std::copy_n(wire.begin(), kNonceBytes, blob.nonce.begin());
  blob.ciphertext.assign(wire.begin() + kNonceBytes, wire.end() - kMacBytes);
  std::copy(wire.end() - kMacBytes, wire.end(), blob.mac.begin());
  return blob;
}

Bytes WrappedPayload::encode() const {
  return concat(Bytes{static_cast<std::uint8_t>(mode)}, wrapped_key, body);
}

WrappedPayload WrappedPayload::decode(ByteView wire) {
  if (wire.empty()) throw Error(ErrorCode::kUnwrap, "wrapped: empty");
  WrappedPayload wp;
  auto rest = wire.subspan(1);
  switch (wire[0]) {
    case static_cast<std::uint8_t>(WrapMode::kDirect):
      if (rest.size() != kRsaModulusBytes) break;
      wp.mode = WrapMode::kDirect;
      wp.body.assign(rest.begin(), rest.end());
      return wp;
    case static_cast<std::uint8_t>(WrapMode::kHybrid):
      if (rest.size() < kRsaModulusBytes + kNonceBytes + kMacBytes) break;
      wp.mode = WrapMode::kHybrid;
      wp.wrapped_key.assign(rest.begin(), rest.begin() + kRsaModulusBytes);
      wp.body.assign(rest.begin() + kRsaModulusBytes, rest.end());
      return wp;
    default:
      break;
  }
  throw Error(ErrorCode::kUnwrap, "wrapped: malformed");
}

MasterKey generate_master_key(Rng& rng) {
  std::array<std::uint8_t, kMasterKeyBytes> raw{};
  rng.fill(raw);
  auto key = MasterKey::from_bytes(raw);
  OPENSSL_cleanse(raw.data(), raw.size());
  return key;
}

DeviceKeyPair generate_device_keypair(Rng& rng, std::string device_id) {
  return DeviceKeyPair{std::move(device_id), generate_rsa_keypair(rng)};
}

SigningKeyPair generate_signing_keypair(Rng& rng) {
  return SigningKeyPair{generate_rsa_keypair(rng)};
}

PairingToken generate_token(Rng& rng) {
  PairingToken t;
  rng.fill(t.value);
  return t;
}

Fingerprint fingerprint(ByteView encoded_public_key) {
  Fingerprint fp;
  SHA256(encoded_public_key.data(), encoded_public_key.size(),
         fp.value.data());
  return fp;
}

Fingerprint fingerprint(const RsaPublicKey& key) {
  return fingerprint(key.encode());
}

Fingerprint fingerprint_checked(ByteView encoded_public_key) {
  return fingerprint(RsaPublicKey::decode(encoded_public_key));
}

SubKeys derive_subkeys(const MasterKey& key) {
  return derive_from(detail::MasterKeyAccess::raw(key));
}

bool is_field_context(std::string_view context) {
  return context == "url" || context == "username" || context == "password" ||
         context == "mailbox";
}

EncryptedBlob seal_field(const MasterKey& key, std::string_view context,
                         ByteView plaintext, Rng& rng) {
  if (!is_field_context(context)) {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown field context: " + std::string(context));
  }
  auto keys = derive_subkeys(key);
  auto blob = seal_with(keys, context, plaintext, rng);
  wipe(keys);
  return blob;
}

Bytes open_field(const MasterKey& key, std::string_view context,
                 const EncryptedBlob& blob) {
  if (!is_field_context(context)) {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown field context: " + std::string(context));
  }
  auto keys = derive_subkeys(key);
  try {
    auto out = open_with(keys, context, blob);
    wipe(keys);
    return out;
  } catch (...) {
    wipe(keys);
    throw;
  }
}

LookupTag lookup_tag(const MasterKey& key, std::string_view canonical_url) {
  auto keys = derive_subkeys(key);
  LookupTag tag;
  tag.value = hmac_sha256(keys.lookup, to_bytes(canonical_url));
  wipe(keys);
  return tag;
}

WrappedPayload wrap(const RsaPublicKey& recipient, ByteView payload,
                    Rng& rng) {
  if (payload.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "wrap: empty payload");
  }
  WrappedPayload wp;
  if (payload.size() <= kOaepMaxPlaintext) {
    wp.mode = WrapMode::kDirect;
    wp.body = rsa_oaep_encrypt(recipient, payload, rng);
    return wp;
  }
  Bytes ephemeral = rng.bytes(32);
  auto keys = derive_from(ephemeral);
  wp.mode = WrapMode::kHybrid;
  wp.wrapped_key = rsa_oaep_encrypt(recipient, ephemeral, rng);
  wp.body = seal_with(keys, kWrapContext, payload, rng).encode();
  wipe(keys);
  secure_wipe(ephemeral);
  return wp;
}

Bytes unwrap(const RsaPrivateKey& key, const WrappedPayload& wrapped) {
  try {
    switch (wrapped.mode) {
      case WrapMode::kDirect:
        if (!wrapped.wrapped_key.empty()) break;
        return rsa_oaep_decrypt(key, wrapped.body);
      case WrapMode::kHybrid: {
        Bytes ephemeral = rsa_oaep_decrypt(key, wrapped.wrapped_key);
        if (ephemeral.size() != 32) {
          secure_wipe(ephemeral);
          break;
        }
        auto keys = derive_from(ephemeral);
        secure_wipe(ephemeral);
        try {
          auto out = open_with(keys, kWrapContext,
                               EncryptedBlob::decode(wrapped.body));
          wipe(keys);
          return out;
        } catch (...) {
          wipe(keys);
          throw;
        }
      }
    }
  } catch (const Error&) {
    // Every failure cause collapses into one indistinguishable error.
  }
  throw Error(ErrorCode::kUnwrap, "unwrap failed");
}

Bytes assertion_message(std::string_view user_id, const Challenge& challenge,
                        Timestamp issued_at) {
  Bytes m;
  auto len = static_cast<std::uint32_t>(user_id.size());
  for (int i = 3; i >= 0; --i) m.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  m.insert(m.end(), user_id.begin(), user_id.end());
  m.insert(m.end(), challenge.value.begin(), challenge.value.end());
  auto t = static_cast<std::uint64_t>(issued_at);
  for (int i = 7; i >= 0; --i) m.push_back(static_cast<std::uint8_t>(t >> (8 * i)));
  return m;
}

Assertion sign_assertion(const RsaPrivateKey& key, std::string user_id,
                         const Challenge& challenge, Timestamp issued_at) {
  Assertion a;
  a.signature =
      rsa_sign_sha256(key, assertion_message(user_id, challenge, issued_at));
  a.user_id = std::move(user_id);
  a.challenge = challenge;
  a.issued_at = issued_at;
  return a;
}

bool verify_assertion(const RsaPublicKey& key, const Assertion& assertion,
                      const Challenge& expected_challenge, Timestamp now,
                      std::int64_t window) {
  if (assertion.challenge != expected_challenge) return false;
  std::int64_t age = now - assertion.issued_at;
  if (age > window || age < -window) return false;
  return rsa_verify_sha256(
      key,
      assertion_message(assertion.user_id, assertion.challenge,
                        assertion.issued_at),
      assertion.signature);
}

}  // namespace rostam
