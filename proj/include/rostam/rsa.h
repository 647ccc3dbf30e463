#pragma once

#include <cstddef>

#include "rostam/bytes.h"
#include "rostam/rng.h"

namespace rostam {

inline constexpr std::size_t kRsaModulusBytes = 256;
inline constexpr unsigned kRsaModulusBits = 2048;
// RSAES-OAEP with SHA-256 over a 2048-bit modulus: k - 2*hLen - 2.
inline constexpr std::size_t kOaepMaxPlaintext = 190;

// Public key in canonical form: modulus as 256 big-endian bytes (left
// padded), exponent as minimal big-endian bytes.
struct RsaPublicKey {
  Bytes modulus;
  Bytes exponent;

  // modulus ∥ exponent
  Bytes encode() const;
  // Throws Error(kEncoding) unless the input is a 2048-bit modulus followed by
  // a minimal, odd exponent greater than one.
  static RsaPublicKey decode(ByteView encoded);

  unsigned modulus_bits() const;

  bool operator==(const RsaPublicKey&) const = default;
};

struct RsaPrivateKey {
  RsaPublicKey pub;
  Bytes private_exponent;
  Bytes prime1;
  Bytes prime2;
  Bytes exponent1;    // d mod (p-1)
  Bytes exponent2;    // d mod (q-1)
  Bytes coefficient;  // q^-1 mod p

  void wipe();
};

struct RsaKeyPair {
  RsaPublicKey pub;
  RsaPrivateKey priv;
};

// Draws prime candidates from `rng`, so a seeded Rng yields a reproducible
// key pair. Public exponent is 65537.
RsaKeyPair generate_rsa_keypair(Rng& rng);

// RSAES-OAEP, SHA-256 for both the label hash and MGF1, empty label.
// Throws Error(kInvalidArgument) if the message exceeds kOaepMaxPlaintext.
Bytes rsa_oaep_encrypt(const RsaPublicKey& key, ByteView message, Rng& rng);
// Throws Error(kUnwrap) on any decoding failure; the cause is not reported.
Bytes rsa_oaep_decrypt(const RsaPrivateKey& key, ByteView ciphertext);

// RSASSA-PKCS1-v1_5 with SHA-256.
Bytes rsa_sign_sha256(const RsaPrivateKey& key, ByteView message);
bool rsa_verify_sha256(const RsaPublicKey& key, ByteView message,
                       ByteView signature);

}  // namespace rostam
