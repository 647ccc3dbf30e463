#include "rostam/rsa.h"

#include <openssl/bn.h>
#include <openssl/crypto.h>
#include <openssl/sha.h>

#include <array>
#include <memory>
#include <vector>

#include "rostam/error.h"

namespace rostam {
namespace {

struct BnDeleter {
  void operator()(BIGNUM* b) const { BN_clear_free(b); }
};
struct CtxDeleter {
  void operator()(BN_CTX* c) const { BN_CTX_free(c); }
};
using Bn = std::unique_ptr<BIGNUM, BnDeleter>;
using BnCtx = std::unique_ptr<BN_CTX, CtxDeleter>;

Bn new_bn() {
  Bn b(BN_new());
  if (!b) throw std::bad_alloc();
  return b;
}

BnCtx new_ctx() {
  BnCtx c(BN_CTX_new());
  if (!c) throw std::bad_alloc();
  return c;
}

Bn bn_from(ByteView bytes) {
  Bn b(BN_bin2bn(bytes.data(), static_cast<int>(bytes.size()), nullptr));
  if (!b) throw std::bad_alloc();
  return b;
}

Bytes bn_bytes(const BIGNUM* b) {
  Bytes out(static_cast<std::size_t>(BN_num_bytes(b)));
  BN_bn2bin(b, out.data());
  return out;
}

Bytes bn_bytes_padded(const BIGNUM* b, std::size_t len) {
  Bytes out(len);
  if (BN_bn2binpad(b, out.data(), static_cast<int>(len)) < 0) {
    throw Error(ErrorCode::kEncoding, "rsa: integer does not fit");
  }
  return out;
}

void check(int ok) {
  if (ok != 1) throw Error(ErrorCode::kInvalidArgument, "rsa: bignum failure");
}

constexpr unsigned long kPublicExponent = 65537;

// Odd primes below 2048 for the incremental sieve.
const std::vector<unsigned>& small_primes() {
  static const std::vector<unsigned> primes = [] {
    std::vector<unsigned> out;
    std::vector<bool> composite(2048, false);
    for (unsigned i = 3; i < composite.size(); i += 2) {
      if (composite[i]) continue;
      out.push_back(i);
      for (unsigned j = i * i; j < composite.size(); j += 2 * i) {
        composite[j] = true;
      }
    }
    return out;
  }();
  return primes;
}

// Miller-Rabin with random bases. Five rounds bound the error for a random
// 1024-bit candidate below 2^-100 (FIPS 186-4, table C.2).
constexpr int kMillerRabinRounds = 5;

bool miller_rabin(const BIGNUM* n, Rng& rng, BN_CTX* ctx) {
  auto nm1 = new_bn();
  check(BN_sub(nm1.get(), n, BN_value_one()));
  int s = 0;
  while (!BN_is_bit_set(nm1.get(), s)) ++s;
  auto d = new_bn();
  check(BN_rshift(d.get(), nm1.get(), s));

  std::unique_ptr<BN_MONT_CTX, decltype(&BN_MONT_CTX_free)> mont(
      BN_MONT_CTX_new(), &BN_MONT_CTX_free);
  check(mont != nullptr && BN_MONT_CTX_set(mont.get(), n, ctx));

  auto a = new_bn();
  auto y = new_bn();
  std::array<std::uint8_t, 128> raw{};
  for (int round = 0; round < kMillerRabinRounds; ++round) {
    // Base in [2, n-2].
    do {
      rng.fill(raw);
      auto r = bn_from(raw);
      check(BN_mod(a.get(), r.get(), nm1.get(), ctx));
    } while (BN_cmp(a.get(), BN_value_one()) <= 0);
    check(BN_mod_exp_mont(y.get(), a.get(), d.get(), n, ctx, mont.get()));
    if (BN_is_one(y.get()) || BN_cmp(y.get(), nm1.get()) == 0) continue;
    bool witness = true;
    for (int j = 1; j < s; ++j) {
      check(BN_mod_sqr(y.get(), y.get(), n, ctx));
      if (BN_cmp(y.get(), nm1.get()) == 0) {
        witness = false;
        break;
      }
      if (BN_is_one(y.get())) break;
    }
    if (witness) return false;
  }
  return true;
}

// 1024-bit prime p with the top two bits set and gcd(e, p-1) = 1. The search
// starts at a random odd point and walks upward; candidates divisible by a
// small prime are skipped without touching bignum arithmetic.
Bn generate_prime(Rng& rng, BN_CTX* ctx) {
  const auto& primes = small_primes();
  std::vector<unsigned> residues(primes.size());
  for (;;) {
    std::array<std::uint8_t, 128> raw{};
    rng.fill(raw);
    raw[0] |= 0xC0;
    raw[127] |= 0x01;
    Bn base = bn_from(raw);
    for (std::size_t i = 0; i < primes.size(); ++i) {
      BN_ULONG r = BN_mod_word(base.get(), primes[i]);
      if (r == static_cast<BN_ULONG>(-1)) check(0);
      residues[i] = static_cast<unsigned>(r);
    }
    auto candidate = new_bn();
    auto pm1 = new_bn();
    // Keep the walk well inside the 1024-bit range.
    for (unsigned delta = 0; delta < (1u << 20); delta += 2) {
      bool divisible = false;
      for (std::size_t i = 0; i < primes.size(); ++i) {
        if ((residues[i] + delta) % primes[i] == 0) {
          divisible = true;
          break;
        }
      }
      if (divisible) continue;
      check(BN_copy(candidate.get(), base.get()) != nullptr);
      check(BN_add_word(candidate.get(), delta));
      // p-1 must be coprime to 65537, which is itself prime.
      check(BN_sub(pm1.get(), candidate.get(), BN_value_one()));
      if (BN_mod_word(pm1.get(), kPublicExponent) == 0) continue;
      if (miller_rabin(candidate.get(), rng, ctx)) return candidate;
    }
  }
}

// MGF1 with SHA-256.
Bytes mgf1(ByteView seed, std::size_t len) {
  Bytes out;
  out.reserve(len + SHA256_DIGEST_LENGTH);
  Bytes block(seed.begin(), seed.end());
  block.resize(seed.size() + 4);
  for (std::uint32_t counter = 0; out.size() < len; ++counter) {
    block[seed.size() + 0] = static_cast<std::uint8_t>(counter >> 24);
    block[seed.size() + 1] = static_cast<std::uint8_t>(counter >> 16);
    block[seed.size() + 2] = static_cast<std::uint8_t>(counter >> 8);
    block[seed.size() + 3] = static_cast<std::uint8_t>(counter);
    std::array<std::uint8_t, SHA256_DIGEST_LENGTH> digest{};
    SHA256(block.data(), block.size(), digest.data());
    out.insert(out.end(), digest.begin(), digest.end());
  }
  out.resize(len);
  return out;
}

std::array<std::uint8_t, SHA256_DIGEST_LENGTH> sha256(ByteView data) {
  std::array<std::uint8_t, SHA256_DIGEST_LENGTH> d{};
  SHA256(data.data(), data.size(), d.data());
  return d;
}

Bytes public_op(const RsaPublicKey& key, ByteView input) {
  auto ctx = new_ctx();
  Bn n = bn_from(key.modulus);
  Bn e = bn_from(key.exponent);
  Bn x = bn_from(input);
  if (BN_cmp(x.get(), n.get()) >= 0) {
    throw Error(ErrorCode::kVerification, "rsa: input out of range");
  }
  Bn y = new_bn();
  check(BN_mod_exp(y.get(), x.get(), e.get(), n.get(), ctx.get()));
  return bn_bytes_padded(y.get(), kRsaModulusBytes);
}

// CRT private operation. Throws kUnwrap when the input is out of range.
Bytes private_op(const RsaPrivateKey& key, ByteView input) {
  auto ctx = new_ctx();
  Bn n = bn_from(key.pub.modulus);
  Bn c = bn_from(input);
  if (BN_cmp(c.get(), n.get()) >= 0) {
    throw Error(ErrorCode::kUnwrap, "rsa: input out of range");
  }
  Bn p = bn_from(key.prime1);
  Bn q = bn_from(key.prime2);
  Bn dp = bn_from(key.exponent1);
  Bn dq = bn_from(key.exponent2);
  Bn qinv = bn_from(key.coefficient);

  Bn m1 = new_bn(), m2 = new_bn(), h = new_bn(), m = new_bn();
  Bn cp = new_bn(), cq = new_bn();
  check(BN_mod(cp.get(), c.get(), p.get(), ctx.get()));
  check(BN_mod(cq.get(), c.get(), q.get(), ctx.get()));
  check(BN_mod_exp_mont_consttime(m1.get(), cp.get(), dp.get(), p.get(),
                                  ctx.get(), nullptr));
  check(BN_mod_exp_mont_consttime(m2.get(), cq.get(), dq.get(), q.get(),
                                  ctx.get(), nullptr));
  // h = qinv * (m1 - m2) mod p;  m = m2 + h*q
  check(BN_mod_sub(h.get(), m1.get(), m2.get(), p.get(), ctx.get()));
  check(BN_mod_mul(h.get(), h.get(), qinv.get(), p.get(), ctx.get()));
  check(BN_mul(m.get(), h.get(), q.get(), ctx.get()));
  check(BN_add(m.get(), m.get(), m2.get()));
  return bn_bytes_padded(m.get(), kRsaModulusBytes);
}

// DER prefix of DigestInfo for SHA-256.
constexpr std::array<std::uint8_t, 19> kSha256DigestInfo = {
    0x30, 0x31, 0x30, 0x0d, 0x06, 0x09, 0x60, 0x86, 0x48, 0x01,
    0x65, 0x03, 0x04, 0x02, 0x01, 0x05, 0x00, 0x04, 0x20};

Bytes pkcs1_v15_encode(ByteView message) {
  auto digest = sha256(message);
  const std::size_t t_len = kSha256DigestInfo.size() + digest.size();
  Bytes em(kRsaModulusBytes, 0xff);
  em[0] = 0x00;
  em[1] = 0x01;
  const std::size_t sep = kRsaModulusBytes - t_len - 1;
  em[sep] = 0x00;
  std::copy(kSha256DigestInfo.begin(), kSha256DigestInfo.end(),
            em.begin() + static_cast<std::ptrdiff_t>(sep + 1));
  std::copy(digest.begin(), digest.end(),
            em.end() - static_cast<std::ptrdiff_t>(digest.size()));
  return em;
}

}  // namespace

Bytes RsaPublicKey::encode() const { return concat(modulus, exponent); }

RsaPublicKey RsaPublicKey::decode(ByteView encoded) {
  if (encoded.size() <= kRsaModulusBytes) {
    throw Error(ErrorCode::kEncoding, "public key: truncated encoding");
  }
  RsaPublicKey key;
  key.modulus.assign(encoded.begin(), encoded.begin() + kRsaModulusBytes);
  key.exponent.assign(encoded.begin() + kRsaModulusBytes, encoded.end());
  if ((key.modulus[0] & 0x80) == 0) {
    throw Error(ErrorCode::kEncoding, "public key: modulus is not 2048 bits");
  }
  if ((key.modulus.back() & 1) == 0) {
    throw Error(ErrorCode::kEncoding, "public key: even modulus");
  }
  if (key.exponent.size() > 8 || key.exponent.front() == 0) {
    throw Error(ErrorCode::kEncoding, "public key: non-minimal exponent");
  }
  if ((key.exponent.back() & 1) == 0 ||
      (key.exponent.size() == 1 && key.exponent[0] == 1)) {
    throw Error(ErrorCode::kEncoding, "public key: invalid exponent");
  }
  return key;
}

unsigned RsaPublicKey::modulus_bits() const {
  Bn n = bn_from(modulus);
  return static_cast<unsigned>(BN_num_bits(n.get()));
}

void RsaPrivateKey::wipe() {
  secure_wipe(private_exponent);
  secure_wipe(prime1);
  secure_wipe(prime2);
  secure_wipe(exponent1);
  secure_wipe(exponent2);
  secure_wipe(coefficient);
}

RsaKeyPair generate_rsa_keypair(Rng& rng) {
  auto ctx = new_ctx();
  Bn e = new_bn();
  check(BN_set_word(e.get(), kPublicExponent));

  Bn p = generate_prime(rng, ctx.get());
  Bn q = generate_prime(rng, ctx.get());
  while (BN_cmp(p.get(), q.get()) == 0) q = generate_prime(rng, ctx.get());
  if (BN_cmp(p.get(), q.get()) < 0) std::swap(p, q);

  Bn n = new_bn();
  check(BN_mul(n.get(), p.get(), q.get(), ctx.get()));

  Bn pm1 = new_bn(), qm1 = new_bn(), g = new_bn(), lambda = new_bn();
  check(BN_sub(pm1.get(), p.get(), BN_value_one()));
  check(BN_sub(qm1.get(), q.get(), BN_value_one()));
  check(BN_gcd(g.get(), pm1.get(), qm1.get(), ctx.get()));
  check(BN_mul(lambda.get(), pm1.get(), qm1.get(), ctx.get()));
  check(BN_div(lambda.get(), nullptr, lambda.get(), g.get(), ctx.get()));

  Bn d(BN_mod_inverse(nullptr, e.get(), lambda.get(), ctx.get()));
  if (!d) throw Error(ErrorCode::kRng, "rsa: exponent not invertible");
  Bn dp = new_bn(), dq = new_bn();
  check(BN_mod(dp.get(), d.get(), pm1.get(), ctx.get()));
  check(BN_mod(dq.get(), d.get(), qm1.get(), ctx.get()));
  Bn qinv(BN_mod_inverse(nullptr, q.get(), p.get(), ctx.get()));
  if (!qinv) throw Error(ErrorCode::kRng, "rsa: q not invertible mod p");

  RsaKeyPair kp;
  kp.pub.modulus = bn_bytes_padded(n.get(), kRsaModulusBytes);
  kp.pub.exponent = bn_bytes(e.get());
  kp.priv.pub = kp.pub;
  kp.priv.private_exponent = bn_bytes(d.get());
  kp.priv.prime1 = bn_bytes(p.get());
  kp.priv.prime2 = bn_bytes(q.get());
  kp.priv.exponent1 = bn_bytes(dp.get());
  kp.priv.exponent2 = bn_bytes(dq.get());
  kp.priv.coefficient = bn_bytes(qinv.get());
  return kp;
}

Bytes rsa_oaep_encrypt(const RsaPublicKey& key, ByteView message, Rng& rng) {
  constexpr std::size_t k = kRsaModulusBytes;
  constexpr std::size_t h_len = SHA256_DIGEST_LENGTH;
  if (message.size() > kOaepMaxPlaintext) {
    throw Error(ErrorCode::kInvalidArgument, "oaep: message too long");
  }
  const auto l_hash = sha256({});

  // DB = lHash ∥ PS ∥ 0x01 ∥ M
  Bytes db(k - h_len - 1, 0);
  std::copy(l_hash.begin(), l_hash.end(), db.begin());
  db[db.size() - message.size() - 1] = 0x01;
  std::copy(message.begin(), message.end(),
            db.end() - static_cast<std::ptrdiff_t>(message.size()));

  Bytes seed = rng.bytes(h_len);
  Bytes db_mask = mgf1(seed, db.size());
  for (std::size_t i = 0; i < db.size(); ++i) db[i] ^= db_mask[i];
  Bytes seed_mask = mgf1(db, h_len);
  for (std::size_t i = 0; i < h_len; ++i) seed[i] ^= seed_mask[i];

  Bytes em = concat(Bytes{0x00}, seed, db);
  return public_op(key, em);
}

Bytes rsa_oaep_decrypt(const RsaPrivateKey& key, ByteView ciphertext) {
  constexpr std::size_t k = kRsaModulusBytes;
  constexpr std::size_t h_len = SHA256_DIGEST_LENGTH;
  if (ciphertext.size() != k) {
    throw Error(ErrorCode::kUnwrap, "oaep: decryption error");
  }
  Bytes em = private_op(key, ciphertext);

  Bytes seed(em.begin() + 1, em.begin() + 1 + h_len);
  Bytes db(em.begin() + 1 + h_len, em.end());
  Bytes seed_mask = mgf1(db, h_len);
  for (std::size_t i = 0; i < h_len; ++i) seed[i] ^= seed_mask[i];
  Bytes db_mask = mgf1(seed, db.size());
  for (std::size_t i = 0; i < db.size(); ++i) db[i] ^= db_mask[i];

  const auto l_hash = sha256({});
  bool good = em[0] == 0x00;
  good &= CRYPTO_memcmp(db.data(), l_hash.data(), h_len) == 0;
  std::size_t sep = 0;
  for (std::size_t i = h_len; i < db.size(); ++i) {
    if (db[i] == 0x01) {
      sep = i;
      break;
    }
    if (db[i] != 0x00) break;
  }
  good &= sep != 0;
  secure_wipe(seed);
  if (!good) {
    secure_wipe(db);
    throw Error(ErrorCode::kUnwrap, "oaep: decryption error");
  }
  Bytes message(db.begin() + static_cast<std::ptrdiff_t>(sep + 1), db.end());
  secure_wipe(db);
  secure_wipe(em);
  return message;
}

Bytes rsa_sign_sha256(const RsaPrivateKey& key, ByteView message) {
  Bytes em = pkcs1_v15_encode(message);
  return private_op(key, em);
}

bool rsa_verify_sha256(const RsaPublicKey& key, ByteView message,
                       ByteView signature) {
  if (signature.size() != kRsaModulusBytes) return false;
  try {
    Bytes em = public_op(key, signature);
    return secure_equal(em, pkcs1_v15_encode(message));
  } catch (const Error&) {
    return false;
  }
}

}  // namespace rostam
