#include "rostam/envelope.h"

#include <gtest/gtest.h>

#include <set>

#include "oracle.h"
#include "rostam/error.h"

namespace rostam {
namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

MasterKey fixed_key(std::uint8_t fill = 0x42) {
  return MasterKey::from_bytes(Bytes(kMasterKeyBytes, fill));
}

const RsaKeyPair& recipient() {
  static const RsaKeyPair kp = [] {
    auto rng = Rng::seeded(21, "envelope-test");
    return generate_rsa_keypair(rng);
  }();
  return kp;
}

TEST(Fingerprint, MatchesSha256Vectors) {
  EXPECT_EQ(fingerprint(ByteView{}).hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(fingerprint(to_bytes("abc")).hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  auto enc = recipient().pub.encode();
  EXPECT_EQ(fingerprint(recipient().pub).bytes(), oracle::sha256(enc));
  EXPECT_EQ(fingerprint_checked(enc), fingerprint(enc));
}

TEST(Fingerprint, CheckedVariantRejectsMalformedKeys) {
  EXPECT_EQ(code_of([] { fingerprint_checked(ByteView{}); }), ErrorCode::kEncoding);
  EXPECT_EQ(code_of([] { fingerprint_checked(to_bytes("not a key")); }),
            ErrorCode::kEncoding);
}

TEST(MasterKey, RejectsWrongLengthAndHonorsUnexportable) {
  EXPECT_EQ(code_of([] { MasterKey::from_bytes(Bytes(31)); }),
            ErrorCode::kEncoding);
  auto key = fixed_key();
  EXPECT_EQ(key.export_bytes(), Bytes(kMasterKeyBytes, 0x42));
  key.make_unexportable();
  EXPECT_FALSE(key.exportable());
  EXPECT_EQ(code_of([&] { key.export_bytes(); }), ErrorCode::kState);
}

TEST(Seal, MatchesIndependentReference) {
  auto key = fixed_key();
  auto raw = Bytes(kMasterKeyBytes, 0x42);
  auto rng = Rng::seeded(1, "seal");
  for (auto ctx : {"url", "username", "password", "mailbox"}) {
    for (std::size_t len : {0u, 1u, 15u, 16u, 17u, 64u, 1000u}) {
      auto pt = rng.bytes(len);
      auto blob = seal_field(key, ctx, pt, rng);
      EXPECT_EQ(blob.encode(),
                oracle::seal_reference(raw, ctx, blob.nonce, pt))
          << ctx << " " << len;
      EXPECT_EQ(open_field(key, ctx, blob), pt);
    }
  }
}

TEST(Seal, SubkeysMatchReferenceDerivation) {
  auto key = fixed_key(0x07);
  auto raw = Bytes(kMasterKeyBytes, 0x07);
  auto sub = derive_subkeys(key);
  EXPECT_EQ(Bytes(sub.enc.begin(), sub.enc.end()),
            oracle::hmac_sha256(raw, to_bytes("enc")));
  EXPECT_EQ(Bytes(sub.mac.begin(), sub.mac.end()),
            oracle::hmac_sha256(raw, to_bytes("mac")));
  EXPECT_EQ(Bytes(sub.lookup.begin(), sub.lookup.end()),
            oracle::hmac_sha256(raw, to_bytes("lookup")));
  EXPECT_EQ(lookup_tag(key, "https://example.com/").bytes(),
            oracle::hmac_sha256(sub.lookup, to_bytes("https://example.com/")));
}

TEST(Seal, EverySingleByteFlipIsDetected) {
  auto key = fixed_key();
  auto rng = Rng::seeded(2, "flip");
  auto pt = rng.bytes(64);
  auto wire = seal_field(key, "password", pt, rng).encode();
  ASSERT_EQ(wire.size(), kNonceBytes + 64 + kMacBytes);
  std::size_t detected = 0, total = 0;
  for (std::size_t pos = 0; pos < wire.size(); ++pos) {
    for (unsigned mask = 1; mask < 256; ++mask) {
      auto t = wire;
      t[pos] ^= static_cast<std::uint8_t>(mask);
      ++total;
      try {
        open_field(key, "password", EncryptedBlob::decode(t));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kIntegrity) ++detected;
      }
    }
  }
  EXPECT_EQ(detected, total);
}

TEST(Seal, ContextAndKeyAreBound) {
  auto key = fixed_key();
  auto rng = Rng::seeded(3, "ctx");
  auto blob = seal_field(key, "username", to_bytes("alice"), rng);
  EXPECT_EQ(code_of([&] { open_field(key, "password", blob); }),
            ErrorCode::kIntegrity);
  EXPECT_EQ(code_of([&] { open_field(fixed_key(0x43), "username", blob); }),
            ErrorCode::kIntegrity);
  EXPECT_EQ(code_of([&] { seal_field(key, "other", to_bytes("x"), rng); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { open_field(key, "other", blob); }),
            ErrorCode::kInvalidArgument);
}

TEST(Seal, TruncatedBlobIsAnEncodingError) {
  EXPECT_EQ(code_of([] { EncryptedBlob::decode(Bytes(kNonceBytes + kMacBytes - 1)); }),
            ErrorCode::kEncoding);
  auto empty = EncryptedBlob::decode(Bytes(kNonceBytes + kMacBytes));
  EXPECT_TRUE(empty.ciphertext.empty());
}

TEST(Randomness, NoncesAndTokensDoNotRepeat) {
  auto key = fixed_key();
  auto rng = Rng::system();
  std::set<Bytes> nonces, tokens;
  for (int i = 0; i < 10000; ++i) {
    auto blob = seal_field(key, "password", to_bytes("same"), rng);
    nonces.insert(Bytes(blob.nonce.begin(), blob.nonce.end()));
    tokens.insert(generate_token(rng).bytes());
  }
  EXPECT_EQ(nonces.size(), 10000u);
  EXPECT_EQ(tokens.size(), 10000u);
}

TEST(LookupTag, DeterministicAndInjectiveOverSample) {
  auto key = fixed_key();
  std::set<Bytes> tags;
  for (int i = 0; i < 1000; ++i) {
    auto url = "https://site" + std::to_string(i) + ".example/login";
    auto tag = lookup_tag(key, url);
    EXPECT_EQ(tag, lookup_tag(key, url));
    tags.insert(tag.bytes());
  }
  EXPECT_EQ(tags.size(), 1000u);
  EXPECT_NE(lookup_tag(key, "https://a.example/"),
            lookup_tag(fixed_key(0x43), "https://a.example/"));
}

TEST(LookupTag, OneBitKeyChangeFlipsAboutHalfTheBits) {
  auto base = Bytes(kMasterKeyBytes, 0x42);
  std::size_t flipped = 0, samples = 0;
  for (std::size_t bit = 0; bit < kMasterKeyBytes * 8; ++bit) {
    auto other = base;
    other[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    auto a = lookup_tag(MasterKey::from_bytes(base), "https://example.com/");
    auto b = lookup_tag(MasterKey::from_bytes(other), "https://example.com/");
    for (std::size_t i = 0; i < a.value.size(); ++i) {
      flipped += static_cast<std::size_t>(__builtin_popcount(a.value[i] ^ b.value[i]));
    }
    samples += 256;
  }
  double ratio = static_cast<double>(flipped) / static_cast<double>(samples);
  // 65536 bit samples; six standard deviations is about 0.012.
  EXPECT_NEAR(ratio, 0.5, 0.012);
}

TEST(Wrap, DirectModeUpToOaepLimit) {
  auto rng = Rng::seeded(4, "wrap");
  for (std::size_t len : {1ul, 32ul, 48ul, kOaepMaxPlaintext}) {
    auto payload = rng.bytes(len);
    auto wp = wrap(recipient().pub, payload, rng);
    EXPECT_EQ(wp.mode, WrapMode::kDirect);
    EXPECT_TRUE(wp.wrapped_key.empty());
    // The body is a plain OAEP block that an independent decryptor opens.
    EXPECT_EQ(oracle::oaep_decrypt(recipient(), wp.body), payload);
    auto round = WrappedPayload::decode(wp.encode());
    EXPECT_EQ(round, wp);
    EXPECT_EQ(unwrap(recipient().priv, round), payload);
  }
}

TEST(Wrap, HybridModeAboveOaepLimit) {
  auto rng = Rng::seeded(5, "wrap");
  // A pairing token followed by a public key encoding: 16 + 259 bytes.
  for (std::size_t len : {kOaepMaxPlaintext + 1, 275ul, 4096ul}) {
    auto payload = rng.bytes(len);
    auto wp = wrap(recipient().pub, payload, rng);
    EXPECT_EQ(wp.mode, WrapMode::kHybrid);
    auto eph = oracle::oaep_decrypt(recipient(), wp.wrapped_key);
    ASSERT_TRUE(eph.has_value());
    ASSERT_EQ(eph->size(), 32u);
    auto blob = EncryptedBlob::decode(wp.body);
    EXPECT_EQ(wp.body, oracle::seal_reference(*eph, "wrap", blob.nonce, payload));
    EXPECT_EQ(unwrap(recipient().priv, WrappedPayload::decode(wp.encode())),
              payload);
  }
}

TEST(Wrap, EveryFailureIsUnwrapError) {
  auto rng = Rng::seeded(6, "wrap");
  EXPECT_EQ(code_of([&] { wrap(recipient().pub, ByteView{}, rng); }),
            ErrorCode::kInvalidArgument);
  auto other_rng = Rng::seeded(7, "other");
  auto other = generate_rsa_keypair(other_rng);
  for (std::size_t len : {48u, 275u}) {
    auto wire = wrap(recipient().pub, rng.bytes(len), rng).encode();
    EXPECT_EQ(code_of([&] { unwrap(other.priv, WrappedPayload::decode(wire)); }),
              ErrorCode::kUnwrap);
    for (std::size_t cut : {0ul, 1ul, wire.size() / 2, wire.size() - 1}) {
      EXPECT_EQ(code_of([&] {
                  unwrap(recipient().priv,
                         WrappedPayload::decode(ByteView(wire).first(cut)));
                }),
                ErrorCode::kUnwrap)
          << "len " << len << " cut " << cut;
    }
    for (std::size_t pos : {1ul, 100ul, wire.size() - 1}) {
      auto t = wire;
      t[pos] ^= 0x01;
      EXPECT_EQ(code_of([&] {
                  unwrap(recipient().priv, WrappedPayload::decode(t));
                }),
                ErrorCode::kUnwrap);
    }
    auto bad_mode = wire;
    bad_mode[0] = 9;
    EXPECT_EQ(code_of([&] { WrappedPayload::decode(bad_mode); }), ErrorCode::kUnwrap);
  }
}

class AssertionTest : public ::testing::Test {
 protected:
  Challenge challenge() {
    Challenge c;
    c.value.fill(0x5A);
    return c;
  }
  const Timestamp t0 = 1'700'000'000;
};

TEST_F(AssertionTest, MessageLayout) {
  auto m = assertion_message("bob", challenge(), 0x0102030405060708);
  Bytes expected{0, 0, 0, 3, 'b', 'o', 'b'};
  expected.insert(expected.end(), 16, 0x5A);
  for (int i = 1; i <= 8; ++i) expected.push_back(static_cast<std::uint8_t>(i));
  EXPECT_EQ(m, expected);
}

TEST_F(AssertionTest, SignatureIsStandardPkcs1) {
  auto a = sign_assertion(recipient().priv, "alice", challenge(), t0);
  EXPECT_TRUE(oracle::pkcs1_verify(recipient().pub,
                                   assertion_message("alice", challenge(), t0),
                                   a.signature));
}

TEST_F(AssertionTest, FreshnessWindowBoundary) {
  auto a = sign_assertion(recipient().priv, "alice", challenge(), t0);
  const auto w = kAssertionWindowSeconds;
  EXPECT_TRUE(verify_assertion(recipient().pub, a, challenge(), t0));
  EXPECT_TRUE(verify_assertion(recipient().pub, a, challenge(), t0 + w));
  EXPECT_TRUE(verify_assertion(recipient().pub, a, challenge(), t0 - w));
  EXPECT_FALSE(verify_assertion(recipient().pub, a, challenge(), t0 + w + 1));
  EXPECT_FALSE(verify_assertion(recipient().pub, a, challenge(), t0 - w - 1));
}

TEST_F(AssertionTest, MutationsAreRejected) {
  auto a = sign_assertion(recipient().priv, "alice", challenge(), t0);
  auto wrong = challenge();
  wrong.value[0] ^= 1;
  EXPECT_FALSE(verify_assertion(recipient().pub, a, wrong, t0));
  auto renamed = a;
  renamed.user_id = "alicf";
  EXPECT_FALSE(verify_assertion(recipient().pub, renamed, challenge(), t0));
  auto moved = a;
  moved.issued_at += 1;
  EXPECT_FALSE(verify_assertion(recipient().pub, moved, challenge(), t0));
  auto other_rng = Rng::seeded(8, "other");
  auto other = generate_rsa_keypair(other_rng);
  EXPECT_FALSE(verify_assertion(other.pub, a, challenge(), t0));
}

}  // namespace
}  // namespace rostam
