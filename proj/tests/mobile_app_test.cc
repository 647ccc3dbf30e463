#include "rostam/mobile_app.h"

#include <gtest/gtest.h>

#include "counting_server.h"
#include "rostam/error.h"
#include "rostam/extension.h"
#include "rostam/testing/test_access.h"

namespace rostam {
namespace {

using testing::CountingServer;
using testing::TestAccess;

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

class MobileTest : public ::testing::Test {
 protected:
  MobileTest()
      : store_(Rng::seeded(2, "server")),
        idp_(store_, Rng::seeded(3, "idp")),
        counting_(store_),
        phone_("alice", Rng::seeded(4, "phone")),
        ext_("alice", Rng::seeded(5, "ext")) {
    phone_.setup(store_);
    idp_.enroll("alice", "alice@corp.example", "", phone_.signing_pubkey());
  }

  void login() {
    ext_.begin_login(idp_, "alice", t0_);
    ASSERT_TRUE(phone_.approve_login(idp_, always_approve(), t0_));
    ASSERT_TRUE(ext_.finish_login(idp_));
  }

  void pair() {
    login();
    auto qr = ext_.begin_pairing(store_, t0_);
    phone_.scan_pairing_qr(qr, store_);
    ASSERT_EQ(ext_.complete_pairing(store_), PollResult::kDone);
  }

  CredentialId save(const std::string& url, const std::string& user,
                    const std::string& pw) {
    return *ext_.save_credential(url, user, pw, SaveMode::kManual, store_,
                                 [] { return true; }, t0_);
  }

  const Timestamp t0_ = 1'700'000'000;
  ServerStore store_;
  IdentityProvider idp_;
  CountingServer counting_;
  MobileApp phone_;
  BrowserExtension ext_;
};

TEST_F(MobileTest, SetupRegistersAndLocksTheMasterKey) {
  EXPECT_EQ(phone_.status(), MobileStatus::kRegistered);
  EXPECT_TRUE(phone_.has_master_key());
  EXPECT_TRUE(store_.has_user("alice"));
  EXPECT_EQ(code_of([&] { phone_.setup(store_); }), ErrorCode::kState);
  // The server's copy opens, with the phone's own key, to the phone's key.
  auto wrapped = store_.get_wrapped_master_key("alice");
  EXPECT_EQ(unwrap(*TestAccess::device_private_key(phone_), wrapped),
            *TestAccess::master_key(phone_));
}

TEST_F(MobileTest, RefusedSetupLeavesNoKeys) {
  MobileApp second("alice", Rng::seeded(6, "phone2"));
  EXPECT_EQ(code_of([&] { second.setup(store_); }), ErrorCode::kAlreadyExists);
  EXPECT_EQ(second.status(), MobileStatus::kUnregistered);
  EXPECT_FALSE(second.has_master_key());
  EXPECT_EQ(code_of([&] { second.device_pubkey(); }), ErrorCode::kState);
}

TEST_F(MobileTest, DeniedBiometricSendsNothing) {
  auto attempt = ext_.begin_login(idp_, "alice", t0_);
  EXPECT_EQ(code_of([&] { phone_.approve_login(idp_, always_deny(), t0_); }),
            ErrorCode::kGate);
  EXPECT_EQ(idp_.attempt(attempt).state, AttemptState::kPending);
  EXPECT_FALSE(ext_.finish_login(idp_));
  // A later approval of the same request still works.
  EXPECT_TRUE(phone_.approve_login(idp_, always_approve(), t0_));
  EXPECT_TRUE(ext_.finish_login(idp_));
  EXPECT_EQ(code_of([&] { phone_.approve_login(idp_, always_approve(), t0_); }),
            ErrorCode::kState);
}

TEST_F(MobileTest, RevealRunsGateBeforeAnyServerCall) {
  pair();
  auto id = save("https://example.com/login", "alice", "s3cret");
  counting_.calls.clear();
  EXPECT_EQ(code_of([&] { phone_.reveal_credential(id, always_deny(), counting_); }),
            ErrorCode::kGate);
  EXPECT_EQ(counting_.total(), 0u);
  auto cred = phone_.reveal_credential(id, always_approve(), counting_);
  EXPECT_EQ(cred.password, "s3cret");
  EXPECT_EQ(cred.url, "https://example.com/login");
  EXPECT_EQ(counting_.count("get_credential"), 1u);
}

TEST_F(MobileTest, ListingNeverFetchesPasswords) {
  pair();
  save("https://a.example/", "u1", "p1");
  save("https://b.example/", "u2", "p2");
  counting_.calls.clear();
  auto list = phone_.list_credentials(counting_);
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(counting_.calls.size(), 1u);
  EXPECT_EQ(counting_.count("list_credential_headers"), 1u);
}

TEST_F(MobileTest, MalformedQrCausesNoServerTraffic) {
  login();
  auto qr = ext_.begin_pairing(store_, t0_).encode();
  ASSERT_EQ(qr.size(), 48u);
  counting_.calls.clear();
  for (std::size_t len : {0ul, 1ul, 47ul, 49ul}) {
    Bytes raw(qr.begin(), qr.begin() + static_cast<long>(std::min(len, qr.size())));
    raw.resize(len, 0);
    EXPECT_EQ(code_of([&] { phone_.scan_pairing_qr(raw, counting_); }), ErrorCode::kParse);
  }
  EXPECT_EQ(counting_.total(), 0u);
  EXPECT_EQ(code_of([] { QrPayload::from_text("rostam-qr:v2:AAAA"); }), ErrorCode::kParse);
  phone_.scan_pairing_qr(ByteView(qr), counting_);
  EXPECT_EQ(ext_.complete_pairing(store_), PollResult::kDone);
}

TEST_F(MobileTest, UnknownFingerprintIsNotFound) {
  login();
  auto qr = ext_.begin_pairing(store_, t0_);
  qr.fp.value[0] ^= 1;
  EXPECT_EQ(code_of([&] { phone_.scan_pairing_qr(qr, store_); }), ErrorCode::kNotFound);
}

TEST_F(MobileTest, PairingDeliversTheMasterKey) {
  pair();
  EXPECT_EQ(TestAccess::master_key(ext_), TestAccess::master_key(phone_));
}

TEST_F(MobileTest, SwappedServerMasterKeyIsRefused) {
  login();
  auto qr = ext_.begin_pairing(store_, t0_);
  // The server replaces the phone's wrapped key with one it made itself.
  auto rng = Rng::seeded(9, "evil");
  auto pub = phone_.device_pubkey();
  store_.replace_mobile_key("alice", pub, fingerprint(pub),
                            wrap(RsaPublicKey::decode(pub), Bytes(32, 0xEE), rng));
  EXPECT_EQ(code_of([&] { phone_.scan_pairing_qr(qr, store_); }), ErrorCode::kVerification);
  EXPECT_FALSE(store_.mailbox_pending("alice", MailboxChannel::master_key_update(ext_.device_id())));
}

TEST_F(MobileTest, StateJsonHoldsNoSecrets) {
  auto state = phone_.state_json();
  auto mk = *TestAccess::master_key(phone_);
  EXPECT_EQ(state.find(base64url_encode(mk)), std::string::npos);
  for (const auto* key : {TestAccess::device_private_key(phone_),
                          TestAccess::signing_private_key(phone_)}) {
    for (const auto& part : TestAccess::private_parts(*key)) {
      EXPECT_EQ(state.find(base64url_encode(part)), std::string::npos);
      EXPECT_EQ(state.find(hex_encode(part)), std::string::npos);
    }
  }
}

TEST_F(MobileTest, RecoveryRequiresTheRightStatus) {
  EXPECT_EQ(code_of([&] { phone_.begin_recovery(); }), ErrorCode::kState);
  MobileApp fresh("alice", Rng::seeded(7, "fresh"));
  EXPECT_EQ(code_of([&] { fresh.finish_recovery(store_); }), ErrorCode::kState);
  fresh.begin_recovery();
  EXPECT_EQ(fresh.status(), MobileStatus::kRecovering);
  EXPECT_EQ(code_of([&] { fresh.finish_recovery(store_); }), ErrorCode::kState);
}

TEST_F(MobileTest, RecoveryRestoresKeyAndCredentials) {
  pair();
  auto id = save("https://example.com/login", "alice", "s3cret");
  auto original = *TestAccess::master_key(phone_);

  MobileApp fresh("alice", Rng::seeded(8, "fresh"));
  fresh.begin_recovery();
  auto qr = ext_.begin_recovery_serve();
  fresh.scan_recovery_qr(qr, store_);
  EXPECT_EQ(fresh.finish_recovery(store_), PollResult::kRetry);
  EXPECT_EQ(ext_.serve_recovery(store_), PollResult::kDone);
  EXPECT_EQ(fresh.finish_recovery(store_), PollResult::kDone);
  EXPECT_EQ(fresh.status(), MobileStatus::kRegistered);
  EXPECT_EQ(TestAccess::master_key(fresh), original);
  EXPECT_EQ(fresh.reveal_credential(id, always_approve(), store_).password, "s3cret");
  // The account is now bound to the new phone's key.
  auto wrapped = store_.get_wrapped_master_key("alice");
  EXPECT_EQ(unwrap(*TestAccess::device_private_key(fresh), wrapped), original);
}

TEST_F(MobileTest, RecoveryResponseWithWrongTokenIsRejected) {
  pair();
  MobileApp fresh("alice", Rng::seeded(8, "fresh"));
  fresh.begin_recovery();
  auto qr = ext_.begin_recovery_serve();
  fresh.scan_recovery_qr(qr, store_);
  // The server answers in the extension's place with a key of its own.
  auto rng = Rng::seeded(10, "evil");
  Bytes message = concat(Bytes(16, 0), Bytes(32, 0xEE));
  store_.mailbox_take("alice", MailboxChannel::recovery_request());
  store_.mailbox_put("alice", MailboxChannel::recovery_response(),
                     wrap(RsaPublicKey::decode(fresh.device_pubkey()), message, rng).encode());
  EXPECT_EQ(code_of([&] { fresh.finish_recovery(store_); }), ErrorCode::kUnwrap);
  EXPECT_FALSE(fresh.has_master_key());
  store_.mailbox_put("alice", MailboxChannel::recovery_response(), to_bytes("junk"));
  EXPECT_EQ(code_of([&] { fresh.finish_recovery(store_); }), ErrorCode::kUnwrap);
}

}  // namespace
}  // namespace rostam
