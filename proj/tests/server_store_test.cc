#include "rostam/server_store.h"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "rostam/error.h"

namespace rostam {
namespace {

using nlohmann::json;

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

const RsaKeyPair& key(int which) {
  static const std::vector<RsaKeyPair> keys = [] {
    auto rng = Rng::seeded(31, "store-test");
    std::vector<RsaKeyPair> v;
    for (int i = 0; i < 3; ++i) v.push_back(generate_rsa_keypair(rng));
    return v;
  }();
  return keys.at(static_cast<std::size_t>(which));
}

class StoreTest : public ::testing::Test {
 protected:
  StoreTest() : rng_(Rng::seeded(1, "fixture")), store_(Rng::seeded(2, "server")) {}

  void register_alice() {
    auto pub = key(0).pub.encode();
    store_.register_user("alice", pub, fingerprint(pub),
                         wrap(key(0).pub, Bytes(32, 0x11), rng_));
  }

  CredentialRecord record(const std::string& url, const std::string& user,
                          const std::string& password) {
    CredentialRecord r;
    rng_.fill(r.id.value);
    r.tag = lookup_tag(mk_, url);
    r.url = seal_field(mk_, "url", to_bytes(url), rng_);
    r.username = seal_field(mk_, "username", to_bytes(user), rng_);
    r.password = seal_field(mk_, "password", to_bytes(password), rng_);
    return r;
  }

  Rng rng_;
  MasterKey mk_ = MasterKey::from_bytes(Bytes(32, 0x42));
  ServerStore store_;
};

TEST_F(StoreTest, RegisterValidatesInput) {
  auto pub = key(0).pub.encode();
  auto wrapped = wrap(key(0).pub, Bytes(32, 1), rng_);
  EXPECT_EQ(code_of([&] { store_.register_user("", pub, fingerprint(pub), wrapped); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] {
              store_.register_user("format_version", pub, fingerprint(pub), wrapped);
            }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] {
              store_.register_user("alice", pub, fingerprint(key(1).pub), wrapped);
            }),
            ErrorCode::kRejected);
  EXPECT_EQ(code_of([&] {
              store_.register_user("alice", to_bytes("junk"), fingerprint(pub), wrapped);
            }),
            ErrorCode::kEncoding);
  EXPECT_FALSE(store_.has_user("alice"));
  store_.register_user("alice", pub, fingerprint(pub), wrapped);
  EXPECT_TRUE(store_.has_user("alice"));
  EXPECT_EQ(store_.get_wrapped_master_key("alice"), wrapped);
  EXPECT_EQ(code_of([&] { store_.register_user("alice", pub, fingerprint(pub), wrapped); }),
            ErrorCode::kAlreadyExists);
  EXPECT_EQ(code_of([&] { store_.get_wrapped_master_key("bob"); }), ErrorCode::kNotFound);
}

TEST_F(StoreTest, PairingMaterialIsFoundByFingerprint) {
  register_alice();
  auto pub = key(1).pub.encode();
  EXPECT_EQ(code_of([&] { store_.put_device("alice", "ext-1", pub, fingerprint(key(2).pub)); }),
            ErrorCode::kRejected);
  store_.put_device("alice", "ext-1", pub, fingerprint(pub));
  auto m = store_.get_pairing_material("alice", fingerprint(pub));
  EXPECT_EQ(m.device_id, "ext-1");
  EXPECT_EQ(m.device_pubkey, pub);
  EXPECT_EQ(m.wrapped_master_key, store_.get_wrapped_master_key("alice"));
  EXPECT_EQ(code_of([&] { store_.get_pairing_material("alice", fingerprint(key(2).pub)); }),
            ErrorCode::kNotFound);
}

TEST_F(StoreTest, MailboxIsReadOnceAndLastWriteWins) {
  register_alice();
  auto ch = MailboxChannel::master_key_update("ext-1");
  EXPECT_EQ(ch.slot_name(), "master_key_update/ext-1");
  EXPECT_EQ(MailboxChannel::recovery_request().slot_name(), "recovery_request");
  EXPECT_EQ(MailboxChannel::recovery_response().slot_name(), "recovery_response");
  EXPECT_FALSE(store_.mailbox_take("alice", ch).has_value());
  store_.mailbox_put("alice", ch, to_bytes("first"));
  store_.mailbox_put("alice", ch, to_bytes("second"));
  EXPECT_TRUE(store_.mailbox_pending("alice", ch));
  EXPECT_FALSE(store_.mailbox_pending("alice", MailboxChannel::master_key_update("ext-2")));
  EXPECT_EQ(store_.mailbox_take("alice", ch), to_bytes("second"));
  EXPECT_FALSE(store_.mailbox_take("alice", ch).has_value());
  EXPECT_EQ(code_of([&] { store_.mailbox_put("bob", ch, to_bytes("x")); }),
            ErrorCode::kNotFound);
}

TEST_F(StoreTest, CredentialCrud) {
  register_alice();
  auto r = record("https://example.com/login", "alice", "pw");
  store_.upsert_credential("alice", r);
  auto got = store_.get_credential("alice", r.id);
  EXPECT_EQ(got.password, r.password);
  auto updated = r;
  updated.password = seal_field(mk_, "password", to_bytes("pw2"), rng_);
  store_.upsert_credential("alice", updated);
  EXPECT_EQ(store_.get_credential("alice", r.id).password, updated.password);
  auto headers = store_.list_credential_headers("alice");
  ASSERT_EQ(headers.size(), 1u);
  EXPECT_EQ(headers[0].id, r.id);
  store_.delete_credential("alice", r.id);
  EXPECT_EQ(code_of([&] { store_.get_credential("alice", r.id); }), ErrorCode::kNotFound);
  EXPECT_EQ(code_of([&] { store_.delete_credential("alice", r.id); }), ErrorCode::kNotFound);
}

// find_by_tag must return exactly the records whose tag matches, checked
// against a shadow index maintained by the test over random operations.
TEST_F(StoreTest, FindByTagAgreesWithShadowIndex) {
  register_alice();
  std::mt19937 gen(5);
  const std::vector<std::string> urls = {"https://a.example/", "https://b.example/x",
                                         "https://c.example/", "http://a.example/"};
  std::map<CredentialId, std::string> shadow;  // id -> url
  for (int step = 0; step < 400; ++step) {
    int op = static_cast<int>(gen() % 3);
    if (op < 2 || shadow.empty()) {
      const auto& url = urls[gen() % urls.size()];
      if (op == 1 && !shadow.empty()) {
        auto it = std::next(shadow.begin(), static_cast<long>(gen() % shadow.size()));
        auto r = record(url, "u", "p");
        r.id = it->first;
        store_.upsert_credential("alice", r);
        it->second = url;
      } else {
        auto r = record(url, "u", "p");
        store_.upsert_credential("alice", r);
        shadow[r.id] = url;
      }
    } else {
      auto it = std::next(shadow.begin(), static_cast<long>(gen() % shadow.size()));
      store_.delete_credential("alice", it->first);
      shadow.erase(it);
    }
    for (const auto& url : urls) {
      std::set<CredentialId> expected, actual;
      for (const auto& [id, u] : shadow) {
        if (u == url) expected.insert(id);
      }
      for (const auto& r : store_.find_by_tag("alice", lookup_tag(mk_, url))) {
        EXPECT_EQ(r.tag, lookup_tag(mk_, url));
        actual.insert(r.id);
      }
      ASSERT_EQ(actual, expected) << "step " << step << " url " << url;
    }
  }
}

TEST_F(StoreTest, SessionIdleBoundary) {
  register_alice();
  const Timestamp t0 = 1000;
  auto s1 = store_.create_session("alice", t0);
  EXPECT_EQ(s1.user_id, "alice");
  EXPECT_EQ(store_.validate_session(s1.id, t0 + 899), SessionStatus::kValid);
  // Sliding: the successful check above refreshed last_active.
  EXPECT_EQ(store_.validate_session(s1.id, t0 + 899 + 899), SessionStatus::kValid);

  auto s2 = store_.create_session("alice", t0);
  EXPECT_EQ(store_.validate_session(s2.id, t0 + 900), SessionStatus::kExpired);
  auto s3 = store_.create_session("alice", t0);
  EXPECT_EQ(store_.validate_session(s3.id, t0 + 901), SessionStatus::kExpired);
  EXPECT_EQ(code_of([&] { store_.create_session("bob", t0); }), ErrorCode::kNotFound);
}

TEST_F(StoreTest, ExpiredSessionsStayExpired) {
  register_alice();
  auto s = store_.create_session("alice", 0);
  EXPECT_EQ(store_.validate_session(s.id, 901), SessionStatus::kExpired);
  for (Timestamp t : {901, 902, 1000, 5000, 100000}) {
    EXPECT_EQ(store_.validate_session(s.id, t), SessionStatus::kExpired) << t;
  }
}

TEST_F(StoreTest, RevokeIsImmediateAndUnknownIdsAreExpired) {
  register_alice();
  auto s = store_.create_session("alice", 0);
  store_.revoke_session(s.id);
  EXPECT_EQ(store_.validate_session(s.id, 0), SessionStatus::kExpired);
  SessionId unknown;
  unknown.value.fill(7);
  EXPECT_EQ(store_.validate_session(unknown, 0), SessionStatus::kExpired);
  store_.revoke_session(unknown);  // no-op
}

TEST_F(StoreTest, SnapshotHoldsNoRawSessionIds) {
  register_alice();
  auto s = store_.create_session("alice", 0);
  auto snap = store_.snapshot();
  EXPECT_EQ(snap.find(s.id.base64url()), std::string::npos);
  EXPECT_EQ(snap.find(s.id.hex()), std::string::npos);
  auto doc = json::parse(snap);
  EXPECT_EQ(doc["format_version"], kSnapshotFormatVersion);
  EXPECT_EQ(doc["alice"]["sessions"].size(), 1u);
}

TEST(StorePersistence, FileMatchesSnapshotAfterEveryWrite) {
  auto dir = std::filesystem::temp_directory_path() /
             ("rostam-store-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto path = dir / "snap.json";
  auto rng = Rng::seeded(3, "persist");
  ServerStore store(Rng::seeded(4, "server"), path);
  auto read = [&] {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  EXPECT_EQ(read(), store.snapshot());
  auto pub = key(0).pub.encode();
  store.register_user("alice", pub, fingerprint(pub), wrap(key(0).pub, Bytes(32, 1), rng));
  EXPECT_EQ(read(), store.snapshot());
  store.mailbox_put("alice", MailboxChannel::recovery_request(), to_bytes("m"));
  EXPECT_EQ(read(), store.snapshot());
  store.mailbox_take("alice", MailboxChannel::recovery_request());
  EXPECT_EQ(read(), store.snapshot());
  std::filesystem::remove_all(dir);
}

TEST_F(StoreTest, ConcurrentWritersKeepStoreConsistent) {
  register_alice();
  constexpr int kThreads = 4, kPerThread = 50;
  std::vector<std::vector<CredentialRecord>> batches(kThreads);
  for (auto& b : batches) {
    for (int i = 0; i < kPerThread; ++i) b.push_back(record("https://x.example/", "u", "p"));
  }
  std::atomic<int> valid_sessions{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < kThreads; ++t) {
    threads.emplace_back([&, t] {
      for (const auto& r : batches[static_cast<std::size_t>(t)]) {
        store_.upsert_credential("alice", r);
        auto s = store_.create_session("alice", 10);
        if (store_.validate_session(s.id, 11) == SessionStatus::kValid) ++valid_sessions;
        store_.mailbox_put("alice", MailboxChannel::recovery_request(), to_bytes("x"));
        store_.mailbox_take("alice", MailboxChannel::recovery_request());
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(valid_sessions.load(), kThreads * kPerThread);
  EXPECT_EQ(store_.list_credential_headers("alice").size(),
            static_cast<std::size_t>(kThreads * kPerThread));
  EXPECT_EQ(store_.find_by_tag("alice", lookup_tag(mk_, "https://x.example/")).size(),
            static_cast<std::size_t>(kThreads * kPerThread));
  EXPECT_NO_THROW(json::parse(store_.snapshot()));
}

}  // namespace
}  // namespace rostam
