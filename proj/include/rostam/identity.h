#pragma once

// Passwordless login and the simplified federation half: service-provider
// registration and signed identity assertions for relying parties.

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "rostam/clock.h"
#include "rostam/envelope.h"
#include "rostam/fixed_bytes.h"
#include "rostam/rng.h"
#include "rostam/server_store.h"

namespace rostam {

inline constexpr std::int64_t kLoginAttemptTtlSeconds = 120;
inline constexpr std::int64_t kIdentityAssertionTtlSeconds = 300;

struct DirectoryEntry {
  std::string user_id;
  std::string email;
  std::string phone;
  Bytes signing_pubkey;  // canonical encoding
};

enum class AttemptState { kPending, kApproved, kDenied, kExpired };

const char* attempt_state_name(AttemptState state);

struct LoginAttempt {
  std::string attempt_id;
  std::string user_id;
  Challenge challenge;
  AttemptState state = AttemptState::kPending;
  Timestamp created_at = 0;
};

// What the phone receives as a push notification.
struct PushMessage {
  std::string attempt_id;
  std::string user_id;
  Challenge challenge;
  Timestamp sent_at = 0;
};

// In-process stand-in for the push notification service. One producer (the
// identity provider) and one consumer (the phone).
class PushChannel {
 public:
  void push(PushMessage msg);
  std::optional<PushMessage> front() const;
  std::optional<PushMessage> latest() const;
  std::optional<PushMessage> pop();
  void clear();
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::deque<PushMessage> queue_;
};

struct SpRegistration {
  ClientId client_id;
  ClientSecret client_secret;
  std::string redirect_url;
  std::string logout_url;
};

// The public part of a registration.
struct SpInfo {
  ClientId client_id;
  std::string redirect_url;
  std::string logout_url;
};

struct IdentityAssertion {
  std::string user_id;
  ClientId client_id;
  Timestamp issued_at = 0;
  Timestamp expires_at = 0;
  Bytes signature;

  Bytes signed_message() const;
  std::string to_json() const;
  static IdentityAssertion from_json(std::string_view text);
};

class IdentityProvider {
 public:
  // The provider's own signing key is drawn from `rng`.
  IdentityProvider(ServerApi& store, Rng rng);

  void enroll(const std::string& user_id, const std::string& email,
              const std::string& phone, ByteView signing_pubkey);
  // Directory rebinding after the user moved to a new phone. An operator
  // action; the caller vouches for the new key.
  void replace_signing_key(const std::string& user_id, ByteView signing_pubkey);
  // Accepts a user id or an email address.
  DirectoryEntry lookup(const std::string& email_or_user_id) const;

  // Creates a pending attempt and delivers its challenge on the user's push
  // channel.
  LoginAttempt begin_login(const std::string& email_or_user_id, Timestamp now);
  PushChannel& push_channel(const std::string& user_id);

  // Verifies the assertion against the attempt's challenge and the directory
  // key. Returns the new session on success, nullopt when the attempt is
  // denied or has expired. Throws Error(kState) if the attempt is not pending.
  std::optional<Session> complete_login(const std::string& attempt_id,
                                        const Assertion& assertion,
                                        Timestamp now);
  // Hands the session of an approved attempt to the browser that started it.
  // Succeeds at most once per attempt.
  std::optional<Session> claim_session(const std::string& attempt_id);
  LoginAttempt attempt(const std::string& attempt_id) const;

  SpRegistration sp_register(std::string redirect_url, std::string logout_url);
  SpInfo sp_lookup(const ClientId& client_id) const;
  bool sp_authenticate(const ClientId& client_id,
                       const ClientSecret& secret) const;

  // Throws Error(kAuth) for an invalid session, Error(kNotFound) for an
  // unknown client.
  IdentityAssertion issue_identity_assertion(const SessionId& session_id,
                                             const ClientId& client_id,
                                             Timestamp now);

  const RsaPublicKey& public_key() const { return signing_key_.keys.pub; }
  // Published key and logical endpoint names.
  std::string metadata_json() const;

 private:
  struct AttemptRecord {
    LoginAttempt attempt;
    std::optional<Session> session;
    bool claimed = false;
  };

  const DirectoryEntry& lookup_locked(const std::string& email_or_user_id) const;

  ServerApi& store_;
  mutable std::mutex mu_;
  Rng rng_;
  SigningKeyPair signing_key_;
  std::map<std::string, DirectoryEntry> directory_;
  std::map<std::string, std::string> email_index_;
  std::map<std::string, std::unique_ptr<PushChannel>> push_channels_;
  std::map<std::string, AttemptRecord> attempts_;
  std::map<ClientId, SpRegistration> sps_;
  std::map<SessionId, std::string> session_users_;
};

// Relying-party side. Returns the user id iff the signature verifies under
// `idp_pubkey`, the assertion is addressed to `client_id`, and now <
// expires_at.
std::optional<std::string> rp_verify_identity_assertion(
    const IdentityAssertion& assertion, const ClientId& client_id,
    const RsaPublicKey& idp_pubkey, Timestamp now);

}  // namespace rostam
