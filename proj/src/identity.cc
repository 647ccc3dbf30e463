#include "rostam/identity.h"

#include "json.hpp"
#include "rostam/error.h"

namespace rostam {
namespace {

using nlohmann::json;

void append_u64(Bytes& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_str(Bytes& out, std::string_view s) {
  append_u64(out, s.size());
  out.insert(out.end(), s.begin(), s.end());
}

}  // namespace

const char* attempt_state_name(AttemptState state) {
  switch (state) {
    case AttemptState::kPending: return "pending";
    case AttemptState::kApproved: return "approved";
    case AttemptState::kDenied: return "denied";
    case AttemptState::kExpired: return "expired";
  }
  return "unknown";
}

void PushChannel::push(PushMessage msg) {
  std::lock_guard lock(mu_);
  queue_.push_back(std::move(msg));
}

std::optional<PushMessage> PushChannel::front() const {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  return queue_.front();
}

std::optional<PushMessage> PushChannel::latest() const {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  return queue_.back();
}

void PushChannel::clear() {
  std::lock_guard lock(mu_);
  queue_.clear();
}

std::optional<PushMessage> PushChannel::pop() {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  auto msg = std::move(queue_.front());
  queue_.pop_front();
  return msg;
}

std::size_t PushChannel::size() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

Bytes IdentityAssertion::signed_message() const {
  Bytes m = to_bytes("rostam-identity-assertion/v1");
  append_str(m, user_id);
  m.insert(m.end(), client_id.value.begin(), client_id.value.end());
  append_u64(m, static_cast<std::uint64_t>(issued_at));
  append_u64(m, static_cast<std::uint64_t>(expires_at));
  return m;
}

std::string IdentityAssertion::to_json() const {
  json j = {{"user_id", user_id},
            {"client_id", client_id.base64url()},
            {"issued_at", issued_at},
            {"expires_at", expires_at},
            {"signature", base64url_encode(signature)}};
  return j.dump();
}

IdentityAssertion IdentityAssertion::from_json(std::string_view text) {
  try {
    auto j = json::parse(text);
    IdentityAssertion a;
    a.user_id = j.at("user_id").get<std::string>();
    a.client_id = ClientId::from_base64url(j.at("client_id").get<std::string>());
    a.issued_at = j.at("issued_at").get<Timestamp>();
    a.expires_at = j.at("expires_at").get<Timestamp>();
    a.signature = base64url_decode(j.at("signature").get<std::string>());
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("identity assertion: ") + e.what());
  }
}

IdentityProvider::IdentityProvider(ServerApi& store, Rng rng)
    : store_(store), rng_(std::move(rng)),
      signing_key_(generate_signing_keypair(rng_)) {}

void IdentityProvider::enroll(const std::string& user_id,
                              const std::string& email,
                              const std::string& phone,
                              ByteView signing_pubkey) {
  RsaPublicKey::decode(signing_pubkey);
  std::lock_guard lock(mu_);
  if (directory_.contains(user_id) || email_index_.contains(email)) {
    throw Error(ErrorCode::kAlreadyExists, "already enrolled: " + user_id);
  }
  directory_[user_id] = DirectoryEntry{
      user_id, email, phone, Bytes(signing_pubkey.begin(), signing_pubkey.end())};
  if (!email.empty()) email_index_[email] = user_id;
}

void IdentityProvider::replace_signing_key(const std::string& user_id,
                                           ByteView signing_pubkey) {
  RsaPublicKey::decode(signing_pubkey);
  std::lock_guard lock(mu_);
  auto it = directory_.find(user_id);
  if (it == directory_.end()) {
    throw Error(ErrorCode::kNotFound, "not enrolled: " + user_id);
  }
  it->second.signing_pubkey.assign(signing_pubkey.begin(), signing_pubkey.end());
}

const DirectoryEntry& IdentityProvider::lookup_locked(
    const std::string& email_or_user_id) const {
  auto it = directory_.find(email_or_user_id);
  if (it != directory_.end()) return it->second;
  auto e = email_index_.find(email_or_user_id);
  if (e != email_index_.end()) return directory_.at(e->second);
  throw Error(ErrorCode::kNotFound, "not enrolled: " + email_or_user_id);
}

DirectoryEntry IdentityProvider::lookup(
    const std::string& email_or_user_id) const {
  std::lock_guard lock(mu_);
  return lookup_locked(email_or_user_id);
}

PushChannel& IdentityProvider::push_channel(const std::string& user_id) {
  std::lock_guard lock(mu_);
  auto& slot = push_channels_[user_id];
  if (!slot) slot = std::make_unique<PushChannel>();
  return *slot;
}

LoginAttempt IdentityProvider::begin_login(const std::string& email_or_user_id,
                                           Timestamp now) {
  LoginAttempt attempt;
  PushChannel* channel = nullptr;
  {
    std::lock_guard lock(mu_);
    const auto& entry = lookup_locked(email_or_user_id);
    attempt.attempt_id = hex_encode(rng_.bytes(8));
    attempt.user_id = entry.user_id;
    rng_.fill(attempt.challenge.value);
    attempt.created_at = now;
    attempts_[attempt.attempt_id] = AttemptRecord{attempt, std::nullopt, false};
    auto& slot = push_channels_[entry.user_id];
    if (!slot) slot = std::make_unique<PushChannel>();
    channel = slot.get();
  }
  channel->push(PushMessage{attempt.attempt_id, attempt.user_id,
                            attempt.challenge, now});
  return attempt;
}

std::optional<Session> IdentityProvider::complete_login(
    const std::string& attempt_id, const Assertion& assertion, Timestamp now) {
  std::unique_lock lock(mu_);
  auto it = attempts_.find(attempt_id);
  if (it == attempts_.end()) {
    throw Error(ErrorCode::kNotFound, "unknown login attempt");
  }
  auto& rec = it->second;
  if (rec.attempt.state != AttemptState::kPending) {
    throw Error(ErrorCode::kState,
                std::string("login attempt is ") +
                    attempt_state_name(rec.attempt.state));
  }
  if (now - rec.attempt.created_at > kLoginAttemptTtlSeconds) {
    rec.attempt.state = AttemptState::kExpired;
    return std::nullopt;
  }
  const auto& entry = lookup_locked(rec.attempt.user_id);
  bool ok = assertion.user_id == rec.attempt.user_id &&
            verify_assertion(RsaPublicKey::decode(entry.signing_pubkey),
                             assertion, rec.attempt.challenge, now);
  if (!ok) {
    rec.attempt.state = AttemptState::kDenied;
    return std::nullopt;
  }
  // The attempt is consumed before the session exists, so no second session
  // can ever be created from it.
  rec.attempt.state = AttemptState::kApproved;
  auto session = store_.create_session(rec.attempt.user_id, now);
  rec.session = session;
  session_users_[session.id] = session.user_id;
  return session;
}

std::optional<Session> IdentityProvider::claim_session(
    const std::string& attempt_id) {
  std::lock_guard lock(mu_);
  auto it = attempts_.find(attempt_id);
  if (it == attempts_.end() || !it->second.session || it->second.claimed) {
    return std::nullopt;
  }
  it->second.claimed = true;
  return it->second.session;
}

LoginAttempt IdentityProvider::attempt(const std::string& attempt_id) const {
  std::lock_guard lock(mu_);
  auto it = attempts_.find(attempt_id);
  if (it == attempts_.end()) {
    throw Error(ErrorCode::kNotFound, "unknown login attempt");
  }
  return it->second.attempt;
}

SpRegistration IdentityProvider::sp_register(std::string redirect_url,
                                             std::string logout_url) {
  std::lock_guard lock(mu_);
  SpRegistration reg;
  do {
    rng_.fill(reg.client_id.value);
  } while (sps_.contains(reg.client_id));
  rng_.fill(reg.client_secret.value);
  reg.redirect_url = std::move(redirect_url);
  reg.logout_url = std::move(logout_url);
  sps_[reg.client_id] = reg;
  return reg;
}

SpInfo IdentityProvider::sp_lookup(const ClientId& client_id) const {
  std::lock_guard lock(mu_);
  auto it = sps_.find(client_id);
  if (it == sps_.end()) throw Error(ErrorCode::kNotFound, "unknown client");
  return SpInfo{it->second.client_id, it->second.redirect_url,
                it->second.logout_url};
}

bool IdentityProvider::sp_authenticate(const ClientId& client_id,
                                       const ClientSecret& secret) const {
  std::lock_guard lock(mu_);
  auto it = sps_.find(client_id);
  return it != sps_.end() &&
         secure_equal(it->second.client_secret.value, secret.value);
}

IdentityAssertion IdentityProvider::issue_identity_assertion(
    const SessionId& session_id, const ClientId& client_id, Timestamp now) {
  std::string user_id;
  {
    std::lock_guard lock(mu_);
    if (!sps_.contains(client_id)) {
      throw Error(ErrorCode::kNotFound, "unknown client");
    }
    auto it = session_users_.find(session_id);
    if (it == session_users_.end()) {
      throw Error(ErrorCode::kAuth, "unknown session");
    }
    user_id = it->second;
  }
  if (store_.validate_session(session_id, now) != SessionStatus::kValid) {
    throw Error(ErrorCode::kAuth, "session expired");
  }
  IdentityAssertion a;
  a.user_id = std::move(user_id);
  a.client_id = client_id;
  a.issued_at = now;
  a.expires_at = now + kIdentityAssertionTtlSeconds;
  a.signature = rsa_sign_sha256(signing_key_.keys.priv, a.signed_message());
  return a;
}

std::string IdentityProvider::metadata_json() const {
  json j = {{"issuer", "rostam-idp"},
            {"idp_pubkey", base64url_encode(signing_key_.keys.pub.encode())},
            {"endpoints",
             {{"authorization", "begin_login"},
              {"token", "issue_identity_assertion"},
              {"registration", "sp_register"},
              {"end_session", "revoke_session"}}}};
  return j.dump(2);
}

std::optional<std::string> rp_verify_identity_assertion(
    const IdentityAssertion& assertion, const ClientId& client_id,
    const RsaPublicKey& idp_pubkey, Timestamp now) {
  if (assertion.client_id != client_id) return std::nullopt;
  if (!(now < assertion.expires_at)) return std::nullopt;
  if (!rsa_verify_sha256(idp_pubkey, assertion.signed_message(),
                         assertion.signature)) {
    return std::nullopt;
  }
  return assertion.user_id;
}

}  // namespace rostam
