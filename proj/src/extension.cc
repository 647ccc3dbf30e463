#include "rostam/extension.h"

#include "json.hpp"
#include "rostam/error.h"
#include "rostam/url.h"

namespace rostam {

const char* autofill_outcome_name(AutofillResult::Outcome outcome) {
  switch (outcome) {
    case AutofillResult::Outcome::kFilled: return "filled";
    case AutofillResult::Outcome::kChoose: return "choose";
    case AutofillResult::Outcome::kNone: return "none";
  }
  return "unknown";
}

BrowserExtension::BrowserExtension(std::string user_id, Rng rng)
    : user_id_(std::move(user_id)), rng_(std::move(rng)) {
  device_id_ = "ext-" + hex_encode(rng_.bytes(6));
}

std::string BrowserExtension::begin_login(IdentityProvider& idp,
                                          const std::string& email_or_user_id,
                                          Timestamp now) {
  auto attempt = idp.begin_login(email_or_user_id, now);
  login_attempt_ = attempt.attempt_id;
  return attempt.attempt_id;
}

bool BrowserExtension::finish_login(IdentityProvider& idp) {
  if (!login_attempt_) throw Error(ErrorCode::kState, "no login in progress");
  auto session = idp.claim_session(*login_attempt_);
  if (!session) return false;
  if (session->user_id != user_id_) {
    throw Error(ErrorCode::kAuth, "session belongs to another user");
  }
  session_ = session->id;
  login_attempt_.reset();
  return true;
}

QrPayload BrowserExtension::begin_pairing(ServerApi& store, Timestamp now) {
  if (!session_ || store.validate_session(*session_, now) != SessionStatus::kValid) {
    session_.reset();
    throw Error(ErrorCode::kAuth, "begin_pairing: not logged in");
  }
  if (master_key_) throw Error(ErrorCode::kState, "already paired");

  if (!keys_) keys_ = generate_device_keypair(rng_, device_id_);
  pairing_token_ = generate_token(rng_);
  Bytes pub = keys_->keys.pub.encode();
  auto fp = fingerprint(pub);
  store.put_device(user_id_, device_id_, pub, fp);
  return QrPayload{*pairing_token_, fp};
}

PollResult BrowserExtension::complete_pairing(ServerApi& store) {
  if (!pairing_token_) throw Error(ErrorCode::kState, "no pairing in progress");
  auto message =
      store.mailbox_take(user_id_, MailboxChannel::master_key_update(device_id_));
  if (!message) return PollResult::kRetry;

  PairingToken expected = *pairing_token_;
  pairing_token_.reset();

  Bytes plain;
  try {
    plain = unwrap(keys_->keys.priv, WrappedPayload::decode(*message));
  } catch (const Error&) {
    last_alert_ = "pairing message could not be decrypted";
    return PollResult::kAbort;
  }
  if (plain.size() != PairingToken::kSize + kMasterKeyBytes ||
      !secure_equal(ByteView(plain).first(PairingToken::kSize), expected.value)) {
    secure_wipe(plain);
    last_alert_ = "pairing token mismatch";
    return PollResult::kAbort;
  }
  auto key = MasterKey::from_bytes(ByteView(plain).subspan(PairingToken::kSize));
  secure_wipe(plain);
  key.make_unexportable();
  master_key_ = std::move(key);
  last_alert_.reset();
  return PollResult::kDone;
}

void BrowserExtension::require_unlocked(ServerApi& store, Timestamp now) {
  if (!session_) throw Error(ErrorCode::kAuth, "extension is locked");
  if (store.validate_session(*session_, now) != SessionStatus::kValid) {
    session_.reset();
    throw Error(ErrorCode::kAuth, "session expired");
  }
  if (!master_key_) throw Error(ErrorCode::kAuth, "extension is not paired");
}

std::optional<CredentialId> BrowserExtension::save_credential(
    const std::string& url, const std::string& username,
    const std::string& password, SaveMode mode, ServerApi& store,
    const ConfirmGate& confirm, Timestamp now) {
  require_unlocked(store, now);
  if (mode == SaveMode::kDetected && (!confirm || !confirm())) {
    return std::nullopt;
  }
  std::string canonical = canonicalize_url(url);

  CredentialRecord record;
  rng_.fill(record.id.value);
  record.tag = lookup_tag(*master_key_, canonical);
  record.url = seal_field(*master_key_, "url", to_bytes(canonical), rng_);
  record.username = seal_field(*master_key_, "username", to_bytes(username), rng_);
  record.password = seal_field(*master_key_, "password", to_bytes(password), rng_);
  store.upsert_credential(user_id_, record);
  return record.id;
}

void BrowserExtension::write_password(CredentialRecord record,
                                      const std::string& new_password,
                                      ServerApi& store) {
  record.password =
      seal_field(*master_key_, "password", to_bytes(new_password), rng_);
  store.upsert_credential(user_id_, record);
}

bool BrowserExtension::update_credential(const CredentialId& id,
                                         const std::string& new_password,
                                         ServerApi& store,
                                         const ConfirmGate& confirm,
                                         Timestamp now) {
  require_unlocked(store, now);
  auto record = store.get_credential(user_id_, id);
  if (!confirm || !confirm()) return false;
  write_password(std::move(record), new_password, store);
  return true;
}

bool BrowserExtension::update_credential(const std::string& url,
                                         const std::string& username,
                                         const std::string& new_password,
                                         ServerApi& store,
                                         const ConfirmGate& confirm,
                                         Timestamp now) {
  require_unlocked(store, now);
  for (auto& record : records_for(canonicalize_url(url), store)) {
    if (to_string(open_field(*master_key_, "username", record.username)) !=
        username) {
      continue;
    }
    if (!confirm || !confirm()) return false;
    write_password(std::move(record), new_password, store);
    return true;
  }
  throw Error(ErrorCode::kNotFound, "no saved login for that site and username");
}

void BrowserExtension::remove_credential(const CredentialId& id,
                                         ServerApi& store, Timestamp now) {
  require_unlocked(store, now);
  store.delete_credential(user_id_, id);
}

std::vector<CredentialRecord> BrowserExtension::records_for(
    const std::string& canonical_url, ServerApi& store) {
  auto records = store.find_by_tag(user_id_, lookup_tag(*master_key_, canonical_url));
  // The tag query runs on the server; the sealed URL is authoritative.
  std::erase_if(records, [&](const CredentialRecord& r) {
    return to_string(open_field(*master_key_, "url", r.url)) != canonical_url;
  });
  return records;
}

AutofillResult BrowserExtension::fill_from(const CredentialRecord& record) {
  AutofillResult result;
  std::string url = to_string(open_field(*master_key_, "url", record.url));
  result.username = to_string(open_field(*master_key_, "username", record.username));
  result.password = to_string(open_field(*master_key_, "password", record.password));
  result.outcome = AutofillResult::Outcome::kFilled;
  result.id = record.id;
  if (fill_sink_) fill_sink_(FillEvent{url, result.username, result.password});
  return result;
}

AutofillResult BrowserExtension::autofill_by_id(const CredentialId& id,
                                                ServerApi& store,
                                                Timestamp now) {
  require_unlocked(store, now);
  return fill_from(store.get_credential(user_id_, id));
}

AutofillResult BrowserExtension::autofill_by_url(const std::string& url,
                                                 ServerApi& store,
                                                 const ChooseGate& choose,
                                                 Timestamp now) {
  require_unlocked(store, now);
  auto records = records_for(canonicalize_url(url), store);
  if (records.empty()) return AutofillResult::none();
  if (records.size() == 1) return fill_from(records.front());

  std::vector<std::string> usernames;
  usernames.reserve(records.size());
  for (const auto& r : records) {
    usernames.push_back(to_string(open_field(*master_key_, "username", r.username)));
  }
  std::optional<std::size_t> pick;
  if (choose) pick = choose(usernames);
  if (pick && *pick < records.size()) {
    auto result = fill_from(records[*pick]);
    result.choices = std::move(usernames);
    return result;
  }
  AutofillResult result;
  result.outcome = AutofillResult::Outcome::kChoose;
  result.choices = std::move(usernames);
  return result;
}

void BrowserExtension::lock(ServerApi& store) {
  if (session_) store.revoke_session(*session_);
  session_.reset();
}

bool BrowserExtension::auto_lock(ServerApi& store, Timestamp now) {
  if (session_ && store.validate_session(*session_, now) != SessionStatus::kValid) {
    session_.reset();
  }
  return !session_;
}

QrPayload BrowserExtension::begin_recovery_serve() {
  if (!master_key_) {
    throw Error(ErrorCode::kState, "recovery needs an already paired extension");
  }
  recovery_token_ = generate_token(rng_);
  return QrPayload{*recovery_token_, fingerprint(keys_->keys.pub)};
}

PollResult BrowserExtension::serve_recovery(ServerApi& store) {
  if (!recovery_token_) throw Error(ErrorCode::kState, "no recovery in progress");
  auto request = store.mailbox_take(user_id_, MailboxChannel::recovery_request());
  if (!request) return PollResult::kRetry;

  PairingToken expected = *recovery_token_;
  recovery_token_.reset();

  Bytes plain;
  try {
    plain = unwrap(keys_->keys.priv, WrappedPayload::decode(*request));
  } catch (const Error&) {
    last_alert_ = "recovery request could not be decrypted";
    return PollResult::kAbort;
  }
  if (plain.size() <= PairingToken::kSize ||
      !secure_equal(ByteView(plain).first(PairingToken::kSize), expected.value)) {
    last_alert_ = "recovery token mismatch";
    return PollResult::kAbort;
  }
  RsaPublicKey new_phone;
  try {
    new_phone = RsaPublicKey::decode(ByteView(plain).subspan(PairingToken::kSize));
  } catch (const Error&) {
    last_alert_ = "recovery request carries a malformed key";
    return PollResult::kAbort;
  }

  Bytes response = concat(expected.value, detail::MasterKeyAccess::raw(*master_key_));
  auto wrapped = wrap(new_phone, response, rng_);
  secure_wipe(response);
  store.mailbox_put(user_id_, MailboxChannel::recovery_response(), wrapped.encode());
  last_alert_.reset();
  return PollResult::kDone;
}

std::string BrowserExtension::state_json() const {
  nlohmann::json j = {{"user_id", user_id_},
                      {"device_id", device_id_},
                      {"paired", master_key_.has_value()},
                      {"pairing_pending", pairing_token_.has_value()},
                      {"recovery_pending", recovery_token_.has_value()},
                      {"has_session", session_.has_value()}};
  if (keys_) j["device_pubkey"] = base64url_encode(keys_->keys.pub.encode());
  return j.dump();
}

}  // namespace rostam
