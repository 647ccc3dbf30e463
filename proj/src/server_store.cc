#include "rostam/server_store.h"

#include <openssl/sha.h>

#include <fstream>

#include "json.hpp"
#include "rostam/error.h"

namespace rostam {
namespace {

using nlohmann::json;

constexpr std::string_view kFormatVersionKey = "format_version";

[[noreturn]] void unknown_user(const std::string& user_id) {
  throw Error(ErrorCode::kNotFound, "unknown user: " + user_id);
}

void check_key_and_fingerprint(ByteView pubkey, const Fingerprint& fp) {
  // Throws kEncoding for malformed keys.
  RsaPublicKey::decode(pubkey);
  if (fingerprint(pubkey) != fp) {
    throw Error(ErrorCode::kRejected, "fingerprint does not match public key");
  }
}

}  // namespace

std::string MailboxChannel::slot_name() const {
  switch (kind_) {
    case Kind::kMasterKeyUpdate:
      return "master_key_update/" + device_id_;
    case Kind::kRecoveryRequest:
      return "recovery_request";
    case Kind::kRecoveryResponse:
      return "recovery_response";
  }
  return {};
}

ServerStore::ServerStore(Rng rng,
                         std::optional<std::filesystem::path> snapshot_path)
    : rng_(std::move(rng)), snapshot_path_(std::move(snapshot_path)) {
  std::lock_guard lock(mu_);
  persist_locked();
}

ServerStore::UserRecord& ServerStore::user_locked(const std::string& user_id) {
  auto it = users_.find(user_id);
  if (it == users_.end()) unknown_user(user_id);
  return it->second;
}

const ServerStore::UserRecord& ServerStore::user_locked(
    const std::string& user_id) const {
  auto it = users_.find(user_id);
  if (it == users_.end()) unknown_user(user_id);
  return it->second;
}

ServerStore::SessionHash ServerStore::hash_session(const SessionId& id) {
  SessionHash h;
  SHA256(id.value.data(), id.value.size(), h.value.data());
  return h;
}

void ServerStore::register_user(const std::string& user_id,
                                ByteView mobile_pubkey,
                                const Fingerprint& mobile_fp,
                                const WrappedPayload& wrapped_master_key) {
  if (user_id.empty() || user_id == kFormatVersionKey) {
    throw Error(ErrorCode::kInvalidArgument, "invalid user id");
  }
  check_key_and_fingerprint(mobile_pubkey, mobile_fp);
  std::lock_guard lock(mu_);
  if (users_.contains(user_id)) {
    throw Error(ErrorCode::kAlreadyExists, "user already registered: " + user_id);
  }
  UserRecord rec;
  rec.mobile_pubkey.assign(mobile_pubkey.begin(), mobile_pubkey.end());
  rec.mobile_fp = mobile_fp;
  rec.wrapped_master_key = wrapped_master_key;
  users_.emplace(user_id, std::move(rec));
  persist_locked();
}

void ServerStore::replace_mobile_key(const std::string& user_id,
                                     ByteView mobile_pubkey,
                                     const Fingerprint& mobile_fp,
                                     const WrappedPayload& wrapped_master_key) {
  check_key_and_fingerprint(mobile_pubkey, mobile_fp);
  std::lock_guard lock(mu_);
  auto& rec = user_locked(user_id);
  rec.mobile_pubkey.assign(mobile_pubkey.begin(), mobile_pubkey.end());
  rec.mobile_fp = mobile_fp;
  rec.wrapped_master_key = wrapped_master_key;
  persist_locked();
}

WrappedPayload ServerStore::get_wrapped_master_key(const std::string& user_id) {
  std::lock_guard lock(mu_);
  return user_locked(user_id).wrapped_master_key;
}

void ServerStore::put_device(const std::string& user_id,
                             const std::string& device_id, ByteView pubkey,
                             const Fingerprint& fp) {
  if (device_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty device id");
  }
  check_key_and_fingerprint(pubkey, fp);
  std::lock_guard lock(mu_);
  auto& rec = user_locked(user_id);
  rec.devices[device_id] =
      DeviceEntry{device_id, Bytes(pubkey.begin(), pubkey.end()), fp};
  persist_locked();
}

PairingMaterial ServerStore::get_pairing_material(const std::string& user_id,
                                                  const Fingerprint& device_fp) {
  std::lock_guard lock(mu_);
  const auto& rec = user_locked(user_id);
  for (const auto& [id, dev] : rec.devices) {
    if (dev.fp == device_fp) {
      return PairingMaterial{id, dev.pubkey, rec.wrapped_master_key};
    }
  }
  throw Error(ErrorCode::kNotFound, "no device with fingerprint " +
                                        device_fp.hex().substr(0, 16));
}

void ServerStore::mailbox_put(const std::string& user_id,
                              const MailboxChannel& channel, ByteView payload) {
  std::lock_guard lock(mu_);
  auto& rec = user_locked(user_id);
  rec.mailboxes[channel.slot_name()] = Bytes(payload.begin(), payload.end());
  persist_locked();
}

std::optional<Bytes> ServerStore::mailbox_take(const std::string& user_id,
                                               const MailboxChannel& channel) {
  std::lock_guard lock(mu_);
  auto& rec = user_locked(user_id);
  auto it = rec.mailboxes.find(channel.slot_name());
  if (it == rec.mailboxes.end()) return std::nullopt;
  Bytes out = std::move(it->second);
  rec.mailboxes.erase(it);
  persist_locked();
  return out;
}

void ServerStore::upsert_credential(const std::string& user_id,
                                    const CredentialRecord& record) {
  std::lock_guard lock(mu_);
  user_locked(user_id).credentials[record.id] = record;
  persist_locked();
}

CredentialRecord ServerStore::get_credential(const std::string& user_id,
                                             const CredentialId& id) {
  std::lock_guard lock(mu_);
  const auto& rec = user_locked(user_id);
  auto it = rec.credentials.find(id);
  if (it == rec.credentials.end()) {
    throw Error(ErrorCode::kNotFound, "no credential " + id.hex());
  }
  return it->second;
}

void ServerStore::delete_credential(const std::string& user_id,
                                    const CredentialId& id) {
  std::lock_guard lock(mu_);
  auto& rec = user_locked(user_id);
  if (rec.credentials.erase(id) == 0) {
    throw Error(ErrorCode::kNotFound, "no credential " + id.hex());
  }
  persist_locked();
}

std::vector<CredentialRecord> ServerStore::find_by_tag(
    const std::string& user_id, const LookupTag& tag) {
  std::lock_guard lock(mu_);
  std::vector<CredentialRecord> out;
  for (const auto& [id, record] : user_locked(user_id).credentials) {
    if (record.tag == tag) out.push_back(record);
  }
  return out;
}

std::vector<CredentialHeader> ServerStore::list_credential_headers(
    const std::string& user_id) {
  std::lock_guard lock(mu_);
  std::vector<CredentialHeader> out;
  for (const auto& [id, r] : user_locked(user_id).credentials) {
    out.push_back(CredentialHeader{r.id, r.tag, r.url, r.username});
  }
  return out;
}

Session ServerStore::create_session(const std::string& user_id, Timestamp now) {
  std::lock_guard lock(mu_);
  user_locked(user_id);
  Session s;
  rng_.fill(s.id.value);
  s.user_id = user_id;
  s.created_at = now;
  s.last_active = now;
  sessions_[hash_session(s.id)] = SessionState{user_id, now, now};
  persist_locked();
  return s;
}

SessionStatus ServerStore::validate_session(const SessionId& id,
                                            Timestamp now) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(hash_session(id));
  if (it == sessions_.end()) return SessionStatus::kExpired;
  // An expired session is never refreshed, so under a non-decreasing clock it
  // stays expired.
  if (now - it->second.last_active >= kSessionIdleTimeoutSeconds) {
    return SessionStatus::kExpired;
  }
  if (now > it->second.last_active) {
    it->second.last_active = now;
    persist_locked();
  }
  return SessionStatus::kValid;
}

void ServerStore::revoke_session(const SessionId& id) {
  std::lock_guard lock(mu_);
  if (sessions_.erase(hash_session(id)) > 0) persist_locked();
}

void ServerStore::overwrite_device(const std::string& user_id,
                                   const Fingerprint& device_fp,
                                   ByteView new_pubkey,
                                   std::optional<Fingerprint> new_fp) {
  std::lock_guard lock(mu_);
  auto& rec = user_locked(user_id);
  for (auto& [id, dev] : rec.devices) {
    if (dev.fp == device_fp) {
      dev.pubkey.assign(new_pubkey.begin(), new_pubkey.end());
      if (new_fp) dev.fp = *new_fp;
      persist_locked();
      return;
    }
  }
  throw Error(ErrorCode::kNotFound, "no device with that fingerprint");
}

bool ServerStore::has_user(const std::string& user_id) const {
  std::lock_guard lock(mu_);
  return users_.contains(user_id);
}

std::optional<DeviceEntry> ServerStore::find_device(
    const std::string& user_id, const std::string& device_id) const {
  std::lock_guard lock(mu_);
  const auto& rec = user_locked(user_id);
  auto it = rec.devices.find(device_id);
  if (it == rec.devices.end()) return std::nullopt;
  return it->second;
}

bool ServerStore::mailbox_pending(const std::string& user_id,
                                  const MailboxChannel& channel) const {
  std::lock_guard lock(mu_);
  return user_locked(user_id).mailboxes.contains(channel.slot_name());
}

std::string ServerStore::snapshot() const {
  std::lock_guard lock(mu_);
  return snapshot_locked();
}

std::string ServerStore::snapshot_locked() const {
  json doc = json::object();
  doc[std::string(kFormatVersionKey)] = kSnapshotFormatVersion;
  for (const auto& [user_id, rec] : users_) {
    json u;
    u["mobile_pubkey"] = base64url_encode(rec.mobile_pubkey);
    u["mobile_fingerprint"] = rec.mobile_fp.base64url();
    u["wrapped_master_key"] = base64url_encode(rec.wrapped_master_key.encode());

    json devices = json::object();
    for (const auto& [id, dev] : rec.devices) {
      devices[id] = {{"pubkey", base64url_encode(dev.pubkey)},
                     {"fingerprint", dev.fp.base64url()}};
    }
    u["devices"] = std::move(devices);

    json creds = json::object();
    for (const auto& [id, r] : rec.credentials) {
      creds[id.base64url()] = {{"tag", r.tag.base64url()},
                               {"url", base64url_encode(r.url.encode())},
                               {"username", base64url_encode(r.username.encode())},
                               {"password", base64url_encode(r.password.encode())}};
    }
    u["credentials"] = std::move(creds);

    json mailboxes = json::object();
    for (const auto& [slot, payload] : rec.mailboxes) {
      mailboxes[slot] = base64url_encode(payload);
    }
    u["mailboxes"] = std::move(mailboxes);

    json sessions = json::object();
    for (const auto& [hash, s] : sessions_) {
      if (s.user_id != user_id) continue;
      sessions[hash.base64url()] = {{"created_at", s.created_at},
                                    {"last_active", s.last_active}};
    }
    u["sessions"] = std::move(sessions);

    doc[user_id] = std::move(u);
  }
  return doc.dump(2) + "\n";
}

void ServerStore::persist_locked() const {
  if (!snapshot_path_) return;
  auto tmp = *snapshot_path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << snapshot_locked();
    if (!out) {
      throw Error(ErrorCode::kInvalidArgument,
                  "cannot write snapshot " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, *snapshot_path_);
}

}  // namespace rostam
