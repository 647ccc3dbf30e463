#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rostam/bytes.h"
#include "rostam/clock.h"
#include "rostam/envelope.h"
#include "rostam/fixed_bytes.h"

namespace rostam {

inline constexpr std::int64_t kSessionIdleTimeoutSeconds = 15 * 60;
inline constexpr int kSnapshotFormatVersion = 1;

struct DeviceEntry {
  std::string device_id;
  Bytes pubkey;  // canonical encoding
  Fingerprint fp;
};

struct CredentialRecord {
  CredentialId id;
  LookupTag tag;
  EncryptedBlob url;
  EncryptedBlob username;
  EncryptedBlob password;
};

// A record without its password field, for listing.
struct CredentialHeader {
  CredentialId id;
  LookupTag tag;
  EncryptedBlob url;
  EncryptedBlob username;
};

struct Session {
  SessionId id;
  std::string user_id;
  Timestamp created_at = 0;
  Timestamp last_active = 0;
};

enum class SessionStatus { kValid, kExpired };

class MailboxChannel {
 public:
  enum class Kind { kMasterKeyUpdate, kRecoveryRequest, kRecoveryResponse };

  static MailboxChannel master_key_update(std::string device_id) {
    return MailboxChannel(Kind::kMasterKeyUpdate, std::move(device_id));
  }
  static MailboxChannel recovery_request() {
    return MailboxChannel(Kind::kRecoveryRequest, {});
  }
  static MailboxChannel recovery_response() {
    return MailboxChannel(Kind::kRecoveryResponse, {});
  }

  Kind kind() const noexcept { return kind_; }
  const std::string& device_id() const noexcept { return device_id_; }

  // Slot name used in snapshots, e.g. "master_key_update/<device_id>".
  std::string slot_name() const;

 private:
  MailboxChannel(Kind kind, std::string device_id)
      : kind_(kind), device_id_(std::move(device_id)) {}

  Kind kind_;
  std::string device_id_;
};

struct PairingMaterial {
  std::string device_id;
  Bytes device_pubkey;
  WrappedPayload wrapped_master_key;
};

// Everything an actor may ask of the server. Every operation is atomic.
// Errors are reported as rostam::Error: kNotFound for unknown users, records
// and fingerprints; kRejected when a fingerprint does not match its key.
class ServerApi {
 public:
  virtual ~ServerApi() = default;

  virtual void register_user(const std::string& user_id, ByteView mobile_pubkey,
                             const Fingerprint& mobile_fp,
                             const WrappedPayload& wrapped_master_key) = 0;
  // Used at the end of recovery to rebind the account to a new phone.
  virtual void replace_mobile_key(const std::string& user_id,
                                  ByteView mobile_pubkey,
                                  const Fingerprint& mobile_fp,
                                  const WrappedPayload& wrapped_master_key) = 0;
  virtual WrappedPayload get_wrapped_master_key(const std::string& user_id) = 0;

  virtual void put_device(const std::string& user_id,
                          const std::string& device_id, ByteView pubkey,
                          const Fingerprint& fp) = 0;
  virtual PairingMaterial get_pairing_material(const std::string& user_id,
                                               const Fingerprint& device_fp) = 0;

  virtual void mailbox_put(const std::string& user_id,
                           const MailboxChannel& channel, ByteView payload) = 0;
  virtual std::optional<Bytes> mailbox_take(const std::string& user_id,
                                            const MailboxChannel& channel) = 0;

  virtual void upsert_credential(const std::string& user_id,
                                 const CredentialRecord& record) = 0;
  virtual CredentialRecord get_credential(const std::string& user_id,
                                          const CredentialId& id) = 0;
  virtual void delete_credential(const std::string& user_id,
                                 const CredentialId& id) = 0;
  virtual std::vector<CredentialRecord> find_by_tag(const std::string& user_id,
                                                    const LookupTag& tag) = 0;
  virtual std::vector<CredentialHeader> list_credential_headers(
      const std::string& user_id) = 0;

  virtual Session create_session(const std::string& user_id, Timestamp now) = 0;
  // Refreshes last_active on success. Any session that is not live reports
  // kExpired.
  virtual SessionStatus validate_session(const SessionId& id, Timestamp now) = 0;
  virtual void revoke_session(const SessionId& id) = 0;
};

// In-memory server with optional write-through JSON snapshots.
//
// Holds only data that is safe to lose to an attacker: wrapped keys, public
// keys, ciphertexts, lookup tags, and hashes of session ids.
class ServerStore final : public ServerApi {
 public:
  // `rng` supplies credential-independent identifiers (session ids).
  explicit ServerStore(Rng rng,
                       std::optional<std::filesystem::path> snapshot_path = {});

  void register_user(const std::string& user_id, ByteView mobile_pubkey,
                     const Fingerprint& mobile_fp,
                     const WrappedPayload& wrapped_master_key) override;
  void replace_mobile_key(const std::string& user_id, ByteView mobile_pubkey,
                          const Fingerprint& mobile_fp,
                          const WrappedPayload& wrapped_master_key) override;
  WrappedPayload get_wrapped_master_key(const std::string& user_id) override;

  void put_device(const std::string& user_id, const std::string& device_id,
                  ByteView pubkey, const Fingerprint& fp) override;
  PairingMaterial get_pairing_material(const std::string& user_id,
                                       const Fingerprint& device_fp) override;

  void mailbox_put(const std::string& user_id, const MailboxChannel& channel,
                   ByteView payload) override;
  std::optional<Bytes> mailbox_take(const std::string& user_id,
                                    const MailboxChannel& channel) override;

  void upsert_credential(const std::string& user_id,
                         const CredentialRecord& record) override;
  CredentialRecord get_credential(const std::string& user_id,
                                  const CredentialId& id) override;
  void delete_credential(const std::string& user_id,
                         const CredentialId& id) override;
  std::vector<CredentialRecord> find_by_tag(const std::string& user_id,
                                            const LookupTag& tag) override;
  std::vector<CredentialHeader> list_credential_headers(
      const std::string& user_id) override;

  Session create_session(const std::string& user_id, Timestamp now) override;
  SessionStatus validate_session(const SessionId& id, Timestamp now) override;
  void revoke_session(const SessionId& id) override;

  // Direct database access, bypassing every protocol check. Models a
  // compromised server; used by the adversary operations.
  void overwrite_device(const std::string& user_id,
                        const Fingerprint& device_fp, ByteView new_pubkey,
                        std::optional<Fingerprint> new_fp);

  bool has_user(const std::string& user_id) const;
  std::optional<DeviceEntry> find_device(const std::string& user_id,
                                         const std::string& device_id) const;
  bool mailbox_pending(const std::string& user_id,
                       const MailboxChannel& channel) const;

  // Whole-store JSON document; byte-identical to the persisted file.
  std::string snapshot() const;

 private:
  using SessionHash = FixedBytes<32, struct SessionHashTag>;

  struct SessionState {
    std::string user_id;
    Timestamp created_at = 0;
    Timestamp last_active = 0;
  };

  struct UserRecord {
    Bytes mobile_pubkey;
    Fingerprint mobile_fp;
    WrappedPayload wrapped_master_key;
    std::map<std::string, DeviceEntry> devices;
    std::map<CredentialId, CredentialRecord> credentials;
    std::map<std::string, Bytes> mailboxes;
  };

  UserRecord& user_locked(const std::string& user_id);
  const UserRecord& user_locked(const std::string& user_id) const;
  static SessionHash hash_session(const SessionId& id);
  std::string snapshot_locked() const;
  void persist_locked() const;

  mutable std::mutex mu_;
  Rng rng_;
  std::optional<std::filesystem::path> snapshot_path_;
  std::map<std::string, UserRecord> users_;
  // Keyed by SHA-256 of the session id.
  std::map<SessionHash, SessionState> sessions_;
};

}  // namespace rostam
