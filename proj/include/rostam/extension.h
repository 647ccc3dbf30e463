#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rostam/clock.h"
#include "rostam/envelope.h"
#include "rostam/identity.h"
#include "rostam/protocol.h"
#include "rostam/rng.h"
#include "rostam/server_store.h"

namespace rostam {

namespace testing {
struct TestAccess;
}

enum class SaveMode { kDetected, kManual };

struct FillEvent {
  std::string url;
  std::string username;
  std::string password;
};

struct AutofillResult {
  enum class Outcome { kFilled, kChoose, kNone };

  Outcome outcome = Outcome::kNone;
  std::optional<CredentialId> id;
  std::string username;
  std::string password;
  // Usernames offered to the user when more than one record matched.
  std::vector<std::string> choices;

  static AutofillResult none() { return {}; }
};

const char* autofill_outcome_name(AutofillResult::Outcome outcome);

// The browser extension. Its private key and imported MasterKey never leave
// the object; decrypted credentials do not outlive the call that used them.
//
// Credential operations require an unlocked extension: a live session and an
// imported MasterKey. Otherwise they throw Error(kAuth) before touching the
// server's data.
//
// Not thread-safe: one operation at a time per instance.
class BrowserExtension {
 public:
  BrowserExtension(std::string user_id, Rng rng);

  const std::string& user_id() const noexcept { return user_id_; }
  const std::string& device_id() const noexcept { return device_id_; }
  bool paired() const noexcept { return master_key_.has_value(); }
  bool has_session() const noexcept { return session_.has_value(); }
  bool pairing_pending() const noexcept { return pairing_token_.has_value(); }
  bool recovery_pending() const noexcept { return recovery_token_.has_value(); }
  // Reason for the most recent pairing or recovery abort.
  const std::optional<std::string>& last_alert() const noexcept {
    return last_alert_;
  }

  // Passwordless login: begin_login sends the push to the phone, finish_login
  // collects the session once the phone has approved.
  std::string begin_login(IdentityProvider& idp,
                          const std::string& email_or_user_id, Timestamp now);
  bool finish_login(IdentityProvider& idp);

  // Creates the device key pair on first use, a fresh one-time token on every
  // call, registers the public key and returns the QR payload.
  QrPayload begin_pairing(ServerApi& store, Timestamp now);
  // kRetry on an empty mailbox. kAbort (token cleared, nothing imported) on
  // an undecryptable message or a token mismatch.
  PollResult complete_pairing(ServerApi& store);

  // Returns nullopt when the user declines the save prompt.
  std::optional<CredentialId> save_credential(const std::string& url,
                                              const std::string& username,
                                              const std::string& password,
                                              SaveMode mode, ServerApi& store,
                                              const ConfirmGate& confirm,
                                              Timestamp now);
  // Returns false when the user declines the update prompt.
  bool update_credential(const CredentialId& id, const std::string& new_password,
                         ServerApi& store, const ConfirmGate& confirm,
                         Timestamp now);
  bool update_credential(const std::string& url, const std::string& username,
                         const std::string& new_password, ServerApi& store,
                         const ConfirmGate& confirm, Timestamp now);
  void remove_credential(const CredentialId& id, ServerApi& store,
                         Timestamp now);

  AutofillResult autofill_by_id(const CredentialId& id, ServerApi& store,
                                Timestamp now);
  AutofillResult autofill_by_url(const std::string& url, ServerApi& store,
                                 const ChooseGate& choose, Timestamp now);

  void lock(ServerApi& store);
  // Drops the session if the server reports it expired. Returns true if the
  // extension is locked afterwards.
  bool auto_lock(ServerApi& store, Timestamp now);

  // Recovery, served by an already paired extension.
  QrPayload begin_recovery_serve();
  PollResult serve_recovery(ServerApi& store);

  // Fill events stand in for writing into the page's form fields. The
  // extension never submits the form.
  void set_fill_sink(std::function<void(const FillEvent&)> sink) {
    fill_sink_ = std::move(sink);
  }

  // Persisted client state: identifiers, public key and flags only.
  std::string state_json() const;

 private:
  friend struct testing::TestAccess;

  void require_unlocked(ServerApi& store, Timestamp now);
  std::vector<CredentialRecord> records_for(const std::string& canonical_url,
                                            ServerApi& store);
  AutofillResult fill_from(const CredentialRecord& record);
  void write_password(CredentialRecord record, const std::string& new_password,
                      ServerApi& store);

  std::string user_id_;
  Rng rng_;
  std::string device_id_;
  std::optional<DeviceKeyPair> keys_;
  std::optional<PairingToken> pairing_token_;
  std::optional<PairingToken> recovery_token_;
  std::optional<MasterKey> master_key_;
  std::optional<SessionId> session_;
  std::optional<std::string> login_attempt_;
  std::function<void(const FillEvent&)> fill_sink_;
  std::optional<std::string> last_alert_;
};

}  // namespace rostam
