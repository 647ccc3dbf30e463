#pragma once

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

enum class MobileStatus { kUnregistered, kRegistered, kRecovering };

const char* mobile_status_name(MobileStatus status);

struct RevealedCredential {
  CredentialId id;
  std::string url;
  std::string username;
  std::string password;
};

struct CredentialListing {
  CredentialId id;
  std::string url;
  std::string username;
};

// The phone. Owns the MasterKey, the device key pair used for key wrapping
// and the signing key pair used for login assertions. None of them leave the
// object through its public interface once setup or recovery completes.
//
// Not thread-safe: one operation at a time per instance.
class MobileApp {
 public:
  MobileApp(std::string user_id, Rng rng);

  const std::string& user_id() const noexcept { return user_id_; }
  MobileStatus status() const noexcept { return status_; }
  bool has_master_key() const noexcept { return master_key_.has_value(); }

  // Canonical encodings; throw Error(kState) before keys exist.
  Bytes device_pubkey() const;
  Bytes signing_pubkey() const;

  // Generates keys and the MasterKey and uploads the wrapped MasterKey. If
  // the server refuses, the freshly generated keys are discarded.
  void setup(ServerApi& store);

  // Answers the newest pending push notification. The gate runs before
  // anything is sent; on denial the attempt stays pending and Error(kGate) is
  // thrown. Returns true when the provider accepted the assertion.
  bool approve_login(IdentityProvider& idp, const BiometricGate& gate,
                     Timestamp now);

  // Pairing: fetch the extension's key by the scanned fingerprint, check it,
  // and post wrap(extension key, token ∥ MasterKey) to the device's mailbox.
  void scan_pairing_qr(const QrPayload& payload, ServerApi& store);
  // Parses first; a malformed payload causes no server traffic.
  void scan_pairing_qr(ByteView raw_payload, ServerApi& store);

  // Switches a fresh phone into recovery with new key pairs. Calling it again
  // while recovering regenerates the key pairs.
  void begin_recovery();
  void scan_recovery_qr(const QrPayload& payload, ServerApi& store);
  void scan_recovery_qr(ByteView raw_payload, ServerApi& store);
  // kRetry while no response is posted, kDone once the MasterKey is
  // installed. Throws Error(kUnwrap) if the response cannot be opened.
  PollResult finish_recovery(ServerApi& store);

  RevealedCredential reveal_credential(const CredentialId& id,
                                       const BiometricGate& gate,
                                       ServerApi& store);
  // URLs and usernames only; password fields are never fetched.
  std::vector<CredentialListing> list_credentials(ServerApi& store);

  // Persisted client state. Holds public keys and status only.
  std::string state_json() const;

 private:
  friend struct testing::TestAccess;

  void require_status(MobileStatus expected, const char* op) const;
  RsaPublicKey fetch_verified_key(ServerApi& store, const Fingerprint& fp,
                                  PairingMaterial& material) const;

  std::string user_id_;
  Rng rng_;
  MobileStatus status_ = MobileStatus::kUnregistered;
  std::optional<DeviceKeyPair> device_keys_;
  std::optional<SigningKeyPair> signing_keys_;
  std::optional<MasterKey> master_key_;
  std::optional<PairingToken> recovery_token_;
};

}  // namespace rostam
