#pragma once

// Operations of an attacker who controls the server: read everything, rewrite
// anything. Verdicts are derived from what honest actors observably do.

#include <optional>
#include <string>
#include <vector>

#include "rostam/extension.h"
#include "rostam/rsa.h"
#include "rostam/server_store.h"

namespace rostam {

struct AttackerView {
  // Exactly ServerStore::snapshot().
  std::string server_dump;
  // Optional persisted state of one captured client device.
  std::optional<std::string> device_state;
};

AttackerView adversary_server_dump(const ServerStore& store,
                                   std::optional<std::string> device_state = {});

struct LeakReport {
  std::size_t matches = 0;
  std::vector<std::string> labels;  // which secrets were found
};

struct Secret {
  std::string label;
  Bytes bytes;
};

// Searches the dump for each secret: verbatim, as base64url text, and inside
// every string field that decodes as base64url.
LeakReport scan_for_secrets(std::string_view dump,
                            const std::vector<Secret>& secrets);

// Replaces the public key stored for `device_fp`. With `also_fingerprint`
// the stored fingerprint is rewritten to match the attacker key as well.
void adversary_substitute_pubkey(ServerStore& store, const std::string& user_id,
                                 const Fingerprint& device_fp,
                                 ByteView attacker_pubkey,
                                 bool also_fingerprint = false);

enum class ForgeTarget { kPairing, kRecovery };

struct ForgeOutcome {
  PollResult victim_result = PollResult::kRetry;
  // Pairing: the victim imported a MasterKey. Recovery: the victim posted a
  // response.
  bool victim_accepted = false;
};

// Writes a well-formed message carrying `guessed_token` into the mailbox the
// victim extension is polling, then lets the victim poll once.
//
// Pairing message: token ∥ random attacker MasterKey. Recovery message:
// token ∥ attacker public key. The message is wrapped for the victim's
// public key as stored on the server, or for the attacker's own key when
// `wrong_recipient` is set.
ForgeOutcome adversary_forge_mailbox(ServerStore& store,
                                     BrowserExtension& victim,
                                     ForgeTarget target,
                                     const RsaKeyPair& attacker_keys,
                                     const PairingToken& guessed_token,
                                     Rng& rng, bool wrong_recipient = false);

}  // namespace rostam
