#include "rostam/adversary.h"

#include <algorithm>

#include "json.hpp"
#include "rostam/error.h"

namespace rostam {
namespace {

bool contains(ByteView haystack, ByteView needle) {
  if (needle.empty()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(),
                     needle.end()) != haystack.end();
}

void collect_strings(const nlohmann::json& node, std::vector<std::string>& out) {
  if (node.is_string()) {
    out.push_back(node.get<std::string>());
  } else if (node.is_structured()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      if (node.is_object()) out.push_back(it.key());
      collect_strings(*it, out);
    }
  }
}

}  // namespace

AttackerView adversary_server_dump(const ServerStore& store,
                                   std::optional<std::string> device_state) {
  return AttackerView{store.snapshot(), std::move(device_state)};
}

LeakReport scan_for_secrets(std::string_view dump,
                            const std::vector<Secret>& secrets) {
  ByteView raw(reinterpret_cast<const std::uint8_t*>(dump.data()), dump.size());

  std::vector<Bytes> decoded;
  auto doc = nlohmann::json::parse(dump, nullptr, /*allow_exceptions=*/false);
  if (!doc.is_discarded()) {
    std::vector<std::string> strings;
    collect_strings(doc, strings);
    for (const auto& s : strings) {
      try {
        decoded.push_back(base64url_decode(s));
      } catch (const Error&) {
      }
    }
  }

  LeakReport report;
  for (const auto& secret : secrets) {
    bool found = contains(raw, secret.bytes) ||
                 contains(raw, to_bytes(base64url_encode(secret.bytes)));
    for (const auto& d : decoded) {
      if (found) break;
      found = contains(d, secret.bytes);
    }
    if (found) {
      ++report.matches;
      report.labels.push_back(secret.label);
    }
  }
  return report;
}

void adversary_substitute_pubkey(ServerStore& store, const std::string& user_id,
                                 const Fingerprint& device_fp,
                                 ByteView attacker_pubkey,
                                 bool also_fingerprint) {
  std::optional<Fingerprint> new_fp;
  if (also_fingerprint) new_fp = fingerprint(attacker_pubkey);
  store.overwrite_device(user_id, device_fp, attacker_pubkey, new_fp);
}

ForgeOutcome adversary_forge_mailbox(ServerStore& store,
                                     BrowserExtension& victim,
                                     ForgeTarget target,
                                     const RsaKeyPair& attacker_keys,
                                     const PairingToken& guessed_token,
                                     Rng& rng, bool wrong_recipient) {
  auto entry = store.find_device(victim.user_id(), victim.device_id());
  if (!entry) {
    throw Error(ErrorCode::kNotFound, "victim device not registered");
  }
  RsaPublicKey recipient = wrong_recipient ? attacker_keys.pub
                                           : RsaPublicKey::decode(entry->pubkey);

  Bytes message;
  MailboxChannel channel = MailboxChannel::recovery_request();
  if (target == ForgeTarget::kPairing) {
    message = concat(guessed_token.value, rng.bytes(kMasterKeyBytes));
    channel = MailboxChannel::master_key_update(victim.device_id());
  } else {
    message = concat(guessed_token.value, attacker_keys.pub.encode());
  }
  store.mailbox_put(victim.user_id(), channel,
                    wrap(recipient, message, rng).encode());

  ForgeOutcome outcome;
  if (target == ForgeTarget::kPairing) {
    bool was_paired = victim.paired();
    outcome.victim_result = victim.complete_pairing(store);
    outcome.victim_accepted = !was_paired && victim.paired();
  } else {
    outcome.victim_result = victim.serve_recovery(store);
    outcome.victim_accepted =
        store.mailbox_pending(victim.user_id(), MailboxChannel::recovery_response());
  }
  return outcome;
}

}  // namespace rostam
