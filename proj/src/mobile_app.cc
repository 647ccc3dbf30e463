#include "rostam/mobile_app.h"

#include "json.hpp"
#include "rostam/error.h"

namespace rostam {

const char* mobile_status_name(MobileStatus status) {
  switch (status) {
    case MobileStatus::kUnregistered: return "unregistered";
    case MobileStatus::kRegistered: return "registered";
    case MobileStatus::kRecovering: return "recovering";
  }
  return "unknown";
}

MobileApp::MobileApp(std::string user_id, Rng rng)
    : user_id_(std::move(user_id)), rng_(std::move(rng)) {}

void MobileApp::require_status(MobileStatus expected, const char* op) const {
  if (status_ != expected) {
    throw Error(ErrorCode::kState, std::string(op) + ": phone is " +
                                       mobile_status_name(status_));
  }
}

Bytes MobileApp::device_pubkey() const {
  if (!device_keys_) throw Error(ErrorCode::kState, "no device key");
  return device_keys_->keys.pub.encode();
}

Bytes MobileApp::signing_pubkey() const {
  if (!signing_keys_) throw Error(ErrorCode::kState, "no signing key");
  return signing_keys_->keys.pub.encode();
}

void MobileApp::setup(ServerApi& store) {
  require_status(MobileStatus::kUnregistered, "setup");

  auto device = generate_device_keypair(rng_, "phone-" + hex_encode(rng_.bytes(6)));
  auto signing = generate_signing_keypair(rng_);
  auto master = generate_master_key(rng_);

  auto wrapped =
      wrap(device.keys.pub, detail::MasterKeyAccess::raw(master), rng_);
  Bytes pub = device.keys.pub.encode();
  try {
    store.register_user(user_id_, pub, fingerprint(pub), wrapped);
  } catch (...) {
    device.keys.priv.wipe();
    signing.keys.priv.wipe();
    throw;
  }

  master.make_unexportable();
  device_keys_ = std::move(device);
  signing_keys_ = std::move(signing);
  master_key_ = std::move(master);
  status_ = MobileStatus::kRegistered;
}

bool MobileApp::approve_login(IdentityProvider& idp, const BiometricGate& gate,
                              Timestamp now) {
  require_status(MobileStatus::kRegistered, "approve_login");
  auto& channel = idp.push_channel(user_id_);
  // The user answers the newest notification; older ones are dismissed with
  // it.
  auto pending = channel.latest();
  if (!pending) throw Error(ErrorCode::kState, "no pending login request");
  if (!gate || !gate()) throw Error(ErrorCode::kGate, "biometric check denied");
  channel.clear();

  auto assertion = sign_assertion(signing_keys_->keys.priv, user_id_,
                                  pending->challenge, now);
  return idp.complete_login(pending->attempt_id, assertion, now).has_value();
}

RsaPublicKey MobileApp::fetch_verified_key(ServerApi& store,
                                           const Fingerprint& fp,
                                           PairingMaterial& material) const {
  material = store.get_pairing_material(user_id_, fp);
  // The server is untrusted: the key is only usable if it hashes to the
  // fingerprint read from the extension's screen.
  if (fingerprint(material.device_pubkey) != fp) {
    throw Error(ErrorCode::kVerification,
                "public key from server does not match scanned fingerprint");
  }
  return RsaPublicKey::decode(material.device_pubkey);
}

void MobileApp::scan_pairing_qr(ByteView raw_payload, ServerApi& store) {
  scan_pairing_qr(QrPayload::parse(raw_payload), store);
}

void MobileApp::scan_pairing_qr(const QrPayload& payload, ServerApi& store) {
  require_status(MobileStatus::kRegistered, "scan_pairing_qr");

  PairingMaterial material;
  RsaPublicKey extension_key = fetch_verified_key(store, payload.fp, material);

  // The server copy must still open to the key this phone holds; otherwise
  // the server swapped in a MasterKey of its own choosing.
  Bytes server_copy = unwrap(device_keys_->keys.priv, material.wrapped_master_key);
  bool same = secure_equal(server_copy, detail::MasterKeyAccess::raw(*master_key_));
  secure_wipe(server_copy);
  if (!same) {
    throw Error(ErrorCode::kVerification,
                "wrapped MasterKey on server does not match local key");
  }

  Bytes message = concat(payload.token.value,
                         detail::MasterKeyAccess::raw(*master_key_));
  auto wrapped = wrap(extension_key, message, rng_);
  secure_wipe(message);
  store.mailbox_put(user_id_, MailboxChannel::master_key_update(material.device_id),
                    wrapped.encode());
}

void MobileApp::begin_recovery() {
  if (status_ == MobileStatus::kRegistered) {
    throw Error(ErrorCode::kState, "begin_recovery: phone is registered");
  }
  if (device_keys_) device_keys_->keys.priv.wipe();
  if (signing_keys_) signing_keys_->keys.priv.wipe();
  device_keys_ =
      generate_device_keypair(rng_, "phone-" + hex_encode(rng_.bytes(6)));
  signing_keys_ = generate_signing_keypair(rng_);
  master_key_.reset();
  recovery_token_.reset();
  status_ = MobileStatus::kRecovering;
}

void MobileApp::scan_recovery_qr(ByteView raw_payload, ServerApi& store) {
  scan_recovery_qr(QrPayload::parse(raw_payload), store);
}

void MobileApp::scan_recovery_qr(const QrPayload& payload, ServerApi& store) {
  require_status(MobileStatus::kRecovering, "scan_recovery_qr");

  PairingMaterial material;
  RsaPublicKey extension_key = fetch_verified_key(store, payload.fp, material);

  Bytes message = concat(payload.token.value, device_keys_->keys.pub.encode());
  auto wrapped = wrap(extension_key, message, rng_);
  store.mailbox_put(user_id_, MailboxChannel::recovery_request(),
                    wrapped.encode());
  recovery_token_ = payload.token;
}

PollResult MobileApp::finish_recovery(ServerApi& store) {
  require_status(MobileStatus::kRecovering, "finish_recovery");
  if (!recovery_token_) {
    throw Error(ErrorCode::kState, "finish_recovery: no recovery QR scanned");
  }
  auto response = store.mailbox_take(user_id_, MailboxChannel::recovery_response());
  if (!response) return PollResult::kRetry;

  Bytes plain;
  try {
    plain = unwrap(device_keys_->keys.priv, WrappedPayload::decode(*response));
  } catch (const Error&) {
    throw Error(ErrorCode::kUnwrap, "recovery response cannot be opened");
  }
  if (plain.size() != PairingToken::kSize + kMasterKeyBytes ||
      !secure_equal(ByteView(plain).first(PairingToken::kSize),
                    recovery_token_->value)) {
    secure_wipe(plain);
    throw Error(ErrorCode::kUnwrap, "recovery response token mismatch");
  }
  auto master = MasterKey::from_bytes(ByteView(plain).subspan(PairingToken::kSize));
  secure_wipe(plain);

  Bytes pub = device_keys_->keys.pub.encode();
  store.replace_mobile_key(user_id_, pub, fingerprint(pub),
                           wrap(device_keys_->keys.pub,
                                detail::MasterKeyAccess::raw(master), rng_));
  master.make_unexportable();
  master_key_ = std::move(master);
  recovery_token_.reset();
  status_ = MobileStatus::kRegistered;
  return PollResult::kDone;
}

RevealedCredential MobileApp::reveal_credential(const CredentialId& id,
                                                const BiometricGate& gate,
                                                ServerApi& store) {
  require_status(MobileStatus::kRegistered, "reveal_credential");
  if (!gate || !gate()) throw Error(ErrorCode::kGate, "biometric check denied");

  auto record = store.get_credential(user_id_, id);
  RevealedCredential out;
  out.id = record.id;
  out.url = to_string(open_field(*master_key_, "url", record.url));
  out.username = to_string(open_field(*master_key_, "username", record.username));
  out.password = to_string(open_field(*master_key_, "password", record.password));
  return out;
}

std::vector<CredentialListing> MobileApp::list_credentials(ServerApi& store) {
  require_status(MobileStatus::kRegistered, "list_credentials");
  std::vector<CredentialListing> out;
  for (const auto& h : store.list_credential_headers(user_id_)) {
    out.push_back(CredentialListing{
        h.id, to_string(open_field(*master_key_, "url", h.url)),
        to_string(open_field(*master_key_, "username", h.username))});
  }
  return out;
}

std::string MobileApp::state_json() const {
  nlohmann::json j = {{"user_id", user_id_},
                      {"status", mobile_status_name(status_)},
                      {"has_master_key", master_key_.has_value()}};
  if (device_keys_) {
    j["device_id"] = device_keys_->device_id;
    j["device_pubkey"] = base64url_encode(device_keys_->keys.pub.encode());
  }
  if (signing_keys_) {
    j["signing_pubkey"] = base64url_encode(signing_keys_->keys.pub.encode());
  }
  return j.dump();
}

}  // namespace rostam
