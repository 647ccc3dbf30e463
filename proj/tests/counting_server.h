#pragma once

#include <map>
#include <string>

#include "rostam/server_store.h"

namespace rostam::testing {

// Forwards to a real store and counts every call by name.
class CountingServer final : public ServerApi {
 public:
  explicit CountingServer(ServerStore& inner) : inner_(inner) {}

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [name, c] : calls) n += c;
    return n;
  }
  std::size_t count(const std::string& name) const {
    auto it = calls.find(name);
    return it == calls.end() ? 0 : it->second;
  }

  void register_user(const std::string& u, ByteView k, const Fingerprint& f,
                     const WrappedPayload& w) override {
    ++calls["register_user"];
    inner_.register_user(u, k, f, w);
  }
  void replace_mobile_key(const std::string& u, ByteView k, const Fingerprint& f,
                          const WrappedPayload& w) override {
    ++calls["replace_mobile_key"];
    inner_.replace_mobile_key(u, k, f, w);
  }
  WrappedPayload get_wrapped_master_key(const std::string& u) override {
    ++calls["get_wrapped_master_key"];
    return inner_.get_wrapped_master_key(u);
  }
  void put_device(const std::string& u, const std::string& d, ByteView k,
                  const Fingerprint& f) override {
    ++calls["put_device"];
    inner_.put_device(u, d, k, f);
  }
  PairingMaterial get_pairing_material(const std::string& u,
                                       const Fingerprint& f) override {
    ++calls["get_pairing_material"];
    return inner_.get_pairing_material(u, f);
  }
  void mailbox_put(const std::string& u, const MailboxChannel& c,
                   ByteView p) override {
    ++calls["mailbox_put"];
    inner_.mailbox_put(u, c, p);
  }
  std::optional<Bytes> mailbox_take(const std::string& u,
                                    const MailboxChannel& c) override {
    ++calls["mailbox_take"];
    return inner_.mailbox_take(u, c);
  }
  void upsert_credential(const std::string& u, const CredentialRecord& r) override {
    ++calls["upsert_credential"];
    inner_.upsert_credential(u, r);
  }
  CredentialRecord get_credential(const std::string& u, const CredentialId& id) override {
    ++calls["get_credential"];
    return inner_.get_credential(u, id);
  }
  void delete_credential(const std::string& u, const CredentialId& id) override {
    ++calls["delete_credential"];
    inner_.delete_credential(u, id);
  }
  std::vector<CredentialRecord> find_by_tag(const std::string& u,
                                            const LookupTag& t) override {
    ++calls["find_by_tag"];
    return inner_.find_by_tag(u, t);
  }
  std::vector<CredentialHeader> list_credential_headers(const std::string& u) override {
    ++calls["list_credential_headers"];
    return inner_.list_credential_headers(u);
  }
  Session create_session(const std::string& u, Timestamp now) override {
    ++calls["create_session"];
    return inner_.create_session(u, now);
  }
  SessionStatus validate_session(const SessionId& id, Timestamp now) override {
    ++calls["validate_session"];
    return inner_.validate_session(id, now);
  }
  void revoke_session(const SessionId& id) override {
    ++calls["revoke_session"];
    inner_.revoke_session(id);
  }

  std::map<std::string, std::size_t> calls;

 private:
  ServerStore& inner_;
};

}  // namespace rostam::testing
