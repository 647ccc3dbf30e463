#pragma once

// Scenario harness: a deterministic world of actors driven by a JSON step
// list.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rostam/adversary.h"
#include "rostam/clock.h"
#include "rostam/extension.h"
#include "rostam/identity.h"
#include "rostam/mobile_app.h"
#include "rostam/server_store.h"

namespace rostam {

// One line of the event log.
struct Event {
  int step = 0;
  std::string actor;
  std::string action;
  std::string outcome;
  std::string detail;

  // {"step":..,"actor":..,"action":..,"outcome":..[,"detail":..]}
  std::string to_json() const;
};

// All actors of one simulation, seeded from a single 64-bit value. Every
// actor draws from its own stream forked off the seed in creation order, so
// the same seed and the same sequence of calls reproduce the same bytes.
class World {
 public:
  explicit World(std::uint64_t seed,
                 std::optional<std::filesystem::path> snapshot_path = {});

  SimClock& clock() { return clock_; }
  ServerStore& store() { return *store_; }
  IdentityProvider& idp() { return *idp_; }
  Rng fork_rng(std::string_view label) { return rng_.fork(label); }

  // Enrolls the user and runs phone setup.
  MobileApp& setup_user(const std::string& user_id, const std::string& email);
  MobileApp& phone(const std::string& user_id);
  // Replaces the user's phone with a fresh, unregistered one.
  MobileApp& new_phone(const std::string& user_id);
  // Creates the extension on first use.
  BrowserExtension& extension(const std::string& user_id,
                              const std::string& name);

  // Passwordless login of an extension, approved or denied on the phone.
  bool login(const std::string& user_id, const std::string& ext_name,
             bool approve = true);
  // QR pairing of an extension with the user's phone. Returns the
  // extension's final poll result. Mobile-side failures propagate as Error.
  PollResult pair(const std::string& user_id, const std::string& ext_name);
  // Recovery onto a fresh phone served by an already paired extension.
  PollResult recover(const std::string& user_id, const std::string& ext_name);

  // Plaintexts the harness saw pass through save operations.
  const std::vector<Secret>& sentinels() const { return sentinels_; }
  void add_sentinel(std::string label, Bytes bytes);

 private:
  struct UserActors {
    std::string email;
    std::unique_ptr<MobileApp> phone;
    int phone_generation = 0;
    std::map<std::string, std::unique_ptr<BrowserExtension>> extensions;
  };
  UserActors& actors(const std::string& user_id);

  SimClock clock_;
  Rng rng_;
  std::unique_ptr<ServerStore> store_;
  std::unique_ptr<IdentityProvider> idp_;
  std::map<std::string, UserActors> users_;
  std::vector<Secret> sentinels_;
};

struct Scenario {
  std::uint64_t seed = 0;
  std::vector<nlohmann::json> steps;

  // Throws Error(kParse) with line and column for malformed JSON, or with the
  // step index for schema violations.
  static Scenario parse(std::string_view text);
};

struct ScenarioResult {
  std::string snapshot;
  std::vector<Event> events;
  // Set when an attack step observed a broken security property.
  bool security_violation = false;

  std::string log_jsonl() const;
};

struct RunOptions {
  std::optional<std::filesystem::path> snapshot_path;
};

// Runs every step against a fresh World. Step failures are logged and the
// run continues.
ScenarioResult run_scenario(const Scenario& scenario,
                            const RunOptions& options = {});

// Built-in scenarios: "pair", "recover", "autofill".
Scenario demo_scenario(std::string_view name, std::uint64_t seed);
// Setup followed by one attack: "dump", "substitute", "forge".
Scenario attack_scenario(std::string_view kind, std::uint64_t seed);

}  // namespace rostam
