#include "rostam/scenario.h"

#include <set>
#include <sstream>

#include "rostam/error.h"
#include "rostam/url.h"

namespace rostam {
namespace {

using nlohmann::json;

constexpr std::int64_t kPollIntervalSeconds = 1;
constexpr std::int64_t kPollDeadlineSeconds = 30;

struct ActionSchema {
  std::vector<std::string> required;
  std::vector<std::string> optional;
};

const std::map<std::string, ActionSchema>& schemas() {
  static const std::map<std::string, ActionSchema> table = {
      {"setup", {{"user"}, {"email"}}},
      {"login", {{"user", "extension"}, {"approve"}}},
      {"pair", {{"user", "extension"}, {}}},
      {"save",
       {{"user", "extension", "url", "username", "password"},
        {"mode", "confirm"}}},
      {"update",
       {{"user", "extension", "url", "username", "password"}, {"confirm"}}},
      {"remove", {{"user", "extension", "url", "username"}, {}}},
      {"autofill", {{"user", "extension", "url"}, {"choose", "expect"}}},
      {"reveal", {{"user", "url", "username"}, {"approve"}}},
      {"lock", {{"user", "extension"}, {}}},
      {"advance", {{"seconds"}, {}}},
      {"recover", {{"user", "extension"}, {}}},
      {"attack",
       {{"kind", "user"}, {"extension", "target", "also_fingerprint"}}},
  };
  return table;
}

[[noreturn]] void step_error(std::size_t index, const std::string& what) {
  throw Error(ErrorCode::kParse,
              "scenario step " + std::to_string(index) + ": " + what);
}

void validate_step(std::size_t index, const json& step) {
  if (!step.is_object()) step_error(index, "expected an object");
  auto action = step.find("action");
  if (action == step.end() || !action->is_string()) {
    step_error(index, "missing string field 'action'");
  }
  auto it = schemas().find(action->get<std::string>());
  if (it == schemas().end()) {
    step_error(index, "unknown action '" + action->get<std::string>() + "'");
  }
  std::set<std::string> allowed{"action"};
  for (const auto& f : it->second.required) {
    if (!step.contains(f)) step_error(index, "missing field '" + f + "'");
    allowed.insert(f);
  }
  allowed.insert(it->second.optional.begin(), it->second.optional.end());
  for (const auto& [key, value] : step.items()) {
    if (!allowed.contains(key)) step_error(index, "unexpected field '" + key + "'");
  }
  const std::string name = action->get<std::string>();
  if (step.contains("choose") && !step["choose"].is_number_unsigned() &&
      !step["choose"].is_string()) {
    step_error(index, "'choose' must be an index or a username");
  }
  if (name == "advance" &&
      (!step["seconds"].is_number_integer() || step["seconds"].get<std::int64_t>() < 0)) {
    step_error(index, "'seconds' must be a non-negative integer");
  }
  if (name == "attack") {
    auto kind = step["kind"].get<std::string>();
    if (kind != "dump" && kind != "substitute" && kind != "forge") {
      step_error(index, "unknown attack kind '" + kind + "'");
    }
    if (kind != "dump" && !step.contains("extension")) {
      step_error(index, "attack '" + kind + "' needs 'extension'");
    }
  }
}

std::string str(const json& step, const char* key, std::string fallback = {}) {
  auto it = step.find(key);
  return it == step.end() ? fallback : it->get<std::string>();
}

bool flag(const json& step, const char* key, bool fallback) {
  auto it = step.find(key);
  return it == step.end() ? fallback : it->get<bool>();
}

std::string phone_actor(const std::string& user) { return "phone:" + user; }
std::string ext_actor(const std::string& user, const std::string& ext) {
  return "ext:" + user + "/" + ext;
}

std::string error_outcome(const Error& e) {
  return std::string("error:") + error_code_name(e.code());
}

std::pair<std::size_t, std::size_t> line_col(std::string_view text,
                                             std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

class Runner {
 public:
  Runner(const Scenario& scenario, const RunOptions& options)
      : world_(scenario.seed, options.snapshot_path) {}

  ScenarioResult run(const Scenario& scenario) {
    for (std::size_t i = 0; i < scenario.steps.size(); ++i) {
      step_ = static_cast<int>(i);
      const auto& s = scenario.steps[i];
      std::string action = s.at("action").get<std::string>();
      try {
        dispatch(action, s);
      } catch (const Error& e) {
        log(actor_for(s), action, error_outcome(e), e.what());
      } catch (const json::exception& e) {
        log(actor_for(s), action, "error:parse", e.what());
      }
    }
    result_.snapshot = world_.store().snapshot();
    return std::move(result_);
  }

 private:
  static std::string actor_for(const json& s) {
    auto user = str(s, "user");
    if (s.at("action") == "attack") return "adversary";
    if (s.at("action") == "advance") return "clock";
    if (s.contains("extension")) return ext_actor(user, str(s, "extension"));
    return phone_actor(user);
  }

  void log(std::string actor, std::string action, std::string outcome,
           std::string detail = {}) {
    result_.events.push_back(Event{step_, std::move(actor), std::move(action),
                                   std::move(outcome), std::move(detail)});
  }

  void violation(std::string action, std::string detail) {
    result_.security_violation = true;
    log("adversary", std::move(action), "VIOLATION", std::move(detail));
  }

  Rng& adversary_rng() {
    if (!adversary_rng_) adversary_rng_.emplace(world_.fork_rng("adversary"));
    return *adversary_rng_;
  }

  static std::string saved_key(const std::string& user, const std::string& url,
                               const std::string& username) {
    return user + '\n' + canonicalize_url(url) + '\n' + username;
  }

  CredentialId saved_id(const json& s) {
    auto it = saved_.find(saved_key(str(s, "user"), str(s, "url"), str(s, "username")));
    if (it == saved_.end()) {
      throw Error(ErrorCode::kNotFound, "no credential saved by this scenario");
    }
    return it->second;
  }

  void dispatch(const std::string& action, const json& s) {
    const std::string user = str(s, "user");
    const std::string ext_name = str(s, "extension");
    auto& store = world_.store();
    auto now = [&] { return world_.clock().now(); };

    if (action == "setup") {
      world_.setup_user(user, str(s, "email", user + "@corp.example"));
      log(phone_actor(user), "setup", "ok");
    } else if (action == "login") {
      login(user, ext_name, flag(s, "approve", true));
    } else if (action == "pair") {
      auto& ext = world_.extension(user, ext_name);
      auto qr = ext.begin_pairing(store, now());
      log(ext_actor(user, ext_name), "begin_pairing", "ok", qr.to_text());
      world_.phone(user).scan_pairing_qr(qr, store);
      log(phone_actor(user), "scan_pairing_qr", "ok");
      auto r = poll_until(world_.clock(), kPollIntervalSeconds,
                          now() + kPollDeadlineSeconds,
                          [&] { return ext.complete_pairing(store); });
      log(ext_actor(user, ext_name), "complete_pairing", poll_result_name(r),
          r == PollResult::kAbort ? ext.last_alert().value_or("") : "");
    } else if (action == "save") {
      const auto url = str(s, "url"), username = str(s, "username"),
                 password = str(s, "password");
      world_.add_sentinel("url:" + url, to_bytes(url));
      world_.add_sentinel("username:" + username, to_bytes(username));
      world_.add_sentinel("password:" + username + "@" + url, to_bytes(password));
      auto mode = str(s, "mode", "manual") == "detected" ? SaveMode::kDetected
                                                         : SaveMode::kManual;
      bool confirm = flag(s, "confirm", true);
      auto id = world_.extension(user, ext_name)
                    .save_credential(url, username, password, mode, store,
                                     [confirm] { return confirm; }, now());
      if (id) {
        saved_[saved_key(user, url, username)] = *id;
        log(ext_actor(user, ext_name), "save", "saved", id->hex());
      } else {
        log(ext_actor(user, ext_name), "save", "declined");
      }
    } else if (action == "update") {
      const auto password = str(s, "password");
      world_.add_sentinel("password:" + str(s, "username") + "@" + str(s, "url"),
                          to_bytes(password));
      bool confirm = flag(s, "confirm", true);
      bool updated = world_.extension(user, ext_name)
                         .update_credential(str(s, "url"), str(s, "username"),
                                            password, store,
                                            [confirm] { return confirm; }, now());
      log(ext_actor(user, ext_name), "update", updated ? "updated" : "declined");
    } else if (action == "remove") {
      world_.extension(user, ext_name).remove_credential(saved_id(s), store, now());
      log(ext_actor(user, ext_name), "remove", "removed");
    } else if (action == "autofill") {
      autofill(user, ext_name, s);
    } else if (action == "reveal") {
      bool approve = flag(s, "approve", true);
      auto id = saved_id(s);
      auto cred = world_.phone(user).reveal_credential(
          id, [approve] { return approve; }, store);
      log(phone_actor(user), "reveal", "revealed", "username=" + cred.username);
    } else if (action == "lock") {
      world_.extension(user, ext_name).lock(store);
      log(ext_actor(user, ext_name), "lock", "locked");
    } else if (action == "advance") {
      auto seconds = s.at("seconds").get<std::int64_t>();
      world_.clock().advance(seconds);
      log("clock", "advance", "ok", "+" + std::to_string(seconds) + "s");
    } else if (action == "recover") {
      recover(user, ext_name);
    } else if (action == "attack") {
      attack(user, ext_name, s);
    }
  }

  void login(const std::string& user, const std::string& ext_name, bool approve) {
    auto& ext = world_.extension(user, ext_name);
    auto& idp = world_.idp();
    auto now = world_.clock().now();
    auto attempt = ext.begin_login(idp, idp.lookup(user).email, now);
    log(ext_actor(user, ext_name), "begin_login", "pending", attempt);
    try {
      bool accepted = world_.phone(user).approve_login(
          idp, [approve] { return approve; }, now);
      log(phone_actor(user), "approve_login", accepted ? "accepted" : "rejected");
    } catch (const Error& e) {
      log(phone_actor(user), "approve_login", error_outcome(e), e.what());
    }
    bool done = ext.finish_login(idp);
    log(ext_actor(user, ext_name), "finish_login", done ? "logged_in" : "pending");
  }

  void autofill(const std::string& user, const std::string& ext_name,
                const json& s) {
    auto& ext = world_.extension(user, ext_name);
    // "choose" picks an account by position or by username.
    std::optional<json> choice;
    if (s.contains("choose")) choice = s["choose"];
    auto pick = [&choice](const std::vector<std::string>& names)
        -> std::optional<std::size_t> {
      if (!choice) return std::nullopt;
      if (choice->is_number_unsigned()) return choice->get<std::size_t>();
      for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == choice->get<std::string>()) return i;
      }
      return std::nullopt;
    };
    auto result = ext.autofill_by_url(str(s, "url"), world_.store(), pick,
                                      world_.clock().now());
    std::string detail;
    if (result.outcome == AutofillResult::Outcome::kFilled) {
      detail = "username=" + result.username;
      if (s.contains("expect")) {
        detail += result.password == str(s, "expect") ? " password=expected"
                                                      : " password=UNEXPECTED";
      }
    } else if (result.outcome == AutofillResult::Outcome::kChoose) {
      detail = std::to_string(result.choices.size()) + " accounts";
    }
    log(ext_actor(user, ext_name), "autofill",
        autofill_outcome_name(result.outcome), detail);
  }

  void recover(const std::string& user, const std::string& ext_name) {
    auto& store = world_.store();
    auto& ext = world_.extension(user, ext_name);
    auto& phone = world_.new_phone(user);
    phone.begin_recovery();
    log(phone_actor(user), "begin_recovery", "recovering");
    auto qr = ext.begin_recovery_serve();
    log(ext_actor(user, ext_name), "begin_recovery_serve", "ok", qr.to_text());
    phone.scan_recovery_qr(qr, store);
    log(phone_actor(user), "scan_recovery_qr", "ok");
    auto deadline = world_.clock().now() + kPollDeadlineSeconds;
    auto served = poll_until(world_.clock(), kPollIntervalSeconds, deadline,
                             [&] { return ext.serve_recovery(store); });
    log(ext_actor(user, ext_name), "serve_recovery", poll_result_name(served),
        served == PollResult::kAbort ? ext.last_alert().value_or("") : "");
    if (served != PollResult::kDone) return;
    auto finished = poll_until(world_.clock(), kPollIntervalSeconds, deadline,
                               [&] { return phone.finish_recovery(store); });
    log(phone_actor(user), "finish_recovery", poll_result_name(finished));
    if (finished == PollResult::kDone) {
      world_.idp().replace_signing_key(user, phone.signing_pubkey());
      log("server", "rebind_signing_key", "ok");
    }
  }

  void attack(const std::string& user, const std::string& ext_name,
              const json& s) {
    auto& store = world_.store();
    const auto kind = str(s, "kind");

    if (kind == "dump") {
      auto view = adversary_server_dump(store);
      auto report = scan_for_secrets(view.server_dump, world_.sentinels());
      if (report.matches == 0) {
        log("adversary", "attack_dump", "no plaintext leaked",
            std::to_string(world_.sentinels().size()) + " sentinels checked");
      } else {
        std::string found;
        for (const auto& l : report.labels) found += (found.empty() ? "" : ", ") + l;
        violation("attack_dump", "leaked: " + found);
      }
      return;
    }

    auto& ext = world_.extension(user, ext_name);
    if (kind == "substitute") {
      if (!ext.has_session()) login(user, ext_name, true);
      auto qr = ext.begin_pairing(store, world_.clock().now());
      auto attacker = generate_rsa_keypair(adversary_rng());
      bool both = flag(s, "also_fingerprint", false);
      adversary_substitute_pubkey(store, user, qr.fp, attacker.pub.encode(), both);
      log("adversary", "substitute_pubkey", "applied",
          both ? "public key and fingerprint" : "public key only");
      try {
        world_.phone(user).scan_pairing_qr(qr, store);
      } catch (const Error& e) {
        log(phone_actor(user), "scan_pairing_qr", error_outcome(e), e.what());
      }
      bool written = store.mailbox_pending(
          user, MailboxChannel::master_key_update(ext.device_id()));
      if (written) {
        violation("attack_substitute", "phone wrapped the MasterKey for a substituted key");
      } else {
        log("adversary", "attack_substitute", "mobile aborted");
      }
      return;
    }

    // forge
    const bool recovery = str(s, "target", "pairing") == "recovery";
    if (recovery) {
      ext.begin_recovery_serve();
    } else {
      if (!ext.has_session()) login(user, ext_name, true);
      ext.begin_pairing(store, world_.clock().now());
    }
    auto attacker = generate_rsa_keypair(adversary_rng());
    auto guessed = generate_token(adversary_rng());
    auto outcome = adversary_forge_mailbox(
        store, ext, recovery ? ForgeTarget::kRecovery : ForgeTarget::kPairing,
        attacker, guessed, adversary_rng());
    log(ext_actor(user, ext_name), recovery ? "serve_recovery" : "complete_pairing",
        poll_result_name(outcome.victim_result), ext.last_alert().value_or(""));
    if (outcome.victim_result == PollResult::kAbort && !outcome.victim_accepted) {
      log("adversary", "attack_forge", "victim aborted",
          recovery ? "recovery" : "pairing");
    } else {
      violation("attack_forge", "victim accepted a forged mailbox message");
    }
  }

  World world_;
  int step_ = 0;
  ScenarioResult result_;
  std::optional<Rng> adversary_rng_;
  std::map<std::string, CredentialId> saved_;
};

json step(std::initializer_list<std::pair<const std::string, json>> fields) {
  json j = json::object();
  for (const auto& [k, v] : fields) j[k] = v;
  return j;
}

}  // namespace

std::string Event::to_json() const {
  json j = {{"step", step}, {"actor", actor}, {"action", action}, {"outcome", outcome}};
  if (!detail.empty()) j["detail"] = detail;
  return j.dump();
}

World::World(std::uint64_t seed,
             std::optional<std::filesystem::path> snapshot_path)
    : rng_(Rng::seeded(seed, "world")) {
  store_ = std::make_unique<ServerStore>(rng_.fork("server"),
                                         std::move(snapshot_path));
  idp_ = std::make_unique<IdentityProvider>(*store_, rng_.fork("idp"));
}

World::UserActors& World::actors(const std::string& user_id) {
  auto it = users_.find(user_id);
  if (it == users_.end()) {
    throw Error(ErrorCode::kNotFound, "no such user in scenario: " + user_id);
  }
  return it->second;
}

MobileApp& World::setup_user(const std::string& user_id,
                             const std::string& email) {
  if (users_.contains(user_id)) {
    throw Error(ErrorCode::kAlreadyExists, "user already set up: " + user_id);
  }
  auto phone = std::make_unique<MobileApp>(user_id,
                                           rng_.fork("phone:" + user_id + "#0"));
  phone->setup(*store_);
  idp_->enroll(user_id, email, "", phone->signing_pubkey());
  auto& u = users_[user_id];
  u.email = email;
  u.phone = std::move(phone);
  return *u.phone;
}

MobileApp& World::phone(const std::string& user_id) {
  return *actors(user_id).phone;
}

MobileApp& World::new_phone(const std::string& user_id) {
  auto& u = actors(user_id);
  ++u.phone_generation;
  u.phone = std::make_unique<MobileApp>(
      user_id,
      rng_.fork("phone:" + user_id + "#" + std::to_string(u.phone_generation)));
  return *u.phone;
}

BrowserExtension& World::extension(const std::string& user_id,
                                   const std::string& name) {
  auto& u = actors(user_id);
  auto& slot = u.extensions[name];
  if (!slot) {
    slot = std::make_unique<BrowserExtension>(
        user_id, rng_.fork("ext:" + user_id + "/" + name));
  }
  return *slot;
}

bool World::login(const std::string& user_id, const std::string& ext_name,
                  bool approve) {
  auto& ext = extension(user_id, ext_name);
  ext.begin_login(*idp_, actors(user_id).email, clock_.now());
  try {
    phone(user_id).approve_login(*idp_, [approve] { return approve; },
                                 clock_.now());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kGate) throw;
  }
  return ext.finish_login(*idp_);
}

PollResult World::pair(const std::string& user_id, const std::string& ext_name) {
  auto& ext = extension(user_id, ext_name);
  auto qr = ext.begin_pairing(*store_, clock_.now());
  phone(user_id).scan_pairing_qr(qr, *store_);
  return poll_until(clock_, kPollIntervalSeconds,
                    clock_.now() + kPollDeadlineSeconds,
                    [&] { return ext.complete_pairing(*store_); });
}

PollResult World::recover(const std::string& user_id,
                          const std::string& ext_name) {
  auto& ext = extension(user_id, ext_name);
  auto& fresh = new_phone(user_id);
  fresh.begin_recovery();
  auto qr = ext.begin_recovery_serve();
  fresh.scan_recovery_qr(qr, *store_);
  auto deadline = clock_.now() + kPollDeadlineSeconds;
  auto served = poll_until(clock_, kPollIntervalSeconds, deadline,
                           [&] { return ext.serve_recovery(*store_); });
  if (served != PollResult::kDone) return served;
  auto finished = poll_until(clock_, kPollIntervalSeconds, deadline,
                             [&] { return fresh.finish_recovery(*store_); });
  if (finished == PollResult::kDone) {
    idp_->replace_signing_key(user_id, fresh.signing_pubkey());
  }
  return finished;
}

void World::add_sentinel(std::string label, Bytes bytes) {
  sentinels_.push_back(Secret{std::move(label), std::move(bytes)});
}

Scenario Scenario::parse(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw Error(ErrorCode::kParse, "scenario: line " + std::to_string(line) +
                                       ", column " + std::to_string(col) +
                                       ": syntax error");
  }
  if (!doc.is_object()) throw Error(ErrorCode::kParse, "scenario: expected an object");
  Scenario scenario;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) {
      throw Error(ErrorCode::kParse, "scenario: 'seed' must be an unsigned integer");
    }
    scenario.seed = doc["seed"].get<std::uint64_t>();
  }
  auto steps = doc.find("steps");
  if (steps == doc.end() || !steps->is_array()) {
    throw Error(ErrorCode::kParse, "scenario: missing array 'steps'");
  }
  for (std::size_t i = 0; i < steps->size(); ++i) {
    validate_step(i, (*steps)[i]);
    scenario.steps.push_back((*steps)[i]);
  }
  return scenario;
}

std::string ScenarioResult::log_jsonl() const {
  std::string out;
  for (const auto& e : events) out += e.to_json() + "\n";
  return out;
}

ScenarioResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  Runner runner(scenario, options);
  return runner.run(scenario);
}

Scenario demo_scenario(std::string_view name, std::uint64_t seed) {
  const std::string url = "https://www.example.com/login";
  Scenario s;
  s.seed = seed;
  s.steps = {
      step({{"action", "setup"}, {"user", "alice"}, {"email", "alice@corp.example"}}),
      step({{"action", "login"}, {"user", "alice"}, {"extension", "laptop"}}),
      step({{"action", "pair"}, {"user", "alice"}, {"extension", "laptop"}}),
  };
  if (name == "pair") return s;

  auto save = [&](const std::string& username, const std::string& password) {
    s.steps.push_back(step({{"action", "save"}, {"user", "alice"},
                            {"extension", "laptop"}, {"url", url},
                            {"username", username}, {"password", password}}));
  };
  auto autofill = [&](const std::string& u, json extra = json::object()) {
    json j = step({{"action", "autofill"}, {"user", "alice"},
                   {"extension", "laptop"}, {"url", u}});
    j.update(extra);
    s.steps.push_back(j);
  };

  if (name == "autofill") {
    save("alice@corp.example", "correct horse battery staple");
    autofill(url, {{"expect", "correct horse battery staple"}});
    autofill("https://www.sub.example.com/login");
    s.steps.push_back(step({{"action", "advance"}, {"seconds", 14 * 60 + 59}}));
    autofill(url);
    s.steps.push_back(step({{"action", "advance"}, {"seconds", 15 * 60 + 1}}));
    autofill(url);
    s.steps.push_back(step({{"action", "login"}, {"user", "alice"}, {"extension", "laptop"}}));
    autofill(url, {{"expect", "correct horse battery staple"}});
    s.steps.push_back(step({{"action", "lock"}, {"user", "alice"}, {"extension", "laptop"}}));
    autofill(url);
    return s;
  }
  if (name == "recover") {
    save("alice@corp.example", "correct horse battery staple");
    save("alice.admin", "Tr0ub4dor&3");
    s.steps.push_back(step({{"action", "recover"}, {"user", "alice"}, {"extension", "laptop"}}));
    s.steps.push_back(step({{"action", "reveal"}, {"user", "alice"}, {"url", url},
                            {"username", "alice.admin"}}));
    return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown demo: " + std::string(name));
}

Scenario attack_scenario(std::string_view kind, std::uint64_t seed) {
  if (kind == "dump") {
    Scenario s = demo_scenario("recover", seed);
    s.steps.push_back(step({{"action", "attack"}, {"kind", "dump"}, {"user", "alice"}}));
    return s;
  }
  Scenario s = demo_scenario("pair", seed);
  if (kind == "substitute") {
    s.steps.push_back(step({{"action", "attack"}, {"kind", "substitute"},
                            {"user", "alice"}, {"extension", "desktop"}}));
    s.steps.push_back(step({{"action", "attack"}, {"kind", "substitute"},
                            {"user", "alice"}, {"extension", "tablet"},
                            {"also_fingerprint", true}}));
    return s;
  }
  if (kind == "forge") {
    s.steps.push_back(step({{"action", "attack"}, {"kind", "forge"},
                            {"user", "alice"}, {"extension", "desktop"},
                            {"target", "pairing"}}));
    s.steps.push_back(step({{"action", "attack"}, {"kind", "forge"},
                            {"user", "alice"}, {"extension", "laptop"},
                            {"target", "recovery"}}));
    return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown attack: " + std::string(kind));
}

}  // namespace rostam
