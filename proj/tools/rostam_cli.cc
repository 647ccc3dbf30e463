// Command-line harness: runs demos, scenario files and attacks against an
// in-process world and prints the event log as JSON lines.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rostam/error.h"
#include "rostam/scenario.h"

namespace {

int emit(const rostam::ScenarioResult& result) {
  std::cout << result.log_jsonl() << std::flush;
  if (result.security_violation) {
    std::cerr << "security violation detected\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rostam: end-to-end encrypted credential sharing simulator"};
  app.require_subcommand(1);
  // Global flags are accepted before or after the subcommand.
  app.fallthrough();

  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string snapshot;
  app.add_option_function<std::uint64_t>(
         "--seed", [&](std::uint64_t v) { seed = v; seed_given = true; },
         "Seed for every random draw; same seed, same log and snapshot")
      ->type_name("U64");
  app.add_option("--snapshot", snapshot,
                 "Write the server store snapshot to this path");

  std::string demo_name;
  auto* demo = app.add_subcommand("demo", "Run a built-in flow");
  demo->add_option("name", demo_name, "pair | recover | autofill")
      ->required()
      ->check(CLI::IsMember({"pair", "recover", "autofill"}));

  std::string scenario_file;
  auto* scenario = app.add_subcommand("scenario", "Run a scenario file");
  scenario->require_subcommand(1);
  auto* scenario_run = scenario->add_subcommand("run", "Run a JSON scenario");
  scenario_run->add_option("file", scenario_file, "Scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);

  std::string attack_kind;
  auto* attack = app.add_subcommand("attack", "Run an attack against a fresh world");
  attack->add_option("kind", attack_kind, "dump | substitute | forge")
      ->required()
      ->check(CLI::IsMember({"dump", "substitute", "forge"}));

  CLI11_PARSE(app, argc, argv);

  try {
    rostam::Scenario s;
    if (*demo) {
      s = rostam::demo_scenario(demo_name, seed);
    } else if (*attack) {
      s = rostam::attack_scenario(attack_kind, seed);
    } else {
      std::ifstream in(scenario_file);
      std::stringstream text;
      text << in.rdbuf();
      s = rostam::Scenario::parse(text.str());
      if (seed_given) s.seed = seed;
    }
    rostam::RunOptions options;
    if (!snapshot.empty()) options.snapshot_path = snapshot;
    return emit(rostam::run_scenario(s, options));
  } catch (const rostam::Error& e) {
    std::cerr << "error (" << rostam::error_code_name(e.code()) << "): "
              << e.what() << "\n";
    return 2;
  }
}
