// ers-sim: run, sweep, replay and validate simulated ERS deployments.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "ers/builders.hpp"
#include "ers/runner.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

ers::harness::Scenario load_scenario(const std::string& path) {
  auto scenario =
      ers::harness::Scenario::from_json(nlohmann::json::parse(read_file(path)));
  scenario.validate();
  return scenario;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulation harness for a decentralized entity registry"};
  app.require_subcommand(1);

  // run
  std::string run_scenario, run_out, run_trace;
  std::uint64_t run_seed = 0;
  bool run_seed_set = false;
  auto* run_cmd = app.add_subcommand("run", "Run one scenario and write its report");
  run_cmd->add_option("scenario", run_scenario, "Scenario JSON file")->required();
  run_cmd->add_option("--seed", run_seed, "Override the scenario seed")
      ->each([&](const std::string&) { run_seed_set = true; });
  run_cmd->add_option("--out", run_out, "Report output path")->required();
  run_cmd->add_option("--trace", run_trace, "Also write the full event trace");

  // sweep
  std::string sweep_scenario, sweep_axis, sweep_values, sweep_out;
  std::uint64_t sweep_seed = 0;
  bool sweep_seed_set = false;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Run a scenario across one impairment axis");
  sweep_cmd->add_option("scenario", sweep_scenario, "Scenario JSON file")->required();
  sweep_cmd
      ->add_option("--axis", sweep_axis,
                   "latency | loss | corruption | duplication | reorder")
      ->required();
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated axis values")
      ->required();
  sweep_cmd->add_option("--seed", sweep_seed, "Override the base seed")
      ->each([&](const std::string&) { sweep_seed_set = true; });
  sweep_cmd->add_option("--out", sweep_out, "CSV output path")->required();

  // replay
  std::string replay_trace;
  auto* replay_cmd =
      app.add_subcommand("replay", "Re-execute a trace and verify byte identity");
  replay_cmd->add_option("--trace", replay_trace, "Trace file")->required();

  // validate
  std::string validate_scenario;
  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file");
  validate_cmd->add_option("scenario", validate_scenario, "Scenario JSON file")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      auto scenario = load_scenario(run_scenario);
      ers::harness::Runner runner(
          std::move(scenario),
          run_seed_set ? std::optional<std::uint64_t>(run_seed) : std::nullopt);
      auto report = runner.run();
      write_file(run_out, report.dump());
      if (!run_trace.empty()) write_file(run_trace, runner.trace_with_header());
      std::cout << "min completion " << report.min_final_completion()
                << (report.all_assertions_pass() ? ", assertions pass"
                                                 : ", ASSERTIONS FAILED")
                << "\n";
      return report.all_assertions_pass() ? 0 : 1;
    }

    if (sweep_cmd->parsed()) {
      auto scenario = load_scenario(sweep_scenario);
      if (sweep_seed_set) scenario.seed = sweep_seed;
      std::vector<double> values;
      std::stringstream ss(sweep_values);
      std::string item;
      while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
      auto rows = ers::harness::run_sweep(scenario, sweep_axis, values);
      write_file(sweep_out, ers::harness::sweep_csv(rows));
      for (const auto& row : rows)
        std::cout << sweep_axis << "=" << row.value << " -> " << row.min_completion
                  << (row.converged ? " (converged)" : "") << "\n";
      return 0;
    }

    if (replay_cmd->parsed()) {
      auto outcome = ers::harness::verify_replay(read_file(replay_trace));
      std::cout << (outcome.ok ? "replay ok: " : "replay FAILED: ")
                << outcome.detail << "\n";
      return outcome.ok ? 0 : 1;
    }

    if (validate_cmd->parsed()) {
      load_scenario(validate_scenario);
      std::cout << "ok\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
