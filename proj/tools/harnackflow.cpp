#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "harnackflow/config.hpp"
#include "harnackflow/scenario.hpp"
#include "harnackflow/snapshot_io.hpp"

namespace fs = std::filesystem;
using namespace harnackflow;

namespace {

ScenarioConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path);
  try {
    ScenarioConfig c = parse_config(in);
    if (seed) c.seed = *seed;
    return c;
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.message(), e.time());
  }
}

// HARNACKFLOW_OUT wins over --out, which wins over the config's output.dir.
fs::path output_dir(const std::string& flag, const std::string& fallback) {
  if (const char* env = std::getenv("HARNACKFLOW_OUT"); env && *env) return env;
  return flag.empty() ? fs::path(fallback) : fs::path(flag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ricci flow and Harnack-estimate scenario runner"};
  app.require_subcommand(1);

  std::string out;
  std::optional<std::uint64_t> seed;

  auto* run_cmd = app.add_subcommand("run", "integrate one scenario and check its assertions");
  std::string config;
  run_cmd->add_option("--config", config, "scenario file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", out, "output directory");
  run_cmd->add_option("--seed", seed, "RNG seed");

  auto* verify_cmd = app.add_subcommand("verify-identities", "refinement study of the evolution identities");
  int levels = 3;
  std::size_t fuzz = 100;
  std::uint64_t verify_seed = 1;
  verify_cmd->add_option("--levels", levels, "number of refinement levels (N = 64, 128, ...)")->check(CLI::Range(1, 6));
  verify_cmd->add_option("--fuzz", fuzz, "random parameter tuples");
  verify_cmd->add_option("--seed", verify_seed, "RNG seed");
  verify_cmd->add_option("--out", out, "directory for identities.csv");

  auto* action_cmd = app.add_subcommand("action", "certify the integrated Harnack inequality on a trajectory");
  std::string trajectory;
  action_cmd->add_option("--config", config, "scenario file")->required()->check(CLI::ExistingFile);
  action_cmd->add_option("--trajectory", trajectory, "stored trajectory (default: integrate the scenario)")
      ->check(CLI::ExistingFile);
  action_cmd->add_option("--out", out, "output directory");
  action_cmd->add_option("--seed", seed, "RNG seed");

  auto* sweep_cmd = app.add_subcommand("sweep", "run several scenarios in parallel");
  std::vector<std::string> configs;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  sweep_cmd->add_option("configs", configs, "scenario files")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--config", configs, "scenario file (repeatable)")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", out, "root directory; each scenario writes into <out>/<name>");
  sweep_cmd->add_option("--seed", seed, "RNG seed for every scenario");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const ScenarioConfig c = load_config(config, seed);
      return run_scenario(c, output_dir(out, c.out_dir), &std::cout).exit_code();
    }
    if (*verify_cmd) {
      const IdentityStudy study = verify_identities(levels, fuzz, verify_seed, 64, &std::cerr);
      write_convergence_table(std::cout, study);
      if (!out.empty() || std::getenv("HARNACKFLOW_OUT")) {
        const fs::path dir = output_dir(out, "");
        fs::create_directories(dir);
        std::ofstream os(dir / "identities.csv", std::ios::binary | std::ios::trunc);
        write_identity_csv(os, study);
      }
      return study.passed() ? 0 : 1;
    }
    if (*action_cmd) {
      const ScenarioConfig c = load_config(config, seed);
      const Trajectory traj = trajectory.empty() ? simulate(c) : load_trajectory(trajectory);
      return run_action(c, traj, output_dir(out, c.out_dir), &std::cout).exit_code();
    }
    if (*sweep_cmd) {
      if (configs.empty()) throw Error(ErrorKind::InvalidArgument, "sweep needs at least one config");
      std::vector<ScenarioConfig> list;
      for (const auto& path : configs) list.push_back(load_config(path, seed));
      const SweepResult result = run_sweep(list, output_dir(out, "out"), jobs, &std::cout);
      for (const auto& r : result.reports) std::cout << (r.passed() ? "PASS  " : "FAIL  ") << r.name << '\n';
      return result.passed() ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
