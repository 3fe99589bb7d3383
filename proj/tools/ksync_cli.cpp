// ksync: command-line front end for the experiments.
#include "ksync/harness.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

ksync::ExperimentConfig load(const Overrides& o) {
  ksync::ExperimentConfig cfg;
  if (!o.config.empty()) cfg = ksync::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (o.threads) cfg.threads = *o.threads;
  return cfg;
}

void print_written(const std::vector<std::filesystem::path>& paths) {
  for (const auto& p : paths) std::cout << "wrote " << p.string() << '\n';
}

int run(const std::string& command, const Overrides& o) {
  ksync::ExperimentConfig cfg = load(o);
  using ksync::Mode;
  if (command == "sweep") {
    if (cfg.mode != Mode::Setup1 && cfg.mode != Mode::Setup2) {
      throw ksync::ConfigError("sweep needs mode setup1 or setup2, got " + ksync::to_string(cfg.mode));
    }
    print_written(ksync::run_sweep_to_files(cfg));
  } else if (command == "compare") {
    if (cfg.mode == Mode::Setup1 || cfg.mode == Mode::Setup2) {
      cfg.grid = cfg.mode;
    } else if (cfg.mode != Mode::Compare) {
      throw ksync::ConfigError("compare needs mode setup1, setup2 or compare, got " + ksync::to_string(cfg.mode));
    }
    cfg.mode = Mode::Compare;
    print_written(ksync::run_sweep_to_files(cfg));
  } else if (command == "simulate") {
    cfg.mode = Mode::Simulate;
    print_written(ksync::run_simulate(cfg));
  } else if (command == "disentangle") {
    cfg.mode = Mode::Disentangle;
    print_written(ksync::run_disentangle_to_files(cfg));
  } else if (command == "grp") {
    cfg.mode = Mode::Grp;
    print_written(ksync::run_grp_to_files(cfg));
  } else if (command == "theory") {
    cfg.mode = Mode::Theory;
    std::cout << ksync::run_theory(cfg).dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous angular synchronization experiments"};
  app.require_subcommand(1);
  Overrides o;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "Solve one planted instance with every configured solver"},
      {"sweep", "Monte-Carlo sweep over a setup1 (lambda) or setup2 (eta) grid"},
      {"compare", "Multi-solver sweep"},
      {"disentangle", "Iterative graph disentangling"},
      {"grp", "Two-configuration graph realization"},
      {"theory", "Print the theoretical bounds as JSON"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--out", o.out, "Output path");
    sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return run(app.get_subcommands().front()->get_name(), o);
  } catch (const ksync::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
