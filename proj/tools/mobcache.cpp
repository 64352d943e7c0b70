#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace mobcache::cli;

int main(int argc, char** argv) {
  CLI::App app{"Mobility-aware federated edge caching simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string policy;
  std::string preset;
  std::uint64_t seed = 1;
  auto* simulate = app.add_subcommand("simulate", "Run one simulation");
  simulate->add_option("--config", config_path, "Config file")->required();
  simulate->add_option("--seed", seed, "Run seed")->required();
  simulate->add_option("--out", out_dir, "Output directory")->required();
  simulate->add_option("--policy", policy, "frpl|egreedy|random|local|fullinfo|oracle");
  simulate->add_option("--preset", preset, "Scale preset")->check(CLI::IsMember({"desk", "paper"}));

  std::vector<std::string> config_paths;
  std::vector<std::string> seed_list;
  std::string compare_out;
  auto* cmp = app.add_subcommand("compare", "Run several configs over several seeds");
  cmp->add_option("--configs", config_paths, "Config files (comma or space separated)")->required();
  cmp->add_option("--seeds", seed_list, "Seeds (comma or space separated)")->required();
  cmp->add_option("--out", compare_out, "Output directory")->required();

  std::string instance;
  std::string solver = "greedy";
  auto* place = app.add_subcommand("placement", "Solve one placement instance");
  place->add_option("--instance", instance, "Instance file")->required();
  place->add_option("--solver", solver, "greedy|oracle")->check(CLI::IsMember({"greedy", "oracle"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*simulate) return run_guarded([&] { return cmd_simulate(config_path, seed, out_dir, policy, preset); });
  if (*cmp) return run_guarded([&] { return cmd_compare(config_paths, seed_list, compare_out); });
  if (*place) return run_guarded([&] { return cmd_placement(instance, solver); });
  return 0;
}
