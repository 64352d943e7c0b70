#include "commands.hpp"

#include <exception>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "mobcache/instance_io.hpp"
#include "mobcache/sim.hpp"

namespace mobcache::cli {

namespace {

std::vector<std::string> split_list(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(part);
    }
  }
  return out;
}

std::uint64_t parse_seed(const std::string& s) {
  std::uint64_t v = 0;
  if (!detail::parse_number(std::string_view(s), v)) {
    throw ConfigError("bad seed '" + s + "'");
  }
  return v;
}

}  // namespace

int cmd_simulate(const std::string& config_path, std::uint64_t seed, const std::string& out,
                 const std::string& policy, const std::string& preset) {
  auto cfg = load_config(config_path, preset);
  cfg.seed = seed;
  cfg.out = out;
  if (!policy.empty()) cfg.policy = parse_policy(policy);
  const auto result = run(cfg);
  write_outputs(result, cfg, out);
  write_metrics_header(std::cout);
  for (const auto& row : result.rows) write_metrics_row(std::cout, row);
  return 0;
}

int cmd_compare(const std::vector<std::string>& config_paths, const std::vector<std::string>& seed_list,
                const std::string& out) {
  std::vector<SimConfig> configs;
  for (const auto& p : split_list(config_paths)) configs.push_back(load_config(p));
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(seed_list)) seeds.push_back(parse_seed(s));
  const auto result = compare(configs, seeds);
  write_compare(result, out);
  std::cout << "rank,policy,mean_ce,final_cum_lambda,mean_cost\n" << std::setprecision(6);
  for (std::size_t i = 0; i < result.summary.size(); ++i) {
    const auto& s = result.summary[i];
    std::cout << i + 1 << ',' << s.policy << ',' << s.mean_ce << ',' << s.final_cum_lambda << ','
              << s.mean_cost << '\n';
  }
  return 0;
}

int cmd_placement(const std::string& instance, const std::string& solver) {
  const auto problem = read_instance_file(instance);
  PlacementResult r = solver == "oracle" ? exhaustive_place(problem)
                                                   : greedy_place(problem);
  std::cout << std::setprecision(12) << "solver " << solver << "\ncost " << r.cost
            << "\niterations " << r.iterations << "\nplacement\n";
  for (std::size_t k = 0; k < r.cache.sbs_count(); ++k) {
    for (std::size_t f = 0; f < r.cache.file_count(); ++f) {
      std::cout << (f ? " " : "") << (r.cache.cached(k, f) ? 1 : 0);
    }
    std::cout << '\n';
  }
  return 0;
}

int run_guarded(const std::function<int()>& command) {
  try {
    return command();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SizeGuardError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TraceError& e) {
    std::cerr << "trace error: " << e.what() << '\n';
    return kExitTrace;
  } catch (const OutOfRegionError& e) {
    std::cerr << "trace error: " << e.what() << '\n';
    return kExitTrace;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mobcache::cli
