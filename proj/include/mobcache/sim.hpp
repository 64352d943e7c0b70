#pragma once

// Slotted simulation harness. Each aggregation period:
//   1. pedestrian density per cell from the mobility of the latest slot,
//   2. request density from the trailing window (federated ridge fit),
//   3. placement by the configured policy,
//   4. routing of every request of the period against that placement,
//   5. one metrics row.
// A period is placed on information from earlier periods only; period 0
// starts cold (uniform popularity).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mobcache/core.hpp"
#include "mobcache/demand.hpp"
#include "mobcache/fed_learning.hpp"
#include "mobcache/mobility.hpp"
#include "mobcache/placement.hpp"
#include "mobcache/routing.hpp"
#include "mobcache/trace.hpp"

namespace mobcache {

enum class Policy { kFrpl, kEpsilonGreedy, kRandom, kLocal, kFullInfo, kOracle };

inline const char* policy_name(Policy p) {
  switch (p) {
    case Policy::kFrpl: return "frpl";
    case Policy::kEpsilonGreedy: return "egreedy";
    case Policy::kRandom: return "random";
    case Policy::kLocal: return "local";
    case Policy::kFullInfo: return "fullinfo";
    case Policy::kOracle: return "oracle";
  }
  return "?";
}

inline Policy parse_policy(const std::string& s) {
  for (Policy p : {Policy::kFrpl, Policy::kEpsilonGreedy, Policy::kRandom, Policy::kLocal,
                   Policy::kFullInfo, Policy::kOracle}) {
    if (s == policy_name(p)) return p;
  }
  throw ConfigError("unknown policy '" + s + "'");
}

struct SimConfig {
  // Trace sources. Without `ratings` or `requests` a synthetic ratings
  // trace is generated from the synth_* keys.
  std::string ratings;
  std::string requests;
  std::string mobility;
  std::string delimiter{"::"};
  std::size_t synth_users{6040};
  std::size_t synth_items{3952};
  std::size_t synth_ratings{200000};
  double synth_zipf{0.8};
  std::uint64_t trace_seed{2024};
  std::size_t top_files{50};
  std::size_t top_users{500};

  Policy policy{Policy::kFrpl};
  std::size_t grid_cols{2};
  std::size_t grid_rows{2};
  double region_size{1000.0};  // meters, square region
  NeighborMode neighbor_mode{NeighborMode::kGrid8};
  double capacity{5.0};
  CostParams costs{};

  double eta{0.003};
  double ridge{1.0};
  FlMode fl_mode{FlMode::kFedAvg};
  std::size_t fl_rounds{100};
  std::size_t fl_local_steps{1};
  std::size_t window{50};

  double epsilon{0.1};
  std::size_t m{0};  // files per SBS for egreedy; 0 means "fill the capacity"

  std::size_t theta{20};
  std::size_t slots{200};
  std::uint64_t seed{1};
  std::string out{"out"};

  double walker_step{20.0};
  double cluster_rate{0.05};
  double band_fraction{0.25};
  std::size_t min_cluster_size{2};
  LeaverMode leaver_mode{LeaverMode::kExtrapolate};

  bool strict_hits{false};
  bool prefer_remote_sbs{true};
  bool record_runtime{false};

  std::size_t sbs_count() const { return grid_cols * grid_rows; }
  std::size_t periods() const { return (slots + theta - 1) / theta; }
  std::size_t files_per_sbs() const {
    return m > 0 ? m : static_cast<std::size_t>(std::floor(capacity + 1e-9));
  }

  void validate() const {
    const auto check = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError(what);
    };
    check(grid_cols >= 1 && grid_rows >= 1, "grid must have at least one cell");
    check(region_size > 0.0, "region_size must be positive");
    check(capacity >= 0.0, "capacity must be non-negative");
    check(eta > 0.0, "eta must be positive");
    check(ridge >= 0.0, "ridge must be non-negative");
    check(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
    check(theta >= 1 && slots >= theta, "need slots >= theta >= 1");
    check(fl_rounds >= 1 && fl_local_steps >= 1, "FL rounds and local steps must be positive");
    check(window >= 1, "window must be positive");
    check(static_cast<double>(files_per_sbs()) <= capacity + 1e-9,
          "m files per SBS must fit in the capacity");
    check(walker_step >= 0.0 && cluster_rate >= 0.0, "mobility rates must be non-negative");
    check(band_fraction >= 0.0 && band_fraction <= 1.0, "band_fraction must lie in [0, 1]");
    check(min_cluster_size >= 1, "min_cluster_size must be positive");
    try {
      costs.validate();
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
  }

  // Everything that determines the request and mobility inputs except the
  // run seed. Configs compared side by side must agree on it.
  std::string trace_key() const {
    std::ostringstream oss;
    oss << ratings << '|' << requests << '|' << mobility << '|' << delimiter << '|'
        << synth_users << '|' << synth_items << '|' << synth_ratings << '|' << synth_zipf << '|'
        << trace_seed << '|' << top_files << '|' << top_users << '|' << slots << '|' << theta
        << '|' << grid_cols << 'x' << grid_rows << '|' << region_size << '|' << walker_step << '|'
        << cluster_rate;
    return oss.str();
  }
};

// ---------------------------------------------------------------------------
// Config files: `key = value` lines, `#` comments.
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(detail::concat("config line ", line_no, ": expected key = value"));
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline void apply_preset(SimConfig& c, const std::string& preset) {
  if (preset == "desk") {
    c.slots = 200;
    c.theta = 20;
    c.top_files = 50;
    c.top_users = 500;
    c.capacity = 5.0;
    c.grid_cols = 2;
    c.grid_rows = 2;
  } else if (preset == "paper") {
    c.slots = 3400;
    c.theta = 20;
    c.top_files = 0;
    c.top_users = 0;
    c.synth_users = 6040;
    c.synth_items = 3952;
    c.synth_ratings = 1000209;
    c.capacity = 50.0;
  } else {
    throw ConfigError("unknown preset '" + preset + "'");
  }
}

inline void apply_config(SimConfig& c, const std::map<std::string, std::string>& kv) {
  const auto num = [](const std::string& key, const std::string& v) {
    double d = 0.0;
    if (!detail::parse_number(std::string_view(v), d)) {
      throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
    return d;
  };
  const auto count = [&](const std::string& key, const std::string& v) {
    const double d = num(key, v);
    if (d < 0.0 || d != std::floor(d)) {
      throw ConfigError("config key '" + key + "': expected a non-negative integer");
    }
    return static_cast<std::size_t>(d);
  };
  const auto flag = [](const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected true/false");
  };

  if (const auto it = kv.find("preset"); it != kv.end()) apply_preset(c, it->second);
  for (const auto& [key, v] : kv) {
    if (key == "preset") continue;
    else if (key == "ratings") c.ratings = v;
    else if (key == "requests") c.requests = v;
    else if (key == "mobility") c.mobility = v;
    else if (key == "delimiter") c.delimiter = v;
    else if (key == "synth_users") c.synth_users = count(key, v);
    else if (key == "synth_items") c.synth_items = count(key, v);
    else if (key == "synth_ratings") c.synth_ratings = count(key, v);
    else if (key == "synth_zipf") c.synth_zipf = num(key, v);
    else if (key == "trace_seed") c.trace_seed = count(key, v);
    else if (key == "top_files") c.top_files = count(key, v);
    else if (key == "top_users") c.top_users = count(key, v);
    else if (key == "policy") c.policy = parse_policy(v);
    else if (key == "grid_cols") c.grid_cols = count(key, v);
    else if (key == "grid_rows") c.grid_rows = count(key, v);
    else if (key == "region_size") c.region_size = num(key, v);
    else if (key == "neighbors") {
      if (v == "grid8") c.neighbor_mode = NeighborMode::kGrid8;
      else if (v == "full") c.neighbor_mode = NeighborMode::kFull;
      else throw ConfigError("neighbors must be grid8 or full");
    }
    else if (key == "capacity") c.capacity = num(key, v);
    else if (key == "cache_cost") c.costs.cache_cost = num(key, v);
    else if (key == "sbs_retrieval") c.costs.sbs_retrieval = num(key, v);
    else if (key == "mbs_base") c.costs.mbs_base = num(key, v);
    else if (key == "mbs_link") c.costs.mbs_link = num(key, v);
    else if (key == "eta") c.eta = num(key, v);
    else if (key == "ridge") c.ridge = num(key, v);
    else if (key == "fl_mode") {
      if (v == "fedavg") c.fl_mode = FlMode::kFedAvg;
      else if (v == "paper-faithful") c.fl_mode = FlMode::kPaperFaithful;
      else throw ConfigError("fl_mode must be fedavg or paper-faithful");
    }
    else if (key == "fl_rounds") c.fl_rounds = count(key, v);
    else if (key == "fl_local_steps") c.fl_local_steps = count(key, v);
    else if (key == "window") c.window = count(key, v);
    else if (key == "epsilon") c.epsilon = num(key, v);
    else if (key == "m") c.m = count(key, v);
    else if (key == "theta") c.theta = count(key, v);
    else if (key == "slots") c.slots = count(key, v);
    else if (key == "seed") c.seed = count(key, v);
    else if (key == "out") c.out = v;
    else if (key == "walker_step") c.walker_step = num(key, v);
    else if (key == "cluster_rate") c.cluster_rate = num(key, v);
    else if (key == "band_fraction") c.band_fraction = num(key, v);
    else if (key == "min_cluster_size") c.min_cluster_size = count(key, v);
    else if (key == "leavers") {
      if (v == "extrapolate") c.leaver_mode = LeaverMode::kExtrapolate;
      else if (v == "oracle") c.leaver_mode = LeaverMode::kOracle;
      else throw ConfigError("leavers must be extrapolate or oracle");
    }
    else if (key == "strict_hits") c.strict_hits = flag(key, v);
    else if (key == "prefer_remote_sbs") c.prefer_remote_sbs = flag(key, v);
    else if (key == "record_runtime") c.record_runtime = flag(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

inline SimConfig load_config(const std::string& path, const std::string& preset = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  auto kv = parse_config(in);
  if (!preset.empty()) kv["preset"] = preset;
  SimConfig c;
  apply_config(c, kv);
  return c;
}

// ---------------------------------------------------------------------------
// Inputs
// ---------------------------------------------------------------------------

struct SimInputs {
  NetworkTopology topology;
  std::vector<RequestEvent> requests;
  std::size_t file_count{0};
  std::vector<UserId> users;
  MobilityTrace mobility;
  CellJoin join;
  std::vector<DensityTable> counts;  // per slot, SBS x file
  std::size_t records{0};
  std::size_t skipped{0};
};

inline SimInputs prepare_inputs(const SimConfig& c) {
  c.validate();
  SimInputs in{NetworkTopology::grid(c.grid_cols, c.grid_rows,
                                     Rect{0.0, 0.0, c.region_size, c.region_size},
                                     c.neighbor_mode),
               {}, 0, {}, {}, {}, {}, 0, 0};

  TraceConfig tc;
  tc.slots = c.slots;
  tc.slots_per_aggregation = c.theta;
  tc.top_files = c.top_files;
  tc.top_users = c.top_users;
  tc.delimiter = c.delimiter;
  tc.seed = c.seed;

  if (!c.requests.empty()) {
    std::ifstream f(c.requests);
    if (!f) throw TraceError("cannot open requests file " + c.requests);
    in.requests = read_requests_csv(f);
    if (in.requests.empty()) throw TraceError("requests file holds no records");
    for (const auto& r : in.requests) {
      if (r.slot >= c.slots) throw TraceError("request slot beyond the configured slot count");
      in.file_count = std::max(in.file_count, r.file + 1);
    }
    in.records = in.requests.size();
  } else {
    LoadedTrace trace;
    if (!c.ratings.empty()) {
      trace = load_requests(c.ratings, tc);
    } else {
      SyntheticRatingsConfig sc;
      sc.users = c.synth_users;
      sc.items = c.synth_items;
      sc.ratings = c.synth_ratings;
      sc.item_zipf = c.synth_zipf;
      sc.seed = c.trace_seed;
      std::stringstream buf;
      synth_ratings(buf, sc);
      trace = load_requests(buf, tc);
    }
    in.requests = std::move(trace.events);
    in.file_count = trace.file_count();
    in.records = trace.records;
    in.skipped = trace.skipped;
  }

  for (const auto& r : in.requests) in.users.push_back(r.user);
  std::sort(in.users.begin(), in.users.end());
  in.users.erase(std::unique(in.users.begin(), in.users.end()), in.users.end());

  if (!c.mobility.empty()) {
    std::ifstream f(c.mobility);
    if (!f) throw TraceError("cannot open mobility file " + c.mobility);
    in.mobility.samples = read_mobility_csv(f);
    for (const auto& s : in.mobility.samples) {
      if (!in.topology.region().contains(s.position)) {
        throw TraceError(detail::concat("mobility sample of user ", s.user, " at slot ", s.slot,
                                        " lies outside the region"));
      }
    }
    std::stable_sort(in.mobility.samples.begin(), in.mobility.samples.end(),
                     [](const auto& a, const auto& b) {
                       return a.slot != b.slot ? a.slot < b.slot : a.user < b.user;
                     });
  } else {
    MobilityOptions mo;
    mo.cluster_user_base = (in.users.empty() ? 0 : in.users.back()) + 1000000;
    in.mobility = synth_mobility(tc, in.topology, in.users, c.cluster_rate, c.walker_step, mo);
  }

  in.join = slot_requests_by_cell(in.requests, in.mobility.samples, in.topology, c.seed);
  in.counts = count_requests(in.requests, in.join.cell, c.slots, in.topology.sbs_count(),
                             in.file_count);
  if (c.policy == Policy::kOracle &&
      in.topology.sbs_count() * in.file_count > kExhaustiveLimit) {
    throw ConfigError("policy oracle needs SBS count x file count <= 20");
  }
  return in;
}

// ---------------------------------------------------------------------------
// Run
// ---------------------------------------------------------------------------

struct MetricsRow {
  std::size_t period{0};
  std::string policy;
  std::optional<double> ce;
  double cum_lambda{0.0};
  double cost{0.0};
  std::optional<double> runtime_ms;
  std::vector<double> psi;  // per cell, used by the placement
};

struct IterationRow {
  std::size_t period{0};
  std::size_t iteration{0};
  double cost{0.0};
};

struct RunResult {
  std::vector<MetricsRow> rows;
  std::vector<IterationRow> iterations;
  CacheMatrix final_placement;
  CentroidSet pedestrian_model;  // merged per-SBS centroids of the last slot
  std::size_t bracket_checks{0};
  std::size_t bracket_violations{0};
  std::size_t capacity_violations{0};
  bool cold_start_degenerate{false};
  std::size_t records{0};
  std::size_t skipped{0};
  std::size_t unlocated_users{0};
  std::size_t file_count{0};
};

namespace detail {

// Per-slot user tracks with the previous (and next) position of each user.
class TrackIndex {
 public:
  TrackIndex(std::span<const MobilitySample> samples, std::size_t slots) : by_slot_(slots) {
    for (const auto& s : samples) {
      if (s.slot < slots) by_slot_[s.slot].push_back(&s);
    }
  }

  std::vector<UserTrack> tracks(std::size_t slot) const {
    std::unordered_map<UserId, Point> prev;
    std::unordered_map<UserId, Point> next;
    if (slot > 0) {
      for (const auto* s : by_slot_[slot - 1]) prev[s->user] = s->position;
    }
    if (slot + 1 < by_slot_.size()) {
      for (const auto* s : by_slot_[slot + 1]) next[s->user] = s->position;
    }
    std::vector<UserTrack> out;
    out.reserve(by_slot_[slot].size());
    for (const auto* s : by_slot_[slot]) {
      UserTrack t{s->user, s->position, std::nullopt, std::nullopt};
      if (auto it = prev.find(s->user); it != prev.end()) t.prev = it->second;
      if (auto it = next.find(s->user); it != next.end()) t.next = it->second;
      out.push_back(t);
    }
    return out;
  }

 private:
  std::vector<std::vector<const MobilitySample*>> by_slot_;
};

inline DensityTable sum_slots(std::span<const DensityTable> counts, std::size_t begin,
                              std::size_t end, std::size_t rows, std::size_t cols) {
  DensityTable out(rows, cols);
  for (std::size_t s = begin; s < end; ++s) {
    for (std::size_t k = 0; k < rows; ++k) {
      for (std::size_t f = 0; f < cols; ++f) out(k, f) += counts[s](k, f);
    }
  }
  return out;
}

}  // namespace detail

inline RunResult run(const SimConfig& c, const SimInputs& in) {
  c.validate();
  const NetworkTopology& topo = in.topology;
  const std::size_t K = topo.sbs_count();
  const std::size_t M = in.file_count;
  const ContentCatalog catalog(M);
  const std::vector<double> capacities(K, c.capacity);

  DensityEstimatorConfig dc;
  dc.band_fraction = c.band_fraction;
  dc.min_cluster_size = c.min_cluster_size;
  dc.leaver_mode = c.leaver_mode;
  dc.seed = c.seed;
  const DensityEstimator estimator(topo, dc);
  const detail::TrackIndex tracks(in.mobility.samples, c.slots);

  FedConfig fc;
  fc.task = Task::kRequest;
  fc.local_steps = c.fl_local_steps;
  fc.rounds = c.fl_rounds;
  fc.learning_rate = c.eta;
  fc.ridge = c.ridge;
  fc.mode = c.fl_mode;

  RoutingOptions ro;
  ro.strict_hits = c.strict_hits;
  ro.prefer_remote_sbs = c.prefer_remote_sbs;

  Rng rng(c.seed ^ 0x5DEECE66DULL);
  RunResult result{{}, {}, CacheMatrix(catalog, capacities), {}, 0, 0, 0, false,
                   in.records, in.skipped, in.join.unlocated_users.size(), M};

  // Requests of each slot, in input order.
  std::vector<std::vector<std::size_t>> requests_at(c.slots);
  for (std::size_t i = 0; i < in.requests.size(); ++i) requests_at[in.requests[i].slot].push_back(i);

  std::optional<LinearModel> model;
  std::vector<double> raw_lambda(M, 1.0);
  std::vector<double> last_psi(K, 0.0);
  double cum_lambda = 0.0;

  const auto estimate_slot = [&](std::size_t slot) {
    const auto users = tracks.tracks(slot);
    auto reports = estimator.estimate_all(users, slot);
    const auto pop = popularity(raw_lambda);
    for (const auto& r : reports) {
      const auto realized = expected_request_density(r.psi, pop.p);
      const auto bracket =
          proposition1_bracket(r.cluster_counts, r.stats.transited, r.stats.leavers, raw_lambda);
      ++result.bracket_checks;
      if (!bracket.contains(realized)) ++result.bracket_violations;
    }
    return reports;
  };

  {
    const auto reports = estimate_slot(0);
    for (std::size_t k = 0; k < K; ++k) last_psi[k] = reports[k].psi;
  }

  for (std::size_t n = 0; n < c.periods(); ++n) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t begin = n * c.theta;
    const std::size_t end = std::min(c.slots, begin + c.theta);

    // Request density from the trailing window before this period.
    if (begin > 0) {
      const std::size_t w0 = begin > c.window ? begin - c.window : 0;
      std::vector<TrainingBatch> batches;
      for (std::size_t k = 0; k < K; ++k) {
        DensityTable slot_counts(begin - w0, M);
        for (std::size_t s = w0; s < begin; ++s) {
          for (std::size_t f = 0; f < M; ++f) slot_counts(s - w0, f) = in.counts[s](k, f);
        }
        batches.push_back(build_request_batch(slot_counts));
      }
      auto fit = fit_request_density(batches, M, fc, model);
      model = std::move(fit.model);
      raw_lambda = std::move(fit.lambda);
    }
    const DensityEstimate predicted = make_density_estimate(last_psi, raw_lambda);
    if (n == 0) result.cold_start_degenerate = true;

    const DensityTable truth = [&] {
      DensityTable t = detail::sum_slots(in.counts, begin, end, K, M);
      const double len = static_cast<double>(end - begin);
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t f = 0; f < M; ++f) t(k, f) /= len;
      }
      return t;
    }();
    const PlacementProblem predicted_problem{catalog, c.costs, capacities, predicted.expected};
    const PlacementProblem true_problem{catalog, c.costs, capacities, truth};

    PlacementResult placed = [&]() -> PlacementResult {
      switch (c.policy) {
        case Policy::kFrpl: {
          auto r = greedy_place(predicted_problem);
          r.policy = "frpl";
          return r;
        }
        case Policy::kOracle: return exhaustive_place(predicted_problem);
        case Policy::kFullInfo: return full_info_place(true_problem);
        case Policy::kEpsilonGreedy: {
          const auto seen = detail::sum_slots(in.counts, 0, begin, K, M);
          return epsilon_greedy_place(predicted_problem, seen, c.files_per_sbs(), c.epsilon, rng)
              .result;
        }
        case Policy::kRandom: return random_place(predicted_problem, rng);
        case Policy::kLocal: {
          const std::size_t w0 = begin > c.window ? begin - c.window : 0;
          return local_caching_place(predicted_problem,
                                     detail::sum_slots(in.counts, w0, begin, K, M));
        }
      }
      throw ConfigError("unhandled policy");
    }();
    if (!placed.cache.satisfies_constraints()) {
      ++result.capacity_violations;
      throw CapacityError(detail::concat("placement violates capacity in period ", n));
    }
    for (std::size_t i = 0; i < placed.cost_trace.size(); ++i) {
      result.iterations.push_back({n, i, placed.cost_trace[i]});
    }

    // Serve the period and advance the pedestrian estimates slot by slot.
    std::vector<RoutingOutcome> outcomes;
    for (std::size_t s = begin; s < end; ++s) {
      for (std::size_t i : requests_at[s]) {
        const auto& r = in.requests[i];
        outcomes.push_back(route_request(placed.cache, topo, in.join.cell[i], r.file, s, ro));
      }
      if (s > 0) {
        const auto reports = estimate_slot(s);
        for (std::size_t k = 0; k < K; ++k) last_psi[k] = reports[k].psi;
        if (s + 1 == c.slots) {
          std::vector<CentroidSet> sets;
          for (const auto& rep : reports) {
            CentroidSet cs{rep.centroids, {}};
            for (std::size_t cnt : rep.cluster_counts) cs.weights.push_back(static_cast<double>(cnt));
            sets.push_back(std::move(cs));
          }
          result.pedestrian_model = aggregate_centroids(sets);
        }
      }
    }

    const auto cover = coverage(placed.cache, topo, c.strict_hits);
    for (std::size_t i = 0; i < cover.data().size(); ++i) cum_lambda += cover.data()[i] * truth.data()[i];

    MetricsRow row;
    row.period = n;
    row.policy = policy_name(c.policy);
    row.ce = cache_efficiency(outcomes, c.strict_hits);
    row.cum_lambda = cum_lambda;
    row.cost = network_cost(placed.cache, true_problem);
    row.psi = predicted.psi;
    if (c.record_runtime) {
      row.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    result.rows.push_back(std::move(row));
    result.final_placement = std::move(placed.cache);
  }
  return result;
}

inline RunResult run(const SimConfig& c) { return run(c, prepare_inputs(c)); }

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

inline void write_metrics_header(std::ostream& out, bool with_seed = false) {
  if (with_seed) out << "seed,";
  out << "period,policy,ce,cum_lambda,cost,runtime_ms\n";
}

inline void write_metrics_row(std::ostream& out, const MetricsRow& r,
                              std::optional<std::uint64_t> seed = std::nullopt) {
  out << std::setprecision(12);
  if (seed) out << *seed << ',';
  out << r.period << ',' << r.policy << ',';
  if (r.ce) out << *r.ce;
  out << ',' << r.cum_lambda << ',' << r.cost << ',';
  if (r.runtime_ms) out << std::fixed << std::setprecision(3) << *r.runtime_ms << std::defaultfloat;
  out << '\n';
}

inline void write_outputs(const RunResult& r, const SimConfig& c,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.csv");
    write_metrics_header(out);
    for (const auto& row : r.rows) write_metrics_row(out, row);
  }
  {
    std::ofstream out(dir / "psi.csv");
    out << "period,cell,psi\n" << std::setprecision(12);
    for (const auto& row : r.rows) {
      for (std::size_t k = 0; k < row.psi.size(); ++k) out << row.period << ',' << k << ',' << row.psi[k] << '\n';
    }
  }
  {
    std::ofstream out(dir / "iterations.csv");
    out << "period,iteration,cost\n" << std::setprecision(12);
    for (const auto& it : r.iterations) out << it.period << ',' << it.iteration << ',' << it.cost << '\n';
  }
  {
    std::ofstream out(dir / "placement.csv");
    out << "sbs,file\n";
    for (std::size_t k = 0; k < r.final_placement.sbs_count(); ++k) {
      for (std::size_t f : r.final_placement.files_at(k)) out << k << ',' << f + 1 << '\n';
    }
  }
  {
    std::ofstream out(dir / "run_meta.txt");
    out << "policy = " << policy_name(c.policy) << "\nseed = " << c.seed
        << "\nslotting = quantile\nrecords = " << r.records << "\nskipped = " << r.skipped
        << "\nfiles = " << r.file_count << "\nunlocated_users = " << r.unlocated_users
        << "\nbracket_checks = " << r.bracket_checks
        << "\nbracket_violations = " << r.bracket_violations << '\n';
  }
}

// ---------------------------------------------------------------------------
// Compare
// ---------------------------------------------------------------------------

struct PolicySummary {
  std::string policy;
  double mean_ce{0.0};          // periods after the warm-up period
  double final_cum_lambda{0.0};
  double mean_cost{0.0};        // periods after the warm-up period
  std::size_t runs{0};
};

struct CompareResult {
  std::vector<std::pair<std::uint64_t, MetricsRow>> rows;
  std::vector<PolicySummary> summary;  // ranked by mean CE, best first
};

inline PolicySummary summarize(const std::string& name, std::span<const RunResult> runs) {
  PolicySummary s;
  s.policy = name;
  std::size_t ce_n = 0;
  std::size_t cost_n = 0;
  for (const auto& r : runs) {
    for (const auto& row : r.rows) {
      if (row.period == 0) continue;
      if (row.ce) {
        s.mean_ce += *row.ce;
        ++ce_n;
      }
      s.mean_cost += row.cost;
      ++cost_n;
    }
    if (!r.rows.empty()) s.final_cum_lambda += r.rows.back().cum_lambda;
  }
  s.runs = runs.size();
  if (ce_n) s.mean_ce /= static_cast<double>(ce_n);
  if (cost_n) s.mean_cost /= static_cast<double>(cost_n);
  if (!runs.empty()) s.final_cum_lambda /= static_cast<double>(runs.size());
  return s;
}

inline CompareResult compare(std::span<const SimConfig> configs, std::span<const std::uint64_t> seeds) {
  if (configs.empty() || seeds.empty()) throw ConfigError("compare needs configs and seeds");
  for (const auto& c : configs) {
    if (c.trace_key() != configs.front().trace_key()) {
      throw ConfigError("compared configs must share the same trace and scenario");
    }
  }
  CompareResult out;
  std::vector<std::vector<RunResult>> per_config(configs.size());
  for (std::uint64_t seed : seeds) {
    SimConfig base = configs.front();
    base.seed = seed;
    const SimInputs inputs = prepare_inputs(base);
    for (std::size_t i = 0; i < configs.size(); ++i) {
      SimConfig c = configs[i];
      c.seed = seed;
      per_config[i].push_back(run(c, inputs));
      for (const auto& row : per_config[i].back().rows) out.rows.emplace_back(seed, row);
    }
  }
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::string name = policy_name(configs[i].policy);
    if (configs[i].policy == Policy::kEpsilonGreedy) {
      std::ostringstream oss;
      oss << name << "(eps=" << configs[i].epsilon << ")";
      name = oss.str();
    }
    out.summary.push_back(summarize(name, per_config[i]));
  }
  std::stable_sort(out.summary.begin(), out.summary.end(),
                   [](const auto& a, const auto& b) { return a.mean_ce > b.mean_ce; });
  return out;
}

inline void write_compare(const CompareResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.csv");
    write_metrics_header(out, true);
    for (const auto& [seed, row] : r.rows) write_metrics_row(out, row, seed);
  }
  std::ofstream out(dir / "summary.csv");
  out << "rank,policy,mean_ce,final_cum_lambda,mean_cost,runs\n" << std::setprecision(12);
  for (std::size_t i = 0; i < r.summary.size(); ++i) {
    const auto& s = r.summary[i];
    out << i + 1 << ',' << s.policy << ',' << s.mean_ce << ',' << s.final_cum_lambda << ','
        << s.mean_cost << ',' << s.runs << '\n';
  }
}

}  // namespace mobcache
