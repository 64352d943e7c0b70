#pragma once

// Trace ingestion: ratings files become slotted request streams, synthetic
// pedestrians supply the location context, and the two are joined by cell.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mobcache/core.hpp"

namespace mobcache {

struct TraceConfig {
  std::size_t slots{200};                 // T
  std::size_t slots_per_aggregation{20};  // theta
  std::size_t top_users{0};               // keep the most active users; 0 keeps all
  std::size_t top_files{0};               // keep the most requested files; 0 keeps all
  std::string delimiter{"::"};
  std::uint64_t seed{1};

  void validate() const {
    if (slots_per_aggregation < 1 || slots < slots_per_aggregation) {
      throw ConfigError("trace config needs slots >= slots_per_aggregation >= 1");
    }
    if (delimiter.empty()) throw ConfigError("ratings delimiter must not be empty");
  }
};

struct LoadedTrace {
  std::vector<RequestEvent> events;       // ordered by slot
  std::vector<std::int64_t> item_ids;     // compact file index -> original item id
  std::size_t user_count{0};
  std::size_t records{0};                 // well-formed records read
  std::size_t skipped{0};                 // malformed records
  std::vector<std::size_t> skipped_lines; // first few malformed line numbers

  std::size_t file_count() const { return item_ids.size(); }
};

namespace detail {

template <typename T>
bool parse_number(std::string_view s, T& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline std::vector<std::string_view> split(std::string_view line, std::string_view delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + delim.size();
  }
}

template <typename Key>
std::vector<Key> top_by_count(const std::unordered_map<Key, std::size_t>& counts, std::size_t n) {
  std::vector<std::pair<Key, std::size_t>> v(counts.begin(), counts.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (n > 0 && v.size() > n) v.resize(n);
  std::vector<Key> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(e.first);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

// Reads user<delim>item<delim>rating<delim>timestamp records. Records are
// ordered by timestamp (then user, item, line) and binned into equal-count
// slots; item ids are compacted in ascending order.
inline LoadedTrace load_requests(std::istream& in, const TraceConfig& config) {
  config.validate();
  struct Raw {
    std::int64_t user;
    std::int64_t item;
    std::int64_t ts;
    std::size_t line;
  };
  std::vector<Raw> raw;
  LoadedTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split(line, config.delimiter);
    Raw r{0, 0, 0, line_no};
    double rating = 0.0;
    if (fields.size() != 4 || !detail::parse_number(fields[0], r.user) ||
        !detail::parse_number(fields[1], r.item) || !detail::parse_number(fields[2], rating) ||
        !detail::parse_number(fields[3], r.ts)) {
      ++trace.skipped;
      if (trace.skipped_lines.size() < 10) trace.skipped_lines.push_back(line_no);
      continue;
    }
    raw.push_back(r);
  }
  trace.records = raw.size();
  if (raw.empty()) throw TraceError("ratings trace holds no valid records");

  if (config.top_files > 0 || config.top_users > 0) {
    std::unordered_map<std::int64_t, std::size_t> by_item;
    std::unordered_map<std::int64_t, std::size_t> by_user;
    for (const auto& r : raw) {
      ++by_item[r.item];
      ++by_user[r.user];
    }
    const auto items = detail::top_by_count(by_item, config.top_files);
    const auto users = detail::top_by_count(by_user, config.top_users);
    std::erase_if(raw, [&](const Raw& r) {
      return !std::binary_search(items.begin(), items.end(), r.item) ||
             !std::binary_search(users.begin(), users.end(), r.user);
    });
    if (raw.empty()) throw TraceError("no records left after filtering");
  }

  std::vector<std::int64_t> items;
  std::vector<std::int64_t> users;
  for (const auto& r : raw) {
    items.push_back(r.item);
    users.push_back(r.user);
  }
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  std::sort(users.begin(), users.end());
  users.erase(std::unique(users.begin(), users.end()), users.end());

  std::sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
    if (a.ts != b.ts) return a.ts < b.ts;
    if (a.user != b.user) return a.user < b.user;
    if (a.item != b.item) return a.item < b.item;
    return a.line < b.line;
  });

  const std::size_t n = raw.size();
  trace.events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = raw[i];
    const auto file = static_cast<std::size_t>(
        std::lower_bound(items.begin(), items.end(), r.item) - items.begin());
    const std::size_t slot = static_cast<std::size_t>(
        (static_cast<unsigned __int128>(i) * config.slots) / n);
    trace.events.push_back({slot, r.user, file});
  }
  trace.item_ids = std::move(items);
  trace.user_count = users.size();
  return trace;
}

inline LoadedTrace load_requests(const std::string& path, const TraceConfig& config) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open ratings file " + path);
  return load_requests(in, config);
}

// ---------------------------------------------------------------------------
// Synthetic ratings
// ---------------------------------------------------------------------------

struct SyntheticRatingsConfig {
  std::size_t users{6040};
  std::size_t items{3952};
  std::size_t ratings{200000};
  double item_zipf{0.8};   // item popularity exponent
  double user_zipf{0.5};   // user activity exponent
  std::int64_t start_time{956703932};
  std::int64_t span_seconds{3 * 365 * 24 * 3600LL};
  std::uint64_t seed{2024};
};

// Writes a MovieLens-shaped ratings file (user::item::rating::timestamp)
// whose item popularity and user activity follow Zipf laws.
inline void synth_ratings(std::ostream& out, const SyntheticRatingsConfig& c) {
  detail::require(c.users > 0 && c.items > 0 && c.ratings > 0, "synthetic trace sizes must be positive");
  std::mt19937_64 rng(c.seed);
  const auto zipf_weights = [](std::size_t n, double s) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), s);
    return w;
  };
  const auto item_w = zipf_weights(c.items, c.item_zipf);
  const auto user_w = zipf_weights(c.users, c.user_zipf);
  std::discrete_distribution<std::size_t> item_rank(item_w.begin(), item_w.end());
  std::discrete_distribution<std::size_t> user_rank(user_w.begin(), user_w.end());

  // Popularity rank -> id, shuffled so ids carry no popularity signal.
  std::vector<std::int64_t> item_of_rank(c.items);
  std::vector<std::int64_t> user_of_rank(c.users);
  std::iota(item_of_rank.begin(), item_of_rank.end(), 1);
  std::iota(user_of_rank.begin(), user_of_rank.end(), 1);
  std::shuffle(item_of_rank.begin(), item_of_rank.end(), rng);
  std::shuffle(user_of_rank.begin(), user_of_rank.end(), rng);

  std::uniform_int_distribution<std::int64_t> when(0, c.span_seconds);
  std::uniform_int_distribution<int> stars(1, 5);
  std::vector<std::int64_t> times(c.ratings);
  for (auto& t : times) t = c.start_time + when(rng);
  std::sort(times.begin(), times.end());
  for (std::size_t i = 0; i < c.ratings; ++i) {
    out << user_of_rank[user_rank(rng)] << "::" << item_of_rank[item_rank(rng)]
        << "::" << stars(rng) << "::" << times[i] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic mobility
// ---------------------------------------------------------------------------

struct MobilityOptions {
  std::size_t cluster_size{5};
  double cluster_speed_factor{2.5};  // cluster speed relative to step_scale
  double cluster_spread{0.02};       // member jitter, fraction of the cell side
  UserId cluster_user_base{1000000};
};

// A group of pedestrians that appears in a cell adjacent to `target` and
// walks to the target SBS. `arrival_slot` is the first slot at which the
// group center is inside the target cell.
struct ClusterEvent {
  std::vector<UserId> members;
  std::size_t source{0};
  std::size_t target{0};
  std::size_t spawn_slot{0};
  std::size_t arrival_slot{0};
};

struct MobilityTrace {
  std::vector<MobilitySample> samples;  // ordered by (slot, user)
  std::vector<ClusterEvent> events;
};

// Random-waypoint walkers (one per id in `walkers`) plus periodic cluster
// events, one every round(1 / cluster_arrival_rate) slots. Walker speeds
// are uniform in [0.5, 1.5] * step_scale per slot.
inline MobilityTrace synth_mobility(const TraceConfig& config, const NetworkTopology& topology,
                                    std::span<const UserId> walkers, double cluster_arrival_rate,
                                    double step_scale, const MobilityOptions& options = {}) {
  detail::require(step_scale >= 0.0, "step scale must be non-negative");
  detail::require(cluster_arrival_rate >= 0.0, "cluster rate must be non-negative");
  std::mt19937_64 rng(config.seed);
  const Rect region = topology.region();
  std::uniform_real_distribution<double> ux(region.x_min, region.x_max);
  std::uniform_real_distribution<double> uy(region.y_min, region.y_max);
  std::uniform_real_distribution<double> speed_draw(0.5, 1.5);

  const auto clamp = [&](Point p) {
    return Point{std::clamp(p.x, region.x_min, region.x_max),
                 std::clamp(p.y, region.y_min, region.y_max)};
  };
  const auto step_toward = [](Point from, Point to, double step) {
    const double d = distance(from, to);
    if (d <= step || d == 0.0) return to;
    return Point{from.x + (to.x - from.x) * step / d, from.y + (to.y - from.y) * step / d};
  };

  struct Walker {
    UserId id;
    Point pos;
    Point goal;
    double speed;
  };
  std::vector<Walker> ws;
  ws.reserve(walkers.size());
  for (UserId id : walkers) {
    const Point p{ux(rng), uy(rng)};
    ws.push_back({id, p, Point{ux(rng), uy(rng)}, speed_draw(rng) * step_scale});
  }

  struct Group {
    ClusterEvent event;
    Point center;
    Point dir;
    std::vector<Point> offsets;
    bool arrived{false};
  };
  std::vector<Group> groups;

  const std::size_t period =
      cluster_arrival_rate > 0.0
          ? std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(1.0 / cluster_arrival_rate)))
          : 0;
  const double side = std::min(topology.cell_width(), topology.cell_height());
  const double cluster_speed = options.cluster_speed_factor * step_scale;
  std::normal_distribution<double> jitter(0.0, options.cluster_spread * side);

  MobilityTrace trace;
  std::size_t next_event = 0;
  for (std::size_t slot = 0; slot < config.slots; ++slot) {
    for (auto& g : groups) {
      g.center = step_toward(g.center, topology.sbs_position(g.event.target), cluster_speed);
    }
    // Spawn a cluster event in an edge-adjacent neighbor of a random target.
    if (period > 0 && slot >= period / 2 && (slot - period / 2) % period == 0 &&
        topology.sbs_count() > 1) {
      std::uniform_int_distribution<std::size_t> pick_cell(0, topology.sbs_count() - 1);
      const std::size_t target = pick_cell(rng);
      std::vector<std::size_t> sources;
      const auto [tc, tr] = topology.coords(target);
      for (std::size_t l : topology.neighbors(target)) {
        const auto [lc, lr] = topology.coords(l);
        if (lc == tc || lr == tr) sources.push_back(l);
      }
      if (!sources.empty()) {
        std::uniform_int_distribution<std::size_t> pick_src(0, sources.size() - 1);
        const std::size_t source = sources[pick_src(rng)];
        const Point from = topology.sbs_position(source);
        const Point to = topology.sbs_position(target);
        const double span = distance(from, to);
        const Point dir{(to.x - from.x) / span, (to.y - from.y) / span};
        // Start 4.5 steps before the shared border, never past the source center.
        const double half = span / 2.0;
        const double lead = std::min(4.5 * cluster_speed, 0.9 * half);
        const Point border{from.x + dir.x * half, from.y + dir.y * half};
        Group g;
        g.center = {border.x - dir.x * lead, border.y - dir.y * lead};
        g.dir = dir;
        g.event.source = source;
        g.event.target = target;
        g.event.spawn_slot = slot;
        g.event.arrival_slot = std::numeric_limits<std::size_t>::max();
        for (std::size_t j = 0; j < options.cluster_size; ++j) {
          g.event.members.push_back(options.cluster_user_base +
                                    static_cast<UserId>(next_event * options.cluster_size + j));
          g.offsets.push_back({jitter(rng), jitter(rng)});
        }
        ++next_event;
        groups.push_back(std::move(g));
      }
    }

    for (auto& w : ws) {
      if (slot > 0 && w.speed > 0.0) {
        w.pos = step_toward(w.pos, w.goal, w.speed);
        if (w.pos == w.goal) {
          w.goal = {ux(rng), uy(rng)};
          w.speed = speed_draw(rng) * step_scale;
        }
      }
      trace.samples.push_back({slot, w.id, w.pos});
    }
    for (auto& g : groups) {
      if (!g.arrived && topology.cell_rect(g.event.target).contains(g.center) &&
          topology.assign_cell(g.center) == g.event.target) {
        g.arrived = true;
        g.event.arrival_slot = slot;
      }
      for (std::size_t j = 0; j < g.offsets.size(); ++j) {
        const Point p = clamp({g.center.x + g.offsets[j].x, g.center.y + g.offsets[j].y});
        trace.samples.push_back({slot, g.event.members[j], p});
      }
    }
  }
  std::stable_sort(trace.samples.begin(), trace.samples.end(),
                   [](const MobilitySample& a, const MobilitySample& b) {
                     return a.slot != b.slot ? a.slot < b.slot : a.user < b.user;
                   });
  for (auto& g : groups) trace.events.push_back(std::move(g.event));
  return trace;
}

// ---------------------------------------------------------------------------
// Join
// ---------------------------------------------------------------------------

struct CellJoin {
  std::vector<std::size_t> cell;         // per request, aligned with the input
  std::vector<UserId> unlocated_users;   // users with no position at all
};

// Attributes each request to the requesting user's cell at that slot. A user
// without a sample in the slot keeps the last known cell (the first known
// one before any sample); a user never seen gets one seeded random cell.
inline CellJoin slot_requests_by_cell(std::span<const RequestEvent> requests,
                                      std::span<const MobilitySample> mobility,
                                      const NetworkTopology& topology, std::uint64_t seed = 1) {
  std::unordered_map<UserId, std::vector<std::pair<std::size_t, std::size_t>>> history;
  for (const auto& s : mobility) history[s.user].push_back({s.slot, topology.assign_cell(s.position)});
  for (auto& [user, h] : history) {
    std::stable_sort(h.begin(), h.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, topology.sbs_count() - 1);
  std::map<UserId, std::size_t> fallback;

  CellJoin out;
  out.cell.reserve(requests.size());
  for (const auto& r : requests) {
    const auto it = history.find(r.user);
    if (it == history.end()) {
      auto [f, inserted] = fallback.try_emplace(r.user, 0);
      if (inserted) {
        f->second = pick(rng);
        out.unlocated_users.push_back(r.user);
      }
      out.cell.push_back(f->second);
      continue;
    }
    const auto& h = it->second;
    auto pos = std::upper_bound(h.begin(), h.end(), r.slot,
                                [](std::size_t s, const auto& e) { return s < e.first; });
    out.cell.push_back(pos == h.begin() ? h.front().second : std::prev(pos)->second);
  }
  return out;
}

// counts[slot][cell * files + file]
inline std::vector<DensityTable> count_requests(std::span<const RequestEvent> requests,
                                                std::span<const std::size_t> cells,
                                                std::size_t slots, std::size_t sbs,
                                                std::size_t files) {
  detail::require(requests.size() == cells.size(), "request/cell lists are not aligned");
  std::vector<DensityTable> out(slots, DensityTable(sbs, files));
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& r = requests[i];
    detail::require(r.slot < slots && r.file < files && cells[i] < sbs, "request out of range");
    out[r.slot](cells[i], r.file) += 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical CSV files
// ---------------------------------------------------------------------------

inline void write_requests_csv(std::ostream& out, std::span<const RequestEvent> events) {
  out << "slot,user,file\n";
  for (const auto& e : events) out << e.slot << ',' << e.user << ',' << e.file + 1 << '\n';
}

inline void write_mobility_csv(std::ostream& out, std::span<const MobilitySample> samples) {
  out << "slot,user,x,y\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& s : samples) {
    out << s.slot << ',' << s.user << ',' << s.position.x << ',' << s.position.y << '\n';
  }
}

namespace detail {

template <typename Row>
std::vector<Row> read_csv(std::istream& in, std::string_view header, std::size_t columns,
                          const auto& convert) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw TraceError("empty CSV input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw TraceError(concat("line 1: expected header '", header, "'"));
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line, ",");
    std::optional<Row> row;
    if (fields.size() == columns) row = convert(fields);
    if (!row) throw TraceError(concat("line ", line_no, ": malformed record '", line, "'"));
    rows.push_back(*row);
  }
  return rows;
}

}  // namespace detail

inline std::vector<RequestEvent> read_requests_csv(std::istream& in) {
  return detail::read_csv<RequestEvent>(
      in, "slot,user,file", 3, [](const auto& f) -> std::optional<RequestEvent> {
        RequestEvent e;
        std::size_t file = 0;
        if (!detail::parse_number(f[0], e.slot) || !detail::parse_number(f[1], e.user) ||
            !detail::parse_number(f[2], file) || file == 0) {
          return std::nullopt;
        }
        e.file = file - 1;
        return e;
      });
}

inline std::vector<MobilitySample> read_mobility_csv(std::istream& in) {
  return detail::read_csv<MobilitySample>(
      in, "slot,user,x,y", 4, [](const auto& f) -> std::optional<MobilitySample> {
        MobilitySample s;
        if (!detail::parse_number(f[0], s.slot) || !detail::parse_number(f[1], s.user) ||
            !detail::parse_number(f[2], s.position.x) || !detail::parse_number(f[3], s.position.y)) {
          return std::nullopt;
        }
        return s;
      });
}

}  // namespace mobcache
