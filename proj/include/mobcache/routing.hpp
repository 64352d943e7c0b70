#pragma once

// Three-tier content delivery: local SBS, then the intra-cell domain
// (neighbor SBSs), then backhaul to a remote SBS or the MBS.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mobcache/core.hpp"

namespace mobcache {

enum class Tier { kLocalHit, kIntraCellHit, kInterCellSbsFetch, kMbsFetch };

inline const char* tier_name(Tier t) {
  switch (t) {
    case Tier::kLocalHit: return "local";
    case Tier::kIntraCellHit: return "intra";
    case Tier::kInterCellSbsFetch: return "inter";
    case Tier::kMbsFetch: return "mbs";
  }
  return "?";
}

struct RoutingOutcome {
  Tier tier{Tier::kMbsFetch};
  std::optional<std::size_t> server;  // serving SBS; empty when the MBS serves
  std::size_t file{0};
  std::size_t slot{0};
};

struct RoutingOptions {
  bool prefer_remote_sbs{true};  // inter-cell: remote SBS before the MBS
  bool strict_hits{false};       // count only local hits as cache hits
};

inline RoutingOutcome route_request(const CacheMatrix& cache, const NetworkTopology& topology,
                                    std::size_t local_sbs, std::size_t file, std::size_t slot = 0,
                                    const RoutingOptions& options = {}) {
  detail::require(local_sbs < cache.sbs_count() && file < cache.file_count(),
                  "routing index out of range");
  if (cache.cached(local_sbs, file)) return {Tier::kLocalHit, local_sbs, file, slot};
  for (std::size_t l : topology.neighbors(local_sbs)) {
    if (cache.cached(l, file)) return {Tier::kIntraCellHit, l, file, slot};
  }
  if (options.prefer_remote_sbs) {
    for (std::size_t l = 0; l < cache.sbs_count(); ++l) {
      if (l != local_sbs && cache.cached(l, file)) return {Tier::kInterCellSbsFetch, l, file, slot};
    }
  }
  return {Tier::kMbsFetch, std::nullopt, file, slot};
}

inline bool is_cache_hit(Tier t, bool strict = false) {
  return t == Tier::kLocalHit || (!strict && t == Tier::kIntraCellHit);
}

// Fraction of requests served without the backhaul; empty when there were
// no requests.
inline std::optional<double> cache_efficiency(std::span<const RoutingOutcome> outcomes,
                                              bool strict = false) {
  if (outcomes.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (const auto& o : outcomes) hits += is_cache_hit(o.tier, strict);
  return static_cast<double>(hits) / static_cast<double>(outcomes.size());
}

// coverage[k][f] = 1 when a request for f at k is a cache hit.
inline DensityTable coverage(const CacheMatrix& cache, const NetworkTopology& topology,
                             bool strict = false) {
  DensityTable out(cache.sbs_count(), cache.file_count());
  for (std::size_t k = 0; k < cache.sbs_count(); ++k) {
    for (std::size_t f = 0; f < cache.file_count(); ++f) {
      bool hit = cache.cached(k, f);
      if (!strict) {
        for (std::size_t l : topology.neighbors(k)) hit = hit || cache.cached(l, f);
      }
      out(k, f) = hit ? 1.0 : 0.0;
    }
  }
  return out;
}

// Running sum over periods of sum_{k,f} placement[k][f] * density[k][f].
inline std::vector<double> cumulative_request_density(std::span<const DensityTable> placements,
                                                      std::span<const DensityTable> densities) {
  detail::require(placements.size() == densities.size(), "series are not aligned");
  std::vector<double> out;
  out.reserve(placements.size());
  double running = 0.0;
  for (std::size_t n = 0; n < placements.size(); ++n) {
    const auto& c = placements[n];
    const auto& d = densities[n];
    detail::require(c.rows() == d.rows() && c.cols() == d.cols(), "table shapes differ");
    for (std::size_t i = 0; i < c.data().size(); ++i) {
      detail::require(d.data()[i] >= 0.0, "densities must be non-negative");
      running += c.data()[i] * d.data()[i];
    }
    out.push_back(running);
  }
  return out;
}

inline DensityTable as_table(const CacheMatrix& cache) {
  DensityTable out(cache.sbs_count(), cache.file_count());
  for (std::size_t k = 0; k < cache.sbs_count(); ++k) {
    for (std::size_t f = 0; f < cache.file_count(); ++f) out(k, f) = cache.cached(k, f) ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace mobcache
