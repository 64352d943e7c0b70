#pragma once

// Pedestrian-density prediction for one cell: cluster the users that sit in
// the transition band of the neighboring cells, keep the clusters that move
// toward the SBS, and combine them with the users already present minus the
// predicted leavers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mobcache/core.hpp"

namespace mobcache {

struct ClusterState {
  static constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

  std::vector<Point> centroids;
  std::vector<Point> previous_centroids;  // same order as centroids; may be empty
  std::vector<std::size_t> assignment;    // per input point, kUnassigned if filtered
  std::vector<std::size_t> counts;
  std::vector<double> loss_history;       // after every assignment step
  std::size_t iterations{0};
  bool reduced{false};                    // requested more clusters than points

  std::size_t cluster_count() const { return centroids.size(); }

  std::size_t assigned_count() const {
    return static_cast<std::size_t>(std::count_if(
        assignment.begin(), assignment.end(), [](std::size_t a) { return a != kUnassigned; }));
  }
};

namespace detail {

inline std::size_t nearest(const Point& p, std::span<const Point> centers) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const double d = squared_distance(p, centers[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

namespace detail {

inline std::vector<Point> farthest_point_seeds(std::span<const Point> points,
                                               std::size_t clusters, std::size_t first) {
  std::vector<Point> centers{points[first]};
  std::vector<double> nearest_d(points.size(), std::numeric_limits<double>::infinity());
  while (centers.size() < clusters) {
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t j = 0; j < points.size(); ++j) {
      nearest_d[j] = std::min(nearest_d[j], squared_distance(points[j], centers.back()));
      if (nearest_d[j] > far_d) {
        far_d = nearest_d[j];
        far = j;
      }
    }
    centers.push_back(points[far]);
  }
  return centers;
}

// Number of k-subsets of n, saturating at `cap`.
inline std::size_t choose_capped(std::size_t n, std::size_t k, std::size_t cap) {
  if (k > n) return 0;
  double c = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (c > static_cast<double>(cap)) return cap + 1;
  }
  return static_cast<std::size_t>(std::llround(c));
}

inline ClusterState lloyd(std::span<const Point> points, std::vector<Point> initial,
                         std::size_t max_iter, double tol) {
  ClusterState state;
  state.centroids = std::move(initial);

  state.assignment.assign(points.size(), 0);
  const auto assign = [&] {
    double loss = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j) {
      state.assignment[j] = nearest(points[j], state.centroids);
      loss += squared_distance(points[j], state.centroids[state.assignment[j]]);
    }
    if (!state.loss_history.empty()) {
      const double prev = state.loss_history.back();
      // Lloyd steps never increase the loss; allow rounding noise only.
      if (loss > prev + 1e-9 * (1.0 + prev)) {
        throw Error(concat("k-means loss increased from ", prev, " to ", loss));
      }
    }
    state.loss_history.push_back(loss);
  };

  for (std::size_t it = 0; it < max_iter; ++it) {
    assign();
    std::vector<Point> sums(state.centroids.size());
    std::vector<std::size_t> n(state.centroids.size(), 0);
    for (std::size_t j = 0; j < points.size(); ++j) {
      sums[state.assignment[j]].x += points[j].x;
      sums[state.assignment[j]].y += points[j].y;
      ++n[state.assignment[j]];
    }
    double movement = 0.0;
    for (std::size_t i = 0; i < state.centroids.size(); ++i) {
      if (n[i] == 0) continue;  // empty cluster keeps its centroid
      const Point next{sums[i].x / n[i], sums[i].y / n[i]};
      movement = std::max(movement, distance(next, state.centroids[i]));
      state.centroids[i] = next;
    }
    ++state.iterations;
    if (movement < tol) break;
  }
  assign();

  state.counts.assign(state.centroids.size(), 0);
  for (std::size_t a : state.assignment) ++state.counts[a];
  return state;
}

}  // namespace detail

inline constexpr std::size_t kSubsetSeedLimit = 64;

// Lloyd's algorithm, best of several initializations. When the points admit
// at most 64 distinct center subsets, every subset is tried. Otherwise
// `restarts` farthest-point seedings are tried: the first center is a point
// drawn from `seed`, each further center is the point farthest from the
// chosen ones (lowest index on ties). Each run stops once no centroid moves
// by `tol` or more, or after `max_iter` update steps. Ties between runs keep
// the earlier one.
inline ClusterState kmeans_cluster(std::span<const Point> points, std::size_t clusters,
                                   std::size_t max_iter, double tol, std::uint64_t seed,
                                   std::size_t restarts = 8) {
  detail::require(clusters >= 1, "cluster count must be positive");
  detail::require(!points.empty(), "cannot cluster an empty point set");
  detail::require(restarts >= 1, "need at least one restart");

  bool reduced = false;
  if (clusters > points.size()) {
    clusters = points.size();
    reduced = true;
  }

  ClusterState best;
  const auto consider = [&](std::vector<Point> initial) {
    ClusterState s = detail::lloyd(points, std::move(initial), max_iter, tol);
    if (best.loss_history.empty() || s.loss_history.back() < best.loss_history.back()) {
      best = std::move(s);
    }
  };

  if (detail::choose_capped(points.size(), clusters, kSubsetSeedLimit) <= kSubsetSeedLimit) {
    std::vector<std::size_t> idx(clusters);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      std::vector<Point> initial;
      for (std::size_t i : idx) initial.push_back(points[i]);
      consider(std::move(initial));
      std::size_t i = clusters;
      while (i > 0 && idx[i - 1] == points.size() - clusters + i - 1) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < clusters; ++j) idx[j] = idx[j - 1] + 1;
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
    for (std::size_t r = 0; r < restarts; ++r) {
      consider(detail::farthest_point_seeds(points, clusters, pick(rng)));
    }
  }
  best.reduced = reduced;
  return best;
}

// Sum of squared distances from each assigned point to its centroid.
inline double clustering_loss(std::span<const Point> points, const ClusterState& state) {
  double loss = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (state.assignment[j] == ClusterState::kUnassigned) continue;
    loss += squared_distance(points[j], state.centroids[state.assignment[j]]);
  }
  return loss;
}

// Drops clusters with fewer than `min_size` members; their points become
// unassigned. Cluster indices are compacted in their original order.
inline ClusterState filter_clusters(const ClusterState& state, std::size_t min_size) {
  detail::require(min_size >= 1, "min_size must be at least 1");
  ClusterState out;
  out.loss_history = state.loss_history;
  out.iterations = state.iterations;
  out.reduced = state.reduced;
  std::vector<std::size_t> remap(state.cluster_count(), ClusterState::kUnassigned);
  for (std::size_t i = 0; i < state.cluster_count(); ++i) {
    if (state.counts[i] < min_size) continue;
    remap[i] = out.centroids.size();
    out.centroids.push_back(state.centroids[i]);
    if (!state.previous_centroids.empty()) {
      out.previous_centroids.push_back(state.previous_centroids[i]);
    }
    out.counts.push_back(state.counts[i]);
  }
  out.assignment.reserve(state.assignment.size());
  for (std::size_t a : state.assignment) {
    out.assignment.push_back(a == ClusterState::kUnassigned ? a : remap[a]);
  }
  return out;
}

// True iff the centroid got strictly closer to the SBS since the previous
// slot. A centroid that already sat on the SBS cannot approach it.
inline bool approaching(const Point& centroid_now, const Point& centroid_prev,
                        const Point& sbs_pos) {
  const double before = distance(sbs_pos, centroid_prev);
  if (before == 0.0) return false;
  return distance(sbs_pos, centroid_now) / before < 1.0;
}

struct PedestrianStats {
  std::size_t transited{0};  // N(k): users currently in the cell
  std::size_t leavers{0};    // N^-(k): predicted departures, <= transited
};

struct UserMotion {
  Point now;
  Point prev;
};

// Users within `margin` of the cell boundary whose last displacement,
// repeated once, takes them out of the cell.
inline std::size_t predict_leavers(std::span<const UserMotion> users_in_cell, const Rect& cell,
                                   double margin) {
  detail::require(margin >= 0.0, "margin must be non-negative");
  std::size_t n = 0;
  for (const auto& u : users_in_cell) {
    if (cell.distance_to_edge(u.now) > margin) continue;
    const Point next{2.0 * u.now.x - u.prev.x, 2.0 * u.now.y - u.prev.y};
    if (!cell.contains(next)) ++n;
  }
  return n;
}

// psi* = sum of approaching cluster sizes + present - leaving, floored at 0.
inline double estimate_density(std::span<const std::size_t> approaching_counts,
                               const PedestrianStats& stats) {
  double incoming = 0.0;
  for (std::size_t c : approaching_counts) incoming += static_cast<double>(c);
  const double psi = incoming + static_cast<double>(stats.transited) -
                     static_cast<double>(stats.leavers);
  return std::max(0.0, psi);
}

// ---------------------------------------------------------------------------
// Per-cell estimator
// ---------------------------------------------------------------------------

enum class LeaverMode {
  kExtrapolate,  // one-step linear extrapolation of the last displacement
  kOracle,       // ground-truth next position (upper-bound experiments)
};

struct UserTrack {
  UserId user{0};
  Point now;
  std::optional<Point> prev;
  std::optional<Point> next;  // only read in LeaverMode::kOracle
};

struct DensityEstimatorConfig {
  double band_fraction{0.25};   // transition band width, fraction of the cell side
  std::size_t clusters{0};      // kappa; 0 means "number of neighbor cells"
  std::size_t min_cluster_size{2};
  std::size_t max_iter{100};
  double tol{1e-6};
  double leaver_margin{-1.0};   // < 0 means "band width"
  LeaverMode leaver_mode{LeaverMode::kExtrapolate};
  std::uint64_t seed{1};
};

struct CellDensityReport {
  std::size_t cell{0};
  double psi{0.0};
  PedestrianStats stats;
  std::vector<std::size_t> cluster_counts;      // kappa* filtered clusters
  std::vector<bool> cluster_approaching;
  std::vector<std::vector<UserId>> cluster_members;
  std::vector<Point> centroids;

  std::vector<std::size_t> approaching_counts() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cluster_counts.size(); ++i) {
      if (cluster_approaching[i]) out.push_back(cluster_counts[i]);
    }
    return out;
  }

  // Users predicted to arrive: members of approaching clusters.
  double incoming() const {
    double s = 0.0;
    for (std::size_t c : approaching_counts()) s += static_cast<double>(c);
    return s;
  }

  // Bracket on psi: nothing admitted vs every filtered cluster admitted.
  double lower_psi() const {
    return static_cast<double>(stats.transited) - static_cast<double>(stats.leavers);
  }
  double upper_psi() const {
    double s = lower_psi();
    for (std::size_t c : cluster_counts) s += static_cast<double>(c);
    return s;
  }
};

class DensityEstimator {
 public:
  DensityEstimator(const NetworkTopology& topology, DensityEstimatorConfig config)
      : topology_(&topology), config_(config) {
    detail::require(config_.band_fraction >= 0.0, "band fraction must be non-negative");
  }

  double band_width() const {
    return config_.band_fraction * std::min(topology_->cell_width(), topology_->cell_height());
  }

  const DensityEstimatorConfig& config() const { return config_; }

  CellDensityReport estimate(std::size_t cell, std::span<const UserTrack> users,
                             std::size_t slot) const {
    const NetworkTopology& topo = *topology_;
    const Rect rect = topo.cell_rect(cell);
    const double band = band_width();
    const double margin = config_.leaver_margin < 0.0 ? band : config_.leaver_margin;

    CellDensityReport report;
    report.cell = cell;

    std::vector<Point> candidates;
    std::vector<Point> candidates_prev;
    std::vector<UserId> candidate_ids;
    std::vector<UserMotion> present;
    std::size_t oracle_leavers = 0;
    for (const auto& u : users) {
      const std::size_t here = topo.assign_cell(u.now);
      if (here == cell) {
        present.push_back({u.now, u.prev.value_or(u.now)});
        if (config_.leaver_mode == LeaverMode::kOracle && u.next &&
            topo.assign_cell(*u.next) != cell) {
          ++oracle_leavers;
        }
      } else if (topo.are_neighbors(cell, here) && rect.distance_to(u.now) <= band) {
        candidates.push_back(u.now);
        candidates_prev.push_back(u.prev.value_or(u.now));
        candidate_ids.push_back(u.user);
      }
    }

    report.stats.transited = present.size();
    report.stats.leavers = config_.leaver_mode == LeaverMode::kOracle
                               ? oracle_leavers
                               : predict_leavers(present, rect, margin);

    if (!candidates.empty()) {
      const std::size_t kappa =
          config_.clusters > 0 ? config_.clusters : std::max<std::size_t>(1, topo.neighbors(cell).size());
      ClusterState state = kmeans_cluster(candidates, kappa, config_.max_iter, config_.tol,
                                          mix_seed(cell, slot));
      // Trajectory of each cluster: centroid of the same members one slot earlier.
      state.previous_centroids.assign(state.cluster_count(), Point{});
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        auto& pc = state.previous_centroids[state.assignment[j]];
        pc.x += candidates_prev[j].x;
        pc.y += candidates_prev[j].y;
      }
      for (std::size_t i = 0; i < state.cluster_count(); ++i) {
        if (state.counts[i] == 0) continue;
        state.previous_centroids[i].x /= static_cast<double>(state.counts[i]);
        state.previous_centroids[i].y /= static_cast<double>(state.counts[i]);
      }
      const ClusterState kept = filter_clusters(state, config_.min_cluster_size);
      report.cluster_counts = kept.counts;
      report.centroids = kept.centroids;
      report.cluster_members.resize(kept.cluster_count());
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        if (kept.assignment[j] != ClusterState::kUnassigned) {
          report.cluster_members[kept.assignment[j]].push_back(candidate_ids[j]);
        }
      }
      for (std::size_t i = 0; i < kept.cluster_count(); ++i) {
        report.cluster_approaching.push_back(
            approaching(kept.centroids[i], kept.previous_centroids[i], topo.sbs_position(cell)));
      }
    }

    const auto counts = report.approaching_counts();
    report.psi = estimate_density(counts, report.stats);
    return report;
  }

  std::vector<CellDensityReport> estimate_all(std::span<const UserTrack> users,
                                              std::size_t slot) const {
    std::vector<CellDensityReport> out;
    out.reserve(topology_->sbs_count());
    for (std::size_t k = 0; k < topology_->sbs_count(); ++k) out.push_back(estimate(k, users, slot));
    return out;
  }

 private:
  std::uint64_t mix_seed(std::size_t cell, std::size_t slot) const {
    // splitmix64 over (seed, cell, slot)
    std::uint64_t z = config_.seed + 0x9E3779B97F4A7C15ULL * (cell + 1) +
                      0xBF58476D1CE4E5B9ULL * (slot + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  const NetworkTopology* topology_;
  DensityEstimatorConfig config_;
};

// ---------------------------------------------------------------------------
// Shared pedestrian model
// ---------------------------------------------------------------------------

struct CentroidSet {
  std::vector<Point> centroids;
  std::vector<double> weights;  // member counts
};

// Merges per-SBS centroid sets into one: the largest set (first on ties) is
// the reference, every other centroid joins its nearest reference centroid,
// and each merged centroid is the member-weighted mean.
inline CentroidSet aggregate_centroids(std::span<const CentroidSet> sets) {
  const CentroidSet* ref = nullptr;
  for (const auto& s : sets) {
    detail::require(s.centroids.size() == s.weights.size(), "centroid/weight size mismatch");
    if (!s.centroids.empty() && (ref == nullptr || s.centroids.size() > ref->centroids.size())) {
      ref = &s;
    }
  }
  if (ref == nullptr) return {};
  const std::vector<Point> anchors = ref->centroids;
  std::vector<Point> sums(anchors.size());
  std::vector<double> mass(anchors.size(), 0.0);
  for (const auto& s : sets) {
    for (std::size_t i = 0; i < s.centroids.size(); ++i) {
      const std::size_t a = detail::nearest(s.centroids[i], anchors);
      sums[a].x += s.weights[i] * s.centroids[i].x;
      sums[a].y += s.weights[i] * s.centroids[i].y;
      mass[a] += s.weights[i];
    }
  }
  CentroidSet out;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    out.centroids.push_back(mass[a] > 0.0 ? Point{sums[a].x / mass[a], sums[a].y / mass[a]}
                                          : anchors[a]);
    out.weights.push_back(mass[a]);
  }
  return out;
}

}  // namespace mobcache
