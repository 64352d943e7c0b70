#pragma once

// Network cost model and cache placement policies.
//
// For a placement c, a density table lambda*[k][f] and cost constants:
//   d(k,f) = (alpha_M + alpha_Mk) if no SBS other than k caches f, else 0
//   J(k,f) = lambda*[k][f] * (c[k][f] * alpha_S + (1 - c[k][f]) * d(k,f))
//   D(c)   = sum c[k][f] * alpha_C * g_f + sum J(k,f)

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mobcache/core.hpp"

namespace mobcache {

using Rng = std::mt19937_64;

struct PlacementProblem {
  ContentCatalog catalog;
  CostParams costs;
  std::vector<double> capacities;  // per SBS
  DensityTable density;            // lambda*, SBS x file

  std::size_t sbs_count() const { return capacities.size(); }
  std::size_t file_count() const { return catalog.file_count(); }

  void validate() const {
    costs.validate();
    detail::require(!capacities.empty(), "problem needs at least one SBS");
    detail::require(density.rows() == capacities.size() && density.cols() == file_count(),
                    "density table shape does not match SBS x file");
    for (double c : capacities) detail::require(c >= 0.0, "capacities must be non-negative");
    for (double v : density.data()) {
      detail::require(std::isfinite(v) && v >= 0.0, "densities must be non-negative");
    }
  }

  CacheMatrix empty_cache() const { return CacheMatrix(catalog, capacities); }
};

struct PlacementResult {
  CacheMatrix cache;
  double cost{0.0};
  std::size_t iterations{0};
  std::string policy;
  std::vector<double> cost_trace;  // greedy: D before the first move, then after each move
};

// ---------------------------------------------------------------------------
// Cost terms
// ---------------------------------------------------------------------------

inline double worst_case_cost(const CacheMatrix& cache, std::size_t k, std::size_t f,
                              const CostParams& params) {
  for (std::size_t l = 0; l < cache.sbs_count(); ++l) {
    if (l != k && cache.cached(l, f)) return 0.0;
  }
  return params.worst_case();
}

inline double retrieval_cost(const CacheMatrix& cache, std::size_t k, std::size_t f, double psi,
                             double p, const CostParams& params) {
  detail::require(psi >= 0.0 && p >= 0.0, "densities must be non-negative");
  const double demand = psi * p;
  if (demand == 0.0) return 0.0;
  return cache.cached(k, f) ? demand * params.sbs_retrieval
                            : demand * worst_case_cost(cache, k, f, params);
}

inline double network_cost(const CacheMatrix& cache, const PlacementProblem& problem) {
  detail::require(cache.sbs_count() == problem.sbs_count() &&
                      cache.file_count() == problem.file_count(),
                  "cache shape does not match the problem");
  const CostParams& a = problem.costs;
  double total = 0.0;
  for (std::size_t f = 0; f < problem.file_count(); ++f) {
    const std::size_t copies = cache.copies(f);
    for (std::size_t k = 0; k < problem.sbs_count(); ++k) {
      const double lambda = problem.density(k, f);
      if (cache.cached(k, f)) {
        total += a.cache_cost * problem.catalog.size(f) + lambda * a.sbs_retrieval;
      } else if (copies == 0) {
        total += lambda * a.worst_case();
      }
    }
  }
  return total;
}

// Change in D from additionally caching f at k (c[k][f] must be 0).
inline double placement_delta(const CacheMatrix& cache, const PlacementProblem& problem,
                              std::size_t k, std::size_t f) {
  const CostParams& a = problem.costs;
  double delta = a.cache_cost * problem.catalog.size(f) + problem.density(k, f) * a.sbs_retrieval;
  if (cache.copies(f) == 0) delta -= a.worst_case() * problem.density.col_sum(f);
  return delta;
}

// ---------------------------------------------------------------------------
// Greedy placement
// ---------------------------------------------------------------------------

// Repeatedly caches the (SBS, file) pair whose placement yields the lowest
// network cost, as long as that strictly lowers the cost. A pair leaves the
// candidate set once placed or once its SBS can no longer fit the file.
// Ties go to the lowest (k, f).
inline PlacementResult greedy_place(const PlacementProblem& problem) {
  problem.validate();
  const std::size_t K = problem.sbs_count();
  const std::size_t M = problem.file_count();
  PlacementResult result{problem.empty_cache(), 0.0, 0, "greedy", {}};
  CacheMatrix& cache = result.cache;

  std::vector<std::uint8_t> candidate(K * M, 0);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t f = 0; f < M; ++f) candidate[k * M + f] = cache.fits(k, f);
  }
  std::vector<std::size_t> copies(M, 0);
  std::vector<double> column(M);
  for (std::size_t f = 0; f < M; ++f) column[f] = problem.density.col_sum(f);

  const CostParams& a = problem.costs;
  double cost = network_cost(cache, problem);
  result.cost_trace.push_back(cost);

  while (true) {
    double best = 0.0;
    std::size_t best_k = K;
    std::size_t best_f = M;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t f = 0; f < M; ++f) {
        if (!candidate[k * M + f]) continue;
        double delta = a.cache_cost * problem.catalog.size(f) + problem.density(k, f) * a.sbs_retrieval;
        if (copies[f] == 0) delta -= a.worst_case() * column[f];
        if (delta < best) {
          best = delta;
          best_k = k;
          best_f = f;
        }
      }
    }
    if (best_k == K) break;  // no strictly improving pair left

    cache.set(best_k, best_f);
    ++copies[best_f];
    cost += best;
    result.cost_trace.push_back(cost);
    ++result.iterations;
    candidate[best_k * M + best_f] = 0;
    for (std::size_t f = 0; f < M; ++f) {
      if (candidate[best_k * M + f] && !cache.fits(best_k, f)) candidate[best_k * M + f] = 0;
    }
  }
  result.cost = network_cost(cache, problem);
  return result;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle
// ---------------------------------------------------------------------------

inline constexpr std::size_t kExhaustiveLimit = 20;  // max K * M

// Enumerates every binary placement. Among minimizers prefers the fewest
// cached files, then the lexicographically smallest row-major matrix.
inline PlacementResult exhaustive_place(const PlacementProblem& problem) {
  problem.validate();
  const std::size_t K = problem.sbs_count();
  const std::size_t M = problem.file_count();
  const std::size_t n = K * M;
  if (n > kExhaustiveLimit) {
    throw SizeGuardError(detail::concat("exhaustive search limited to K*M <= ", kExhaustiveLimit,
                                        ", got ", n));
  }
  const CostParams& a = problem.costs;

  std::vector<double> cache_term(n);
  std::vector<double> served(n);
  std::vector<double> worst(n);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t f = 0; f < M; ++f) {
      cache_term[k * M + f] = a.cache_cost * problem.catalog.size(f);
      served[k * M + f] = problem.density(k, f) * a.sbs_retrieval;
      worst[k * M + f] = problem.density(k, f) * a.worst_case();
    }
  }

  const std::uint64_t total = std::uint64_t{1} << n;
  std::uint64_t best_mask = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  const auto prefer = [](std::uint64_t cand, std::uint64_t incumbent) {
    const int pc = std::popcount(cand);
    const int pi = std::popcount(incumbent);
    if (pc != pi) return pc < pi;
    const std::uint64_t diff = cand ^ incumbent;
    if (diff == 0) return false;
    return (cand & (diff & (~diff + 1))) == 0;  // first differing entry is 0 in cand
  };

  for (std::uint64_t mask = 0; mask < total; ++mask) {
    bool feasible = true;
    for (std::size_t k = 0; k < K && feasible; ++k) {
      double used = 0.0;
      for (std::size_t f = 0; f < M; ++f) {
        if (mask >> (k * M + f) & 1U) used += problem.catalog.size(f);
      }
      feasible = used <= problem.capacities[k] + 1e-9;
    }
    if (!feasible) continue;
    double cost = 0.0;
    for (std::size_t f = 0; f < M; ++f) {
      bool any = false;
      for (std::size_t k = 0; k < K; ++k) any = any || (mask >> (k * M + f) & 1U);
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t i = k * M + f;
        if (mask >> i & 1U) {
          cost += cache_term[i] + served[i];
        } else if (!any) {
          cost += worst[i];
        }
      }
    }
    const double tol = 1e-9 * (1.0 + std::abs(best_cost));
    if (!std::isfinite(best_cost) || cost < best_cost - tol ||
        (std::abs(cost - best_cost) <= tol && prefer(mask, best_mask))) {
      best_cost = cost;
      best_mask = mask;
    }
  }

  PlacementResult result{problem.empty_cache(), 0.0, 0, "oracle", {}};
  for (std::size_t i = 0; i < n; ++i) {
    if (best_mask >> i & 1U) result.cache.set(i / M, i % M);
  }
  result.cost = network_cost(result.cache, problem);
  result.iterations = static_cast<std::size_t>(total);
  return result;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

namespace detail {

// Indices of `values` ordered by decreasing value, lowest index on ties.
inline std::vector<std::size_t> rank_desc(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return idx;
}

inline std::vector<double> row_of(const DensityTable& t, std::size_t k) {
  return {t.data().begin() + k * t.cols(), t.data().begin() + (k + 1) * t.cols()};
}

// Uniform random m-subset of {0..n-1} by a partial Fisher-Yates shuffle.
inline std::vector<std::size_t> random_subset(std::size_t n, std::size_t m, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  m = std::min(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(m);
  return idx;
}

inline PlacementResult finish(const PlacementProblem& problem, CacheMatrix cache,
                              std::string policy) {
  const double cost = network_cost(cache, problem);
  return {std::move(cache), cost, 0, std::move(policy), {}};
}

}  // namespace detail

struct EpsilonGreedyPlacement {
  PlacementResult result;
  std::vector<bool> explored;  // per SBS: random subset this period
};

// Per SBS: with probability epsilon a uniformly random m-subset, otherwise
// the m files with the highest estimates (row k of `estimates`).
inline EpsilonGreedyPlacement epsilon_greedy_place(const PlacementProblem& problem,
                                                   const DensityTable& estimates, std::size_t m,
                                                   double epsilon, Rng& rng) {
  problem.validate();
  detail::require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
  detail::require(estimates.rows() == problem.sbs_count() &&
                      estimates.cols() == problem.file_count(),
                  "estimate table shape mismatch");
  const std::size_t M = problem.file_count();
  m = std::min(m, M);
  CacheMatrix cache = problem.empty_cache();
  std::vector<bool> explored(problem.sbs_count(), false);
  std::bernoulli_distribution coin(epsilon);
  for (std::size_t k = 0; k < problem.sbs_count(); ++k) {
    explored[k] = coin(rng);
    std::vector<std::size_t> files;
    if (explored[k]) {
      files = detail::random_subset(M, m, rng);
    } else {
      files = detail::rank_desc(detail::row_of(estimates, k));
      files.resize(m);
    }
    for (std::size_t f : files) cache.set(k, f);
  }
  return {detail::finish(problem, std::move(cache), "egreedy"), std::move(explored)};
}

// Per SBS: files in uniformly random order, each cached if it still fits.
inline PlacementResult random_place(const PlacementProblem& problem, Rng& rng) {
  problem.validate();
  CacheMatrix cache = problem.empty_cache();
  for (std::size_t k = 0; k < problem.sbs_count(); ++k) {
    for (std::size_t f : detail::random_subset(problem.file_count(), problem.file_count(), rng)) {
      cache.try_set(k, f);
    }
  }
  return detail::finish(problem, std::move(cache), "random");
}

// Placement computed on the true densities of the evaluated period: the
// exhaustive oracle within its size guard, greedy beyond it.
inline PlacementResult full_info_place(const PlacementProblem& true_problem) {
  PlacementResult r = true_problem.sbs_count() * true_problem.file_count() <= kExhaustiveLimit
                          ? exhaustive_place(true_problem)
                          : greedy_place(true_problem);
  r.policy = "fullinfo";
  return r;
}

// Each SBS independently caches its locally most requested files (only files
// with a positive estimate), ignoring every other SBS.
inline PlacementResult local_caching_place(const PlacementProblem& problem,
                                           const DensityTable& local_estimates) {
  problem.validate();
  detail::require(local_estimates.rows() == problem.sbs_count() &&
                      local_estimates.cols() == problem.file_count(),
                  "estimate table shape mismatch");
  CacheMatrix cache = problem.empty_cache();
  for (std::size_t k = 0; k < problem.sbs_count(); ++k) {
    const auto row = detail::row_of(local_estimates, k);
    for (std::size_t f : detail::rank_desc(row)) {
      if (row[f] <= 0.0) break;
      cache.try_set(k, f);
    }
  }
  return detail::finish(problem, std::move(cache), "local");
}

}  // namespace mobcache
