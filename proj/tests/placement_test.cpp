#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "mobcache/instance_io.hpp"
#include "mobcache/placement.hpp"

using namespace mobcache;

namespace {

PlacementProblem single_file(double psi) {
  DensityTable d(1, 1);
  d(0, 0) = psi;
  return {ContentCatalog(1), CostParams{}, {1.0}, d};
}

PlacementProblem random_problem(std::size_t K, std::size_t M, double cap, std::mt19937_64& rng,
                                double scale = 1.0) {
  std::uniform_real_distribution<double> u(0.0, scale);
  DensityTable d(K, M);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t f = 0; f < M; ++f) d(k, f) = u(rng);
  }
  return {ContentCatalog(M), CostParams{}, std::vector<double>(K, cap), d};
}

// Direct evaluation of the objective from its per-term definition.
double reference_cost(const CacheMatrix& c, const PlacementProblem& p) {
  const CostParams& a = p.costs;
  double total = 0.0;
  for (std::size_t k = 0; k < p.sbs_count(); ++k) {
    for (std::size_t f = 0; f < p.file_count(); ++f) {
      double others_missing = 1.0;
      for (std::size_t l = 0; l < p.sbs_count(); ++l) {
        if (l != k) others_missing *= 1.0 - (c.cached(l, f) ? 1.0 : 0.0);
      }
      const double d = (a.mbs_base + a.mbs_link) * others_missing;
      const double ckf = c.cached(k, f) ? 1.0 : 0.0;
      total += ckf * a.cache_cost * p.catalog.size(f);
      total += p.density(k, f) * (ckf * a.sbs_retrieval + (1.0 - ckf) * d);
    }
  }
  return total;
}

bool locally_optimal(const PlacementResult& r, const PlacementProblem& p) {
  for (std::size_t k = 0; k < p.sbs_count(); ++k) {
    for (std::size_t f = 0; f < p.file_count(); ++f) {
      CacheMatrix c = r.cache;
      if (c.cached(k, f)) {
        c.clear(k, f);
      } else if (!c.try_set(k, f)) {
        continue;
      }
      if (network_cost(c, p) < r.cost - 1e-9) return false;
    }
  }
  return true;
}

}  // namespace

TEST(Cost, HandComputedSingleFile) {
  const auto p = single_file(2.0);
  CacheMatrix c = p.empty_cache();
  EXPECT_DOUBLE_EQ(network_cost(c, p), 766.0);
  c.set(0, 0);
  EXPECT_DOUBLE_EQ(network_cost(c, p), 361.5);
  EXPECT_DOUBLE_EQ(retrieval_cost(c, 0, 0, 2.0, 1.0, p.costs), 360.0);
}

TEST(Cost, WorstCaseTerm) {
  const ContentCatalog cat(2);
  CacheMatrix c(cat, {2, 2});
  const CostParams a;
  EXPECT_DOUBLE_EQ(worst_case_cost(c, 0, 0, a), 383.0);
  c.set(1, 0);
  EXPECT_DOUBLE_EQ(worst_case_cost(c, 0, 0, a), 0.0);
  EXPECT_DOUBLE_EQ(retrieval_cost(c, 0, 0, 3.0, 0.5, a), 0.0);
  EXPECT_DOUBLE_EQ(retrieval_cost(c, 0, 1, 0.0, 0.5, a), 0.0);
  CacheMatrix solo(ContentCatalog(1), {1});
  EXPECT_DOUBLE_EQ(worst_case_cost(solo, 0, 0, a), 383.0);
}

TEST(Cost, MatchesReferenceAndDelta) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = random_problem(3, 5, 3, rng);
    CacheMatrix c = p.empty_cache();
    std::bernoulli_distribution coin(0.3);
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t f = 0; f < 5; ++f) {
        if (coin(rng)) c.try_set(k, f);
      }
    }
    const double base = network_cost(c, p);
    ASSERT_NEAR(base, reference_cost(c, p), 1e-9);
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t f = 0; f < 5; ++f) {
        if (c.cached(k, f) || !c.fits(k, f)) continue;
        CacheMatrix next = c;
        next.set(k, f);
        ASSERT_NEAR(network_cost(next, p) - base, placement_delta(c, p, k, f), 1e-9);
      }
    }
  }
}

TEST(Cost, UnrequestedFileCostsCacheFee) {
  DensityTable d(2, 2);
  d(0, 0) = 1.0;
  const PlacementProblem p{ContentCatalog(std::vector<double>{1.0, 2.0}), CostParams{}, {3, 3}, d};
  CacheMatrix c = p.empty_cache();
  const double before = network_cost(c, p);
  c.set(1, 1);
  EXPECT_DOUBLE_EQ(network_cost(c, p) - before, 1.5 * 2.0);
  EXPECT_DOUBLE_EQ(network_cost(p.empty_cache(), PlacementProblem{p.catalog, p.costs, p.capacities,
                                                                   DensityTable(2, 2)}),
                   0.0);
}

TEST(Greedy, SingleFileIsCached) {
  const auto r = greedy_place(single_file(2.0));
  EXPECT_TRUE(r.cache.cached(0, 0));
  EXPECT_DOUBLE_EQ(r.cost, 361.5);
  const auto o = exhaustive_place(single_file(2.0));
  EXPECT_TRUE(o.cache.cached(0, 0));
  EXPECT_DOUBLE_EQ(o.cost, 361.5);
}

TEST(Greedy, ZeroDemandPlacesNothing) {
  PlacementProblem p{ContentCatalog(4), CostParams{}, {2, 2}, DensityTable(2, 4)};
  const auto r = greedy_place(p);
  EXPECT_EQ(r.cache.cached_count(), 0u);
  EXPECT_DOUBLE_EQ(r.cost, 0.0);
  EXPECT_EQ(exhaustive_place(p).cache.cached_count(), 0u);
}

TEST(Greedy, OracleBoundAndLocalOptimality) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_problem(2, 4, 1, rng);
    const auto g = greedy_place(p);
    const auto o = exhaustive_place(p);
    EXPECT_GE(g.cost, o.cost - 1e-9);
    EXPECT_TRUE(locally_optimal(g, p)) << "trial " << trial;
    EXPECT_NEAR(g.cost, network_cost(g.cache, p), 1e-9);
  }
}

TEST(Greedy, CostTraceTelescopesAndDecreases) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_problem(4, 12, 3, rng, 0.2);
    const auto g = greedy_place(p);
    ASSERT_EQ(g.cost_trace.size(), g.iterations + 1);
    EXPECT_NEAR(g.cost_trace.front(), network_cost(p.empty_cache(), p), 1e-9);
    EXPECT_NEAR(g.cost_trace.back(), g.cost, 1e-9);
    for (std::size_t i = 1; i < g.cost_trace.size(); ++i) {
      EXPECT_LT(g.cost_trace[i], g.cost_trace[i - 1]);
    }
    EXPECT_TRUE(g.cache.satisfies_constraints());
  }
}

TEST(Greedy, NeverDuplicatesAFile) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_problem(4, 10, 4, rng);
    const auto g = greedy_place(p);
    for (std::size_t f = 0; f < 10; ++f) EXPECT_LE(g.cache.copies(f), 1u);
  }
}

TEST(Greedy, RespectsFileSizes) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> size(0.5, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> sizes(6);
    for (auto& s : sizes) s = size(rng);
    auto p = random_problem(2, 6, 3.5, rng);
    p.catalog = ContentCatalog(sizes);
    const auto g = greedy_place(p);
    EXPECT_TRUE(g.cache.satisfies_constraints());
    EXPECT_GE(g.cost, exhaustive_place(p).cost - 1e-9);
  }
}

TEST(Greedy, ZeroCapacity) {
  std::mt19937_64 rng(6);
  const auto p = random_problem(2, 3, 0, rng);
  EXPECT_EQ(greedy_place(p).cache.cached_count(), 0u);
}

TEST(Exhaustive, SizeGuard) {
  std::mt19937_64 rng(7);
  EXPECT_THROW(exhaustive_place(random_problem(3, 7, 2, rng)), SizeGuardError);
  EXPECT_NO_THROW(exhaustive_place(random_problem(4, 5, 1, rng)));
}

TEST(Exhaustive, IsMinimumOverFeasibleSet) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_problem(2, 3, 2, rng);
    const auto o = exhaustive_place(p);
    // Brute force over the 64 binary matrices, feasible ones only.
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < 64; ++mask) {
      CacheMatrix c = p.empty_cache();
      bool ok = true;
      for (int i = 0; i < 6 && ok; ++i) {
        if (mask >> i & 1) ok = c.try_set(i / 3, i % 3);
      }
      if (ok) best = std::min(best, reference_cost(c, p));
    }
    EXPECT_NEAR(o.cost, best, 1e-9);
  }
}

TEST(EpsilonGreedy, ExploitsTopM) {
  DensityTable est(1, 3);
  est(0, 0) = 5;
  est(0, 1) = 1;
  est(0, 2) = 3;
  PlacementProblem p{ContentCatalog(3), CostParams{}, {2}, DensityTable(1, 3)};
  Rng rng(1);
  const auto r = epsilon_greedy_place(p, est, 2, 0.0, rng);
  EXPECT_EQ(r.result.cache.files_at(0), (std::vector<std::size_t>{0, 2}));
  EXPECT_FALSE(r.explored[0]);
}

TEST(EpsilonGreedy, PureExplorationIsUniform) {
  PlacementProblem p{ContentCatalog(4), CostParams{}, {2}, DensityTable(1, 4)};
  DensityTable est(1, 4);
  Rng rng(2);
  std::map<std::vector<std::size_t>, int> freq;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++freq[epsilon_greedy_place(p, est, 2, 1.0, rng).result.cache.files_at(0)];
  ASSERT_EQ(freq.size(), 6u);
  double chi2 = 0.0;
  const double expected = draws / 6.0;
  for (const auto& [subset, n] : freq) chi2 += (n - expected) * (n - expected) / expected;
  EXPECT_LT(chi2, 15.09);  // chi-square, 5 dof, p = 0.01
}

TEST(EpsilonGreedy, ExplorationFrequency) {
  PlacementProblem p{ContentCatalog(4), CostParams{}, {2}, DensityTable(1, 4)};
  DensityTable est(1, 4);
  Rng rng(3);
  int explored = 0;
  for (int i = 0; i < 10000; ++i) explored += epsilon_greedy_place(p, est, 2, 0.3, rng).explored[0];
  EXPECT_NEAR(explored / 10000.0, 0.3, 0.05);
}

TEST(EpsilonGreedy, RejectsOversizedM) {
  PlacementProblem p{ContentCatalog(4), CostParams{}, {1}, DensityTable(1, 4)};
  Rng rng(4);
  EXPECT_THROW(epsilon_greedy_place(p, DensityTable(1, 4), 2, 0.0, rng), CapacityError);
}

TEST(Random, CoversCatalogWhenItFits) {
  PlacementProblem p{ContentCatalog(5), CostParams{}, {10, 0}, DensityTable(2, 5)};
  Rng a(9), b(9);
  const auto r = random_place(p, a);
  EXPECT_EQ(r.cache.files_at(0).size(), 5u);
  EXPECT_EQ(r.cache.files_at(1).size(), 0u);
  EXPECT_EQ(r.cache, random_place(p, b).cache);
}

TEST(Random, AverageCostWorseThanGreedy) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_problem(3, 10, 2, rng);
    Rng r(trial);
    double mean = 0.0;
    for (int i = 0; i < 50; ++i) mean += random_place(p, r).cost / 50.0;
    EXPECT_LT(greedy_place(p).cost, mean);
  }
}

TEST(FullInfo, EqualsOracleWithinGuard) {
  std::mt19937_64 rng(11);
  const auto p = random_problem(2, 4, 2, rng);
  const auto f = full_info_place(p);
  EXPECT_EQ(f.cache, exhaustive_place(p).cache);
  EXPECT_EQ(f.policy, "fullinfo");
}

TEST(LocalCaching, DuplicatesIdenticalEstimates) {
  DensityTable est(3, 5);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t f = 0; f < 5; ++f) est(k, f) = 5.0 - f;
  }
  PlacementProblem p{ContentCatalog(5), CostParams{}, {2, 2, 2}, est};
  const auto r = local_caching_place(p, est);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(r.cache.files_at(k), (std::vector<std::size_t>{0, 1}));
  PlacementProblem zero{ContentCatalog(5), CostParams{}, {0, 0, 0}, est};
  EXPECT_EQ(local_caching_place(zero, est).cache.cached_count(), 0u);
}

TEST(LocalCaching, SingleSbsMatchesGreedy) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_problem(1, 8, 3, rng, 5.0);
    // Demands large enough that every top file is worth caching.
    for (std::size_t f = 0; f < 8; ++f) p.density(0, f) += 0.1;
    EXPECT_EQ(local_caching_place(p, p.density).cache, greedy_place(p).cache) << "trial " << trial;
  }
}

TEST(InstanceIo, RoundTrip) {
  std::mt19937_64 rng(13);
  const auto p = random_problem(3, 4, 2, rng);
  std::stringstream ss;
  write_instance(ss, p);
  const auto q = read_instance(ss);
  EXPECT_EQ(q.density.data(), p.density.data());
  EXPECT_EQ(q.capacities, p.capacities);
  EXPECT_EQ(greedy_place(q).cache, greedy_place(p).cache);
}

TEST(InstanceIo, Errors) {
  std::stringstream missing("files 2\ndensity\n1 2\n");
  EXPECT_THROW(read_instance(missing), ConfigError);
  std::stringstream shape("sbs 1\nfiles 2\ncapacities 1\ndensity\n1 2 3\n");
  EXPECT_THROW(read_instance(shape), ConfigError);
  std::stringstream key("sbs 1\nfiles 1\nbogus 3\n");
  EXPECT_THROW(read_instance(key), ConfigError);
  std::stringstream negative("sbs 1\nfiles 1\ncapacities 1\ndensity\n-1\n");
  EXPECT_THROW(read_instance(negative), ConfigError);
}
