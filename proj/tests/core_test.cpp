#include <gtest/gtest.h>

#include <random>

#include "mobcache/core.hpp"

using namespace mobcache;

namespace {

NetworkTopology grid2x2() { return NetworkTopology::grid(2, 2, Rect{0, 0, 1000, 1000}); }

}  // namespace

TEST(Topology, CellCentersAndIndexing) {
  const auto t = NetworkTopology::grid(3, 2, Rect{0, 0, 300, 200});
  ASSERT_EQ(t.sbs_count(), 6u);
  EXPECT_DOUBLE_EQ(t.sbs_position(0).x, 50);
  EXPECT_DOUBLE_EQ(t.sbs_position(0).y, 50);
  EXPECT_DOUBLE_EQ(t.sbs_position(5).x, 250);
  EXPECT_DOUBLE_EQ(t.sbs_position(5).y, 150);
  EXPECT_EQ(t.coords(4), (std::pair<std::size_t, std::size_t>{1, 1}));
}

TEST(Topology, Grid8Neighbors) {
  const auto t = NetworkTopology::grid(3, 3, Rect{0, 0, 3, 3});
  EXPECT_EQ(t.neighbors(4).size(), 8u);
  EXPECT_EQ(t.neighbors(0), (std::vector<std::size_t>{1, 3, 4}));
  EXPECT_TRUE(t.are_neighbors(0, 4));
  EXPECT_FALSE(t.are_neighbors(0, 8));
  for (std::size_t k = 0; k < 9; ++k) {
    EXPECT_FALSE(t.are_neighbors(k, k));
    for (std::size_t l : t.neighbors(k)) EXPECT_TRUE(t.are_neighbors(l, k));
  }
}

TEST(Topology, FullModeConnectsEverything) {
  const auto t = NetworkTopology::grid(3, 3, Rect{0, 0, 3, 3}, NeighborMode::kFull);
  for (std::size_t k = 0; k < 9; ++k) EXPECT_EQ(t.neighbors(k).size(), 8u);
}

TEST(Topology, AssignCellBoundaries) {
  const auto t = grid2x2();
  EXPECT_EQ(t.assign_cell({0, 0}), 0u);
  EXPECT_EQ(t.assign_cell({1000, 1000}), 3u);
  EXPECT_EQ(t.assign_cell({500, 500}), 0u);  // interior lines go to the lower index
  EXPECT_EQ(t.assign_cell({500.001, 499.999}), 1u);
  EXPECT_EQ(t.assign_cell({10, 700}), 2u);
  EXPECT_THROW(t.assign_cell({-0.1, 10}), OutOfRegionError);
  EXPECT_THROW(t.assign_cell({10, 1000.5}), OutOfRegionError);
}

TEST(Topology, AssignedCellContainsPoint) {
  const auto t = NetworkTopology::grid(4, 3, Rect{-50, 20, 350, 320});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(-50, 350), uy(20, 320);
  for (int i = 0; i < 2000; ++i) {
    const Point p{ux(rng), uy(rng)};
    EXPECT_TRUE(t.cell_rect(t.assign_cell(p)).contains(p));
  }
}

TEST(Topology, RejectsDegenerateGrid) {
  EXPECT_THROW(NetworkTopology::grid(0, 2, Rect{0, 0, 1, 1}), ContractError);
  EXPECT_THROW(NetworkTopology::grid(2, 2, Rect{0, 0, 0, 1}), ContractError);
}

TEST(Rect, DistanceHelpers) {
  const Rect r{0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(r.distance_to({5, 5}), 0.0);
  EXPECT_DOUBLE_EQ(r.distance_to({13, 14}), 5.0);
  EXPECT_DOUBLE_EQ(r.distance_to_edge({2, 7}), 2.0);
}

TEST(Catalog, SizesValidated) {
  EXPECT_THROW(ContentCatalog(std::vector<double>{1.0, 0.0}), ContractError);
  EXPECT_THROW(ContentCatalog(std::size_t{0}), ContractError);
  ContentCatalog c(std::vector<double>{1.0, 2.5});
  EXPECT_DOUBLE_EQ(c.size(1), 2.5);
}

TEST(CacheMatrix, CapacityIsEnforced) {
  const ContentCatalog cat(std::vector<double>{1.0, 2.0, 1.5});
  CacheMatrix c(cat, {3.0, 0.0});
  c.set(0, 0);
  c.set(0, 1);
  EXPECT_FALSE(c.fits(0, 2));
  EXPECT_THROW(c.set(0, 2), CapacityError);
  EXPECT_FALSE(c.try_set(1, 0));
  EXPECT_DOUBLE_EQ(c.used(0), 3.0);
  EXPECT_DOUBLE_EQ(occupancy(c, cat, 0), 3.0);
  EXPECT_TRUE(c.satisfies_constraints());
  c.clear(0, 1);
  EXPECT_TRUE(c.try_set(0, 2));
  EXPECT_EQ(c.copies(0), 1u);
  EXPECT_EQ(c.files_at(0), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(c.cached_count(), 2u);
}

TEST(CacheMatrix, RandomMutationsStayFeasible) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> size(0.2, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> sizes(8);
    for (auto& s : sizes) s = size(rng);
    const ContentCatalog cat(sizes);
    CacheMatrix c(cat, {4.0, 2.0, 6.0});
    std::uniform_int_distribution<std::size_t> k(0, 2), f(0, 7);
    std::bernoulli_distribution add(0.7);
    for (int step = 0; step < 100; ++step) {
      if (add(rng)) c.try_set(k(rng), f(rng));
      else c.clear(k(rng), f(rng));
      ASSERT_TRUE(c.satisfies_constraints());
      for (std::size_t s = 0; s < 3; ++s) {
        ASSERT_NEAR(c.used(s), occupancy(c, cat, s), 1e-9);
        ASSERT_LE(c.used(s), c.capacity(s) + 1e-9);
      }
    }
  }
}

TEST(CacheMatrix, RejectsBadShapes) {
  const ContentCatalog cat(3);
  EXPECT_THROW(CacheMatrix(cat, {}), ContractError);
  EXPECT_THROW(CacheMatrix(cat, {-1.0}), ContractError);
  CacheMatrix c(cat, {1.0});
  EXPECT_THROW(c.cached(1, 0), ContractError);
  EXPECT_THROW(c.cached(0, 3), ContractError);
}

TEST(CostParams, Defaults) {
  const CostParams p;
  EXPECT_DOUBLE_EQ(p.worst_case(), 383.0);
  CostParams bad;
  bad.sbs_retrieval = -1;
  EXPECT_THROW(bad.validate(), ContractError);
}

TEST(DensityTable, Sums) {
  DensityTable t(2, 3);
  t(0, 0) = 1;
  t(0, 2) = 2;
  t(1, 2) = 4;
  EXPECT_DOUBLE_EQ(t.row_sum(0), 3);
  EXPECT_DOUBLE_EQ(t.col_sum(2), 6);
}
