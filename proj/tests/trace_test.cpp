#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "mobcache/mobility.hpp"
#include "mobcache/trace.hpp"

using namespace mobcache;

namespace {

TraceConfig small_config(std::size_t slots) {
  TraceConfig c;
  c.slots = slots;
  c.slots_per_aggregation = 1;
  return c;
}

}  // namespace

TEST(LoadRequests, QuantileSlots) {
  std::stringstream in("1::10::5::100\n2::20::3::900000\n");
  const auto t = load_requests(in, small_config(2));
  ASSERT_EQ(t.events.size(), 2u);
  EXPECT_EQ(t.events[0].slot, 0u);
  EXPECT_EQ(t.events[1].slot, 1u);
  EXPECT_EQ(t.file_count(), 2u);
  EXPECT_EQ(t.item_ids, (std::vector<std::int64_t>{10, 20}));
}

TEST(LoadRequests, EqualCountBins) {
  std::stringstream in;
  for (int i = 0; i < 100; ++i) in << (i % 7) << "::" << (i % 5) << "::3::" << i * i << '\n';
  const auto t = load_requests(in, small_config(10));
  std::vector<int> per_slot(10, 0);
  for (const auto& e : t.events) ++per_slot[e.slot];
  for (int n : per_slot) EXPECT_EQ(n, 10);
  for (std::size_t i = 1; i < t.events.size(); ++i) EXPECT_LE(t.events[i - 1].slot, t.events[i].slot);
}

TEST(LoadRequests, CustomDelimiterAndMalformedLines) {
  std::stringstream in("1,4,5,10\nbroken\n2,4,1,20\n3,x,1,30\n");
  auto cfg = small_config(2);
  cfg.delimiter = ",";
  const auto t = load_requests(in, cfg);
  EXPECT_EQ(t.records, 2u);
  EXPECT_EQ(t.skipped, 2u);
  EXPECT_EQ(t.skipped_lines, (std::vector<std::size_t>{2, 4}));
}

TEST(LoadRequests, EmptyInputIsTraceError) {
  std::stringstream in("garbage\n");
  EXPECT_THROW(load_requests(in, small_config(2)), TraceError);
  EXPECT_THROW(load_requests(std::string("/nonexistent/ratings.dat"), small_config(2)), TraceError);
}

TEST(LoadRequests, TopFilters) {
  std::stringstream in;
  // item 7 is requested most, user 3 is most active
  int ts = 0;
  for (int i = 0; i < 10; ++i) in << "3::7::4::" << ts++ << '\n';
  for (int i = 0; i < 3; ++i) in << "1::8::4::" << ts++ << '\n';
  in << "2::9::4::" << ts++ << '\n';
  auto cfg = small_config(2);
  cfg.top_files = 2;
  cfg.top_users = 1;
  const auto t = load_requests(in, cfg);
  for (const auto& e : t.events) EXPECT_EQ(e.user, 3);
  EXPECT_LE(t.file_count(), 2u);
}

TEST(LoadRequests, Deterministic) {
  SyntheticRatingsConfig sc;
  sc.users = 50;
  sc.items = 30;
  sc.ratings = 2000;
  std::stringstream a, b;
  synth_ratings(a, sc);
  synth_ratings(b, sc);
  EXPECT_EQ(a.str(), b.str());
  const auto ta = load_requests(a, small_config(20));
  const auto tb = load_requests(b, small_config(20));
  EXPECT_EQ(ta.events, tb.events);
}

TEST(SynthMobility, StaysInRegion) {
  const auto topo = NetworkTopology::grid(2, 2, Rect{0, 0, 1000, 1000});
  std::vector<UserId> users(40);
  std::iota(users.begin(), users.end(), 1);
  TraceConfig cfg = small_config(200);
  const auto m = synth_mobility(cfg, topo, users, 0.05, 40.0);
  for (const auto& s : m.samples) EXPECT_TRUE(topo.region().contains(s.position));
  EXPECT_EQ(m.events.size(), 10u);
}

TEST(SynthMobility, FrozenWhenStepIsZero) {
  const auto topo = NetworkTopology::grid(2, 2, Rect{0, 0, 1000, 1000});
  std::vector<UserId> users{1, 2, 3};
  const auto m = synth_mobility(small_config(20), topo, users, 0.0, 0.0);
  std::map<UserId, Point> first;
  for (const auto& s : m.samples) {
    auto [it, fresh] = first.try_emplace(s.user, s.position);
    if (!fresh) {
      EXPECT_EQ(it->second, s.position);
    }
  }
  EXPECT_TRUE(m.events.empty());
}

TEST(SynthMobility, ClusterEventIsDetectedBeforeArrival) {
  const auto topo = NetworkTopology::grid(2, 2, Rect{0, 0, 1000, 1000});
  std::vector<UserId> users{1, 2};
  TraceConfig cfg = small_config(30);
  cfg.seed = 3;
  const auto m = synth_mobility(cfg, topo, users, 1.0 / 20.0, 20.0);
  ASSERT_EQ(m.events.size(), 1u);  // spawns at slots 10, 30, ...
  const auto& ev = m.events.front();
  ASSERT_LT(ev.arrival_slot, cfg.slots);
  EXPECT_TRUE(topo.are_neighbors(ev.source, ev.target));

  const DensityEstimator est(topo, {});
  std::map<std::size_t, std::map<UserId, Point>> pos;
  for (const auto& s : m.samples) pos[s.slot][s.user] = s.position;
  const auto tracks_at = [&](std::size_t slot) {
    std::vector<UserTrack> out;
    for (const auto& [u, p] : pos[slot]) {
      UserTrack t{u, p, std::nullopt, std::nullopt};
      if (slot > 0 && pos[slot - 1].count(u)) t.prev = pos[slot - 1][u];
      out.push_back(t);
    }
    return out;
  };
  bool detected = false;
  for (std::size_t s = ev.spawn_slot + 1; s < ev.arrival_slot; ++s) {
    const auto r = est.estimate(ev.target, tracks_at(s), s);
    detected = detected || r.incoming() >= 2.0;
  }
  EXPECT_TRUE(detected);
  // At arrival the cell holds the walkers there plus the whole group.
  const auto at = tracks_at(ev.arrival_slot);
  std::size_t inside = 0;
  for (const auto& t : at) inside += topo.assign_cell(t.now) == ev.target;
  const auto before = tracks_at(ev.arrival_slot - 1);
  const auto r = est.estimate(ev.target, before, ev.arrival_slot - 1);
  EXPECT_NEAR(r.psi, static_cast<double>(inside), 2.0);
}

TEST(Join, PiecewiseCells) {
  const auto topo = NetworkTopology::grid(2, 1, Rect{0, 0, 200, 100});
  const std::vector<MobilitySample> mob{{0, 1, {10, 10}}, {2, 1, {150, 10}}, {0, 2, {190, 50}}};
  const std::vector<RequestEvent> req{{0, 1, 0}, {1, 1, 0}, {2, 1, 0}, {3, 1, 1}, {5, 2, 0}, {1, 9, 0}};
  const auto j = slot_requests_by_cell(req, mob, topo, 4);
  EXPECT_EQ(j.cell[0], 0u);
  EXPECT_EQ(j.cell[1], 0u);
  EXPECT_EQ(j.cell[2], 1u);
  EXPECT_EQ(j.cell[3], 1u);
  EXPECT_EQ(j.cell[4], 1u);
  EXPECT_EQ(j.unlocated_users, (std::vector<UserId>{9}));
  const auto counts = count_requests(req, j.cell, 6, 2, 2);
  double total = 0.0;
  for (const auto& t : counts) total += t.row_sum(0) + t.row_sum(1);
  EXPECT_DOUBLE_EQ(total, static_cast<double>(req.size()));
}

TEST(Csv, RoundTrip) {
  const std::vector<RequestEvent> req{{0, 5, 0}, {3, 7, 12}};
  std::stringstream rs;
  write_requests_csv(rs, req);
  EXPECT_EQ(rs.str().substr(0, 15), "slot,user,file\n");
  EXPECT_EQ(read_requests_csv(rs), req);

  const std::vector<MobilitySample> mob{{0, 5, {1.25, 2.5}}, {1, 5, {1.0 / 3.0, 7}}};
  std::stringstream ms;
  write_mobility_csv(ms, mob);
  EXPECT_EQ(read_mobility_csv(ms), mob);
}

TEST(Csv, Errors) {
  std::stringstream bad_header("slot,user\n0,1\n");
  EXPECT_THROW(read_requests_csv(bad_header), TraceError);
  std::stringstream bad_row("slot,user,file\n0,1,2\n0,1\n");
  try {
    read_requests_csv(bad_row);
    FAIL();
  } catch (const TraceError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::stringstream zero_file("slot,user,file\n0,1,0\n");
  EXPECT_THROW(read_requests_csv(zero_file), TraceError);
}
