// Places files on a 2x2 grid of small cells from a hand-written density
// table and prints where each request tier would be served from.

#include <iostream>

#include "mobcache/placement.hpp"
#include "mobcache/routing.hpp"

int main() {
  using namespace mobcache;
  const auto topo = NetworkTopology::grid(2, 2, Rect{0, 0, 1000, 1000});
  const ContentCatalog catalog(6);
  DensityTable density(4, 6);
  const double popular[6] = {0.9, 0.6, 0.4, 0.2, 0.1, 0.05};
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t f = 0; f < 6; ++f) density(k, f) = popular[f] * (1.0 + 0.1 * k);
  }
  const PlacementProblem problem{catalog, CostParams{}, std::vector<double>(4, 2.0), density};
  const auto result = greedy_place(problem);

  std::cout << "cost " << result.cost << " after " << result.iterations << " moves\n";
  for (std::size_t k = 0; k < 4; ++k) {
    std::cout << "sbs " << k << ':';
    for (std::size_t f : result.cache.files_at(k)) std::cout << ' ' << f;
    std::cout << '\n';
  }
  for (std::size_t f = 0; f < 6; ++f) {
    const auto o = route_request(result.cache, topo, 3, f);
    std::cout << "file " << f << " from sbs 3 -> " << tier_name(o.tier) << '\n';
  }
}
