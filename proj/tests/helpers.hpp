#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "rydmis/graphs.hpp"

namespace testutil {

inline rydmis::UnitDiskGraph three_row(double spacing = 5.0) {
  return rydmis::build_unit_disk_graph({{0, 0}, {1, 0}, {2, 0}}, spacing, "row3");
}

inline rydmis::UnitDiskGraph single_site(double spacing = 5.0) {
  return rydmis::build_unit_disk_graph({{0, 0}}, spacing, "single");
}

/// `n` distinct sites drawn uniformly from a w x h window.
inline std::vector<rydmis::Site> random_sites(std::size_t n, int w, int h, std::mt19937_64& rng) {
  std::set<std::pair<int, int>> used;
  std::uniform_int_distribution<int> dx(0, w - 1), dy(0, h - 1);
  std::vector<rydmis::Site> out;
  while (out.size() < n) {
    const int x = dx(rng), y = dy(rng);
    if (used.insert({x, y}).second) out.push_back({x, y});
  }
  return out;
}

/// Random graph of order `n` in a window holding roughly 1.4 sites per vertex.
inline rydmis::UnitDiskGraph random_graph(std::size_t n, std::mt19937_64& rng, double spacing = 5.0) {
  const int side = std::max(2, static_cast<int>(std::ceil(std::sqrt(1.4 * static_cast<double>(n)))));
  return rydmis::build_unit_disk_graph(random_sites(n, side, side, rng), spacing);
}

}  // namespace testutil
