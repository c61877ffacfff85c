#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <deque>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rydmis/bounds.hpp"
#include "rydmis/error.hpp"
#include "rydmis/graphs.hpp"
#include "rydmis/parallel.hpp"

namespace rydmis {

// ---------------------------------------------------------------------------
// Canonical form under the lattice symmetry group

/// Sorted site list after translating the bounding box to the origin; the
/// lexicographic minimum over the 8 square-lattice symmetries.
using CanonicalForm = std::vector<Site>;

inline Site apply_symmetry(Site s, int k) {
  // k in [0,8): rotations by k*90 degrees, then a reflection for k >= 4.
  std::int32_t x = s.x, y = s.y;
  if (k >= 4) x = -x;
  for (int r = 0; r < k % 4; ++r) {
    const std::int32_t t = x;
    x = -y;
    y = t;
  }
  return {x, y};
}

inline std::vector<Site> normalize_translation(std::vector<Site> sites) {
  if (sites.empty()) return sites;
  std::int32_t mx = sites[0].x, my = sites[0].y;
  for (const auto& s : sites) {
    mx = std::min(mx, s.x);
    my = std::min(my, s.y);
  }
  for (auto& s : sites) {
    s.x -= mx;
    s.y -= my;
  }
  std::sort(sites.begin(), sites.end());
  return sites;
}

inline CanonicalForm canonical_form(const std::vector<Site>& sites) {
  CanonicalForm best;
  for (int k = 0; k < 8; ++k) {
    std::vector<Site> t;
    t.reserve(sites.size());
    for (const auto& s : sites) t.push_back(apply_symmetry(s, k));
    t = normalize_translation(std::move(t));
    if (k == 0 || t < best) best = std::move(t);
  }
  return best;
}

inline CanonicalForm canonical_form(const UnitDiskGraph& g) { return canonical_form(g.sites()); }

inline std::string canonical_key(const CanonicalForm& c) {
  std::string key;
  for (const auto& s : c) key += std::to_string(s.x) + "," + std::to_string(s.y) + ";";
  return key;
}

// ---------------------------------------------------------------------------
// Random generation

struct Window {
  std::int32_t width = 0;
  std::int32_t height = 0;
  std::int64_t area() const { return static_cast<std::int64_t>(width) * height; }
};

/// Near-square window whose site density is about `density`.
inline Window window_for_order(std::size_t order, double density = 0.75) {
  if (order == 0) throw DomainError("graph order must be positive");
  if (!(density > 0.0 && density <= 1.0)) throw DomainError("window density must be in (0, 1]");
  const auto area = static_cast<std::int64_t>(std::ceil(static_cast<double>(order) / density - 1e-9));
  const auto w = static_cast<std::int32_t>(std::ceil(std::sqrt(static_cast<double>(area)) - 1e-9));
  const auto h = static_cast<std::int32_t>((area + w - 1) / w);
  return {w, h};
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  auto z = seed ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xC2B2AE3D27D4EB4FULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Samples `order` distinct sites uniformly from the window and returns the
/// graph in canonical site order.
inline UnitDiskGraph generate_random_udg(std::size_t order, Window window, std::uint64_t seed,
                                         double spacing_um = kDefaultSpacingUm) {
  if (order == 0) throw DomainError("graph order must be positive");
  if (window.width <= 0 || window.height <= 0) throw DomainError("window must have positive extent");
  if (static_cast<std::int64_t>(order) > window.area()) {
    throw DomainError("window " + std::to_string(window.width) + "x" + std::to_string(window.height) +
                      " cannot hold " + std::to_string(order) + " sites");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::int64_t> cells(static_cast<std::size_t>(window.area()));
  std::iota(cells.begin(), cells.end(), 0);
  // Partial Fisher-Yates.
  std::vector<Site> sites;
  sites.reserve(order);
  for (std::size_t i = 0; i < order; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
    std::swap(cells[i], cells[pick(rng)]);
    sites.push_back({static_cast<std::int32_t>(cells[i] % window.width),
                     static_cast<std::int32_t>(cells[i] / window.width)});
  }
  return build_unit_disk_graph(canonical_form(sites), spacing_um);
}

struct PoolEntry {
  UnitDiskGraph graph;
  double hp = 0.0;
  std::size_t mis_size = 0;
  bool connected = false;
};

struct PoolSpec {
  std::vector<std::size_t> orders;
  std::size_t draws_per_order = 200;
  std::vector<double> densities{0.75};  ///< cycled per draw
  double spacing_um = kDefaultSpacingUm;
  bool require_connected = false;
  /// When > 0, each draw seeds a random walk of this many single-site moves
  /// steered toward a log-uniform HP target in [walk_hp_lo, walk_hp_hi);
  /// every visited graph joins the pool. Plain uniform sampling rarely
  /// produces HP above 3.
  std::size_t walk_steps = 0;
  double walk_hp_lo = 0.375;
  double walk_hp_hi = 12.0;
  double walk_beta = 8.0;
};

namespace detail {

inline PoolEntry make_pool_entry(UnitDiskGraph g) {
  const auto census = independent_set_census(g);
  PoolEntry e{std::move(g), hardness_parameter(census), census.independence_number, false};
  e.connected = e.graph.connected();
  return e;
}

/// Metropolis walk on site sets inside the window, minimizing
/// |log HP - log target|.
inline std::vector<PoolEntry> hp_walk(std::size_t n, Window win, const PoolSpec& spec,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double target = std::exp(std::log(spec.walk_hp_lo) +
                                 unif(rng) * (std::log(spec.walk_hp_hi) - std::log(spec.walk_hp_lo)));
  auto current = make_pool_entry(generate_random_udg(n, win, rng(), spec.spacing_um));
  std::vector<PoolEntry> visited{current};
  if (static_cast<std::int64_t>(n) == win.area()) return visited;
  const auto miss = [&](double hp) { return std::abs(std::log(hp) - std::log(target)); };
  for (std::size_t step = 0; step < spec.walk_steps; ++step) {
    auto sites = current.graph.sites();
    std::set<std::pair<std::int32_t, std::int32_t>> used;
    for (const auto& s : sites) used.insert({s.x, s.y});
    std::uniform_int_distribution<std::size_t> which(0, n - 1);
    std::uniform_int_distribution<std::int32_t> px(0, win.width - 1), py(0, win.height - 1);
    Site to{};
    do {
      to = {px(rng), py(rng)};
    } while (used.count({to.x, to.y}));
    sites[which(rng)] = to;
    // Keep walking inside the window frame even though the stored form is canonical.
    auto cand = make_pool_entry(build_unit_disk_graph(sites, spec.spacing_um));
    const double d = miss(cand.hp) - miss(current.hp);
    if (d <= 0.0 || unif(rng) < std::exp(-spec.walk_beta * d)) {
      current = std::move(cand);
      visited.push_back(current);
    }
  }
  for (auto& e : visited) e.graph = build_unit_disk_graph(canonical_form(e.graph.sites()), spec.spacing_um);
  return visited;
}

}  // namespace detail

/// Draws graphs for each order, rejects lattice-congruent duplicates and
/// computes HP. Draw d of order n uses seed mix_seed(seed, n, d), so the pool
/// depends only on the PoolSpec and seed, not on `jobs`.
inline std::vector<PoolEntry> generate_pool(const PoolSpec& spec, std::uint64_t seed,
                                            std::size_t jobs = 1) {
  if (spec.orders.empty()) throw DomainError("pool spec has no orders");
  if (spec.densities.empty()) throw DomainError("pool spec has no densities");
  if (spec.walk_steps > 0 && !(spec.walk_hp_lo > 0.0 && spec.walk_hp_hi > spec.walk_hp_lo)) {
    throw DomainError("walk HP range must satisfy 0 < lo < hi");
  }
  struct Draw {
    std::size_t order, index;
  };
  std::vector<Draw> draws;
  for (auto n : spec.orders) {
    for (std::size_t d = 0; d < spec.draws_per_order; ++d) draws.push_back({n, d});
  }
  std::vector<std::vector<PoolEntry>> raw(draws.size());
  parallel_for(draws.size(), jobs, [&](std::size_t i) {
    const auto [n, d] = draws[i];
    const auto win = window_for_order(n, spec.densities[d % spec.densities.size()]);
    const auto s = mix_seed(seed, n, d);
    if (spec.walk_steps > 0) {
      raw[i] = detail::hp_walk(n, win, spec, s);
    } else {
      raw[i].push_back(detail::make_pool_entry(generate_random_udg(n, win, s, spec.spacing_um)));
    }
  });
  std::set<std::string> seen;
  std::vector<PoolEntry> pool;
  for (auto& chain : raw) {
    for (auto& e : chain) {
      if (spec.require_connected && !e.connected) continue;
      if (!seen.insert(canonical_key(canonical_form(e.graph))).second) continue;
      e.graph = e.graph.renamed("n" + std::to_string(e.graph.order()) + "_" + std::to_string(pool.size()));
      pool.push_back(std::move(e));
    }
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Representative dataset selection

struct DatasetSpec {
  std::size_t min_order = 8;
  std::size_t max_order = 17;
  std::size_t per_order = 50;
  std::size_t num_bins = 5;
  std::size_t per_bin = 100;
  double hp_min = 0.375;  ///< bin i (1-based) is [hp_min*2^(i-1), hp_min*2^i)

  std::size_t num_orders() const { return max_order - min_order + 1; }
  std::size_t total() const { return num_orders() * per_order; }
  double bin_lo(std::size_t b) const { return hp_min * std::ldexp(1.0, static_cast<int>(b)); }
  double bin_hi(std::size_t b) const { return hp_min * std::ldexp(1.0, static_cast<int>(b) + 1); }

  /// Zero-based bin index or -1 when outside [hp_min, hp_max).
  int bin_of(double hp) const {
    for (std::size_t b = 0; b < num_bins; ++b) {
      if (hp >= bin_lo(b) && hp < bin_hi(b)) return static_cast<int>(b);
    }
    return -1;
  }

  void validate() const {
    if (min_order == 0 || max_order < min_order) throw DomainError("invalid dataset order range");
    if (num_bins == 0 || per_order == 0 || per_bin == 0 || !(hp_min > 0.0)) {
      throw DomainError("dataset spec counts and hp_min must be positive");
    }
    if (num_orders() * per_order != num_bins * per_bin) {
      throw DomainError("dataset totals inconsistent: " + std::to_string(num_orders()) + " orders x " +
                        std::to_string(per_order) + " != " + std::to_string(num_bins) + " bins x " +
                        std::to_string(per_bin));
    }
  }
};

struct DeficientCell {
  std::size_t order;
  std::size_t bin;  ///< 1-based
  std::size_t available;
  std::size_t wanted;
};

class InfeasibleDatasetError : public DomainError {
 public:
  InfeasibleDatasetError(const std::string& what, std::vector<DeficientCell> cells)
      : DomainError(what), cells_(std::move(cells)) {}
  const std::vector<DeficientCell>& cells() const { return cells_; }

 private:
  std::vector<DeficientCell> cells_;
};

namespace detail {

/// Successive-shortest-path min-cost flow with SPFA; small graphs only.
class MinCostFlow {
 public:
  explicit MinCostFlow(std::size_t n) : adj_(n) {}

  std::size_t add_edge(std::size_t u, std::size_t v, int cap, double cost) {
    adj_[u].push_back(edges_.size());
    edges_.push_back({v, cap, cost});
    adj_[v].push_back(edges_.size());
    edges_.push_back({u, 0, -cost});
    return edges_.size() - 2;
  }

  int flow_on(std::size_t e) const { return edges_[e ^ 1].cap; }

  int run(std::size_t s, std::size_t t, int limit) {
    int flow = 0;
    const std::size_t n = adj_.size();
    std::vector<double> dist(n);
    std::vector<std::size_t> via(n);
    std::vector<char> queued(n);
    while (flow < limit) {
      std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
      std::fill(queued.begin(), queued.end(), 0);
      dist[s] = 0.0;
      std::deque<std::size_t> q{s};
      queued[s] = 1;
      while (!q.empty()) {
        const auto u = q.front();
        q.pop_front();
        queued[u] = 0;
        for (auto e : adj_[u]) {
          const auto& E = edges_[e];
          if (E.cap > 0 && dist[u] + E.cost < dist[E.to] - 1e-12) {
            dist[E.to] = dist[u] + E.cost;
            via[E.to] = e;
            if (!queued[E.to]) {
              queued[E.to] = 1;
              q.push_back(E.to);
            }
          }
        }
      }
      if (!std::isfinite(dist[t])) break;
      int push = limit - flow;
      for (auto v = t; v != s; v = edges_[via[v] ^ 1].to) push = std::min(push, edges_[via[v]].cap);
      for (auto v = t; v != s; v = edges_[via[v] ^ 1].to) {
        edges_[via[v]].cap -= push;
        edges_[via[v] ^ 1].cap += push;
      }
      flow += push;
    }
    return flow;
  }

 private:
  struct Edge {
    std::size_t to;
    int cap;
    double cost;
  };
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<Edge> edges_;
};

}  // namespace detail

struct DatasetSelection {
  std::vector<PoolEntry> graphs;  ///< sorted by (order, hp)
  std::vector<std::vector<std::size_t>> cell_counts;  ///< [order - min_order][bin]
};

/// Picks spec.total() graphs from the pool with exactly per_order graphs of
/// each order, per_bin graphs in each HP bin, pairwise distinct HP values,
/// near-uniform order counts within each bin and HP values close to an even
/// log-spaced grid inside each bin. Formulated as one min-cost flow:
///   source -> order (cap per_order) -> cell (convex unit costs)
///   -> distinct HP value (cap 1) -> grid slot of its bin (log distance)
///   -> bin (cap per_bin) -> sink.
inline DatasetSelection select_representative_dataset(const std::vector<PoolEntry>& pool,
                                                       const DatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t no = spec.num_orders(), nb = spec.num_bins;
  std::mt19937_64 rng(seed);

  // Distinct HP values per bin, and which pool entries carry them per order.
  std::vector<std::vector<double>> hp_values(nb);
  std::map<std::pair<std::size_t, double>, std::vector<std::size_t>> carriers;  // (order, hp) -> entries
  std::vector<std::vector<std::set<double>>> cell_hps(no, std::vector<std::set<double>>(nb));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& e = pool[i];
    const auto n = e.graph.order();
    const int b = spec.bin_of(e.hp);
    if (n < spec.min_order || n > spec.max_order || b < 0) continue;
    carriers[{n, e.hp}].push_back(i);
    cell_hps[n - spec.min_order][static_cast<std::size_t>(b)].insert(e.hp);
  }
  for (std::size_t o = 0; o < no; ++o) {
    for (std::size_t b = 0; b < nb; ++b) {
      for (double h : cell_hps[o][b]) hp_values[b].push_back(h);
    }
  }
  for (auto& v : hp_values) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }

  // Node layout.
  // Each (order, bin) cell feeds kHalves sub-cells splitting the bin in log
  // HP, so order stays balanced against HP inside a bin as well.
  constexpr std::size_t kHalves = 2;
  const std::size_t src = 0, order0 = 1, cell0 = order0 + no, sub0 = cell0 + no * nb;
  const std::size_t hp0 = sub0 + no * nb * kHalves;
  const auto half_of = [&](std::size_t b, double h) {
    const double llo = std::log(spec.bin_lo(b)), lhi = std::log(spec.bin_hi(b));
    const auto q = static_cast<std::size_t>((std::log(h) - llo) / (lhi - llo) * kHalves);
    return std::min(q, kHalves - 1);
  };
  std::vector<std::size_t> hp_base(nb);
  std::size_t next = hp0;
  for (std::size_t b = 0; b < nb; ++b) {
    hp_base[b] = next;
    next += hp_values[b].size();
  }
  // Each distinct HP value passes through an in/out pair with unit capacity.
  const std::size_t hp_out0 = next;
  next += next - hp0;
  const std::size_t slot0 = next;
  const std::size_t bin0 = slot0 + nb * spec.per_bin;
  const std::size_t sink = bin0 + 2 * nb;
  detail::MinCostFlow flow(sink + 1);

  const double ideal = static_cast<double>(spec.per_order) / static_cast<double>(nb);
  std::uniform_real_distribution<double> jitter(0.0, 1e-6);
  // Balanced cells already cancel the order/log-HP covariance; this small
  // linear term only steers where forced deficits are made up.
  constexpr double covariance_weight = 0.25;
  for (std::size_t o = 0; o < no; ++o) {
    const double oc = static_cast<double>(o) - 0.5 * static_cast<double>(no - 1);
    flow.add_edge(src, order0 + o, static_cast<int>(spec.per_order), 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
      const double bc = static_cast<double>(b) - 0.5 * static_cast<double>(nb - 1);
      const auto avail = cell_hps[o][b].size();
      for (std::size_t k = 0; k < std::min(avail, spec.per_order); ++k) {
        const double dev = static_cast<double>(k) + 0.5 - ideal;
        const double spread = dev > 0 ? 2.0 * dev : 0.0;
        flow.add_edge(order0 + o, cell0 + o * nb + b, 1, spread + covariance_weight * oc * bc + jitter(rng));
      }
      std::array<std::size_t, kHalves> per_half{};
      for (double h : cell_hps[o][b]) ++per_half[half_of(b, h)];
      for (std::size_t q = 0; q < kHalves; ++q) {
        for (std::size_t k = 0; k < per_half[q]; ++k) {
          const double dev = static_cast<double>(k) + 0.5 - ideal / kHalves;
          flow.add_edge(cell0 + o * nb + b, sub0 + (o * nb + b) * kHalves + q, 1, dev > 0 ? 2.0 * dev : 0.0);
        }
      }
    }
  }
  std::vector<std::vector<std::size_t>> value_edges(no * nb);
  std::vector<std::vector<double>> value_edge_hp(no * nb);
  for (std::size_t o = 0; o < no; ++o) {
    for (std::size_t b = 0; b < nb; ++b) {
      for (double h : cell_hps[o][b]) {
        const auto j = static_cast<std::size_t>(
            std::lower_bound(hp_values[b].begin(), hp_values[b].end(), h) - hp_values[b].begin());
        const std::size_t sub = sub0 + (o * nb + b) * kHalves + half_of(b, h);
        value_edges[o * nb + b].push_back(flow.add_edge(sub, hp_base[b] + j, 1, 0.0));
        value_edge_hp[o * nb + b].push_back(h);
      }
    }
  }
  // Each value may take one of the few grid slots around its log position,
  // or an overflow node costing as much as the worst slot.
  constexpr std::ptrdiff_t kSlotReach = 6;
  for (std::size_t b = 0; b < nb; ++b) {
    const double llo = std::log(spec.bin_lo(b)), lhi = std::log(spec.bin_hi(b));
    const auto per = static_cast<double>(spec.per_bin);
    const std::size_t bin_node = bin0 + b, overflow = bin0 + nb + b;
    for (std::size_t j = 0; j < hp_values[b].size(); ++j) {
      const double pos = (std::log(hp_values[b][j]) - llo) / (lhi - llo) * per - 0.5;
      const auto near = static_cast<std::ptrdiff_t>(std::lround(pos));
      const std::size_t out = hp_out0 + (hp_base[b] - hp0) + j;
      flow.add_edge(hp_base[b] + j, out, 1, 0.0);
      for (auto s = near - kSlotReach; s <= near + kSlotReach; ++s) {
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(spec.per_bin)) continue;
        flow.add_edge(out, slot0 + b * spec.per_bin + static_cast<std::size_t>(s), 1,
                      std::abs(pos - static_cast<double>(s)) / per);
      }
      flow.add_edge(out, overflow, 1, 1.0);
    }
    for (std::size_t s = 0; s < spec.per_bin; ++s) flow.add_edge(slot0 + b * spec.per_bin + s, bin_node, 1, 0.0);
    flow.add_edge(overflow, bin_node, static_cast<int>(spec.per_bin), 0.0);
    flow.add_edge(bin_node, sink, static_cast<int>(spec.per_bin), 0.0);
  }

  const int total = static_cast<int>(spec.total());
  const int got = flow.run(src, sink, total);
  if (got < total) {
    std::vector<DeficientCell> cells;
    const auto want = static_cast<std::size_t>(std::ceil(ideal));
    std::string msg = "pool cannot satisfy dataset rules (" + std::to_string(got) + " of " +
                      std::to_string(total) + " graphs placeable); deficient (order, bin) cells:";
    for (std::size_t o = 0; o < no; ++o) {
      for (std::size_t b = 0; b < nb; ++b) {
        const auto avail = cell_hps[o][b].size();
        if (avail < want) {
          cells.push_back({spec.min_order + o, b + 1, avail, want});
          msg += " (" + std::to_string(spec.min_order + o) + ", bin " + std::to_string(b + 1) +
                 ": " + std::to_string(avail) + " distinct HP)";
        }
      }
    }
    throw InfeasibleDatasetError(msg, std::move(cells));
  }

  DatasetSelection sel;
  sel.cell_counts.assign(no, std::vector<std::size_t>(nb, 0));
  for (std::size_t o = 0; o < no; ++o) {
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& edges = value_edges[o * nb + b];
      for (std::size_t k = 0; k < edges.size(); ++k) {
        if (flow.flow_on(edges[k]) == 0) continue;
        const auto& c = carriers.at({spec.min_order + o, value_edge_hp[o * nb + b][k]});
        std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);
        sel.graphs.push_back(pool[c[pick(rng)]]);
        ++sel.cell_counts[o][b];
      }
    }
  }
  std::sort(sel.graphs.begin(), sel.graphs.end(), [](const PoolEntry& a, const PoolEntry& b) {
    if (a.graph.order() != b.graph.order()) return a.graph.order() < b.graph.order();
    return a.hp < b.hp;
  });
  return sel;
}

/// Pearson correlation between order and log(HP).
inline double order_loghp_correlation(const std::vector<PoolEntry>& graphs) {
  const auto n = static_cast<double>(graphs.size());
  if (graphs.size() < 2) return 0.0;
  double mx = 0, my = 0;
  for (const auto& e : graphs) {
    mx += static_cast<double>(e.graph.order());
    my += std::log(e.hp);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (const auto& e : graphs) {
    const double dx = static_cast<double>(e.graph.order()) - mx, dy = std::log(e.hp) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace rydmis
