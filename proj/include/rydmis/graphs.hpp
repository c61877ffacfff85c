#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rydmis/error.hpp"

namespace rydmis {

/// Integer square-lattice coordinate.
struct Site {
  std::int32_t x = 0;
  std::int32_t y = 0;

  friend auto operator<=>(const Site&, const Site&) = default;
};

/// Squared lattice distance between two sites (exact integer arithmetic).
inline std::int64_t distance2(const Site& a, const Site& b) {
  const std::int64_t dx = std::int64_t{a.x} - b.x;
  const std::int64_t dy = std::int64_t{a.y} - b.y;
  return dx * dx + dy * dy;
}

/// Occupation pattern over the vertices of a graph; bit i set means vertex i
/// is selected (atom i in the Rydberg state).
class Bitstring {
 public:
  Bitstring() = default;
  explicit Bitstring(std::size_t n) : bits_(n, 0) {}
  explicit Bitstring(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  /// Builds from a mask where bit i (least significant first) is vertex i.
  static Bitstring from_mask(std::uint64_t mask, std::size_t n) {
    Bitstring b(n);
    for (std::size_t i = 0; i < n; ++i) b.bits_[i] = (mask >> i) & 1U;
    return b;
  }

  /// Parses "0101..." where the first character is vertex 0.
  static Bitstring parse(std::string_view text) {
    Bitstring b(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] != '0' && text[i] != '1') {
        throw DomainError("bitstring contains '" + std::string(1, text[i]) +
                          "' at position " + std::to_string(i));
      }
      b.bits_[i] = text[i] == '1';
    }
    return b;
  }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
  }

  std::uint64_t to_mask() const {
    if (bits_.size() > 64) throw LimitError("bitstring longer than 64 bits has no mask form");
    std::uint64_t m = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) m |= std::uint64_t{bits_[i]} << i;
    return m;
  }

  std::string str() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = bits_[i] ? '1' : '0';
    return s;
  }

  friend bool operator==(const Bitstring&, const Bitstring&) = default;
  friend auto operator<=>(const Bitstring&, const Bitstring&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Square-lattice unit-disk graph: vertices on integer sites, an edge between
/// every pair at lattice distance <= sqrt(2) (nearest and next-nearest
/// neighbors). Immutable once built; use build_unit_disk_graph().
class UnitDiskGraph {
 public:
  using Edge = std::pair<int, int>;

  const std::vector<Site>& sites() const { return sites_; }
  const Site& site(std::size_t i) const { return sites_[i]; }
  double spacing_um() const { return spacing_um_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(std::size_t i) const { return neighbors_[i]; }
  std::size_t order() const { return sites_.size(); }
  const std::string& name() const { return name_; }

  bool adjacent(std::size_t i, std::size_t j) const {
    const auto& nb = neighbors_[i];
    return std::binary_search(nb.begin(), nb.end(), static_cast<int>(j));
  }

  /// Lattice distance in units of the spacing.
  double lattice_distance(std::size_t i, std::size_t j) const {
    return std::sqrt(static_cast<double>(distance2(sites_[i], sites_[j])));
  }

  /// Physical distance in micrometers.
  double distance_um(std::size_t i, std::size_t j) const {
    return spacing_um_ * lattice_distance(i, j);
  }

  /// Neighborhood masks; requires order() <= 64.
  std::vector<std::uint64_t> adjacency_masks() const {
    if (order() > 64) throw LimitError("adjacency masks need at most 64 vertices");
    std::vector<std::uint64_t> m(order(), 0);
    for (const auto& [i, j] : edges_) {
      m[i] |= std::uint64_t{1} << j;
      m[j] |= std::uint64_t{1} << i;
    }
    return m;
  }

  bool connected() const {
    if (sites_.empty()) return true;
    std::vector<char> seen(order(), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : neighbors_[u]) {
        if (!seen[v]) {
          seen[v] = 1;
          ++visited;
          stack.push_back(v);
        }
      }
    }
    return visited == order();
  }

  UnitDiskGraph renamed(std::string name) const {
    UnitDiskGraph g = *this;
    g.name_ = std::move(name);
    return g;
  }

  friend bool operator==(const UnitDiskGraph& a, const UnitDiskGraph& b) {
    return a.name_ == b.name_ && a.spacing_um_ == b.spacing_um_ && a.sites_ == b.sites_;
  }

 private:
  friend UnitDiskGraph build_unit_disk_graph(std::vector<Site>, double, std::string);

  std::string name_;
  double spacing_um_ = 1.0;
  std::vector<Site> sites_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
};

/// Squared lattice radius of the unit disk: nearest and next-nearest
/// neighbors are connected.
inline constexpr std::int64_t kUnitDiskRadius2 = 2;

/// Builds the unit-disk graph over `sites` (vertex order preserved).
inline UnitDiskGraph build_unit_disk_graph(std::vector<Site> sites, double spacing_um,
                                           std::string name = {}) {
  if (sites.empty()) throw DomainError("unit-disk graph needs at least one site");
  if (!(spacing_um > 0.0) || !std::isfinite(spacing_um)) {
    throw DomainError("lattice spacing must be positive, got " + std::to_string(spacing_um));
  }
  const std::size_t n = sites.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (sites[i] == sites[j]) {
        throw DomainError("duplicate site (" + std::to_string(sites[i].x) + "," +
                          std::to_string(sites[i].y) + ") at indices " + std::to_string(i) +
                          " and " + std::to_string(j));
      }
    }
  }
  UnitDiskGraph g;
  g.name_ = std::move(name);
  g.spacing_um_ = spacing_um;
  g.sites_ = std::move(sites);
  g.neighbors_.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (distance2(g.sites_[i], g.sites_[j]) <= kUnitDiskRadius2) {
        g.edges_.emplace_back(static_cast<int>(i), static_cast<int>(j));
        g.neighbors_[i].push_back(static_cast<int>(j));
        g.neighbors_[j].push_back(static_cast<int>(i));
      }
    }
  }
  for (auto& nb : g.neighbors_) std::sort(nb.begin(), nb.end());
  return g;
}

inline bool is_independent(const Bitstring& bits, const UnitDiskGraph& g) {
  for (const auto& [i, j] : g.edges()) {
    if (bits[i] && bits[j]) return false;
  }
  return true;
}

/// Independent and no vertex can be added.
inline bool is_maximal_independent(const Bitstring& bits, const UnitDiskGraph& g) {
  if (!is_independent(bits, g)) return false;
  for (std::size_t v = 0; v < g.order(); ++v) {
    if (bits[v]) continue;
    bool blocked = false;
    for (int u : g.neighbors(v)) blocked = blocked || bits[u];
    if (!blocked) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Independent-set census and hardness parameter

/// Degeneracies D_k of independent sets of size k plus all maximum ones.
struct IndependentSetCensus {
  std::vector<std::uint64_t> degeneracies;  ///< index k -> D_k, size |MIS|+1
  std::size_t independence_number = 0;
  std::vector<Bitstring> mis_solutions;  ///< sorted by mask value

  std::uint64_t degeneracy(std::size_t k) const {
    return k < degeneracies.size() ? degeneracies[k] : 0;
  }

  std::uint64_t total_independent_sets() const {
    std::uint64_t s = 0;
    for (auto d : degeneracies) s += d;
    return s;
  }
};

inline constexpr std::size_t kDefaultCensusLimit = 25;

namespace detail {

struct CensusWalker {
  std::span<const std::uint64_t> closed_nbhd;
  std::vector<std::uint64_t> counts;
  std::size_t best = 0;
  std::vector<std::uint64_t> best_sets;

  void visit(std::uint64_t candidates, std::uint64_t chosen, std::size_t size) {
    if (candidates == 0) {
      ++counts[size];
      if (size > best) {
        best = size;
        best_sets.clear();
      }
      if (size == best) best_sets.push_back(chosen);
      return;
    }
    const int v = std::countr_zero(candidates);
    const std::uint64_t bit = std::uint64_t{1} << v;
    // Exclude v first, then include it; both branches only ever see vertices
    // compatible with `chosen`, so leaves are exactly the independent sets.
    visit(candidates & ~bit, chosen, size);
    visit(candidates & ~closed_nbhd[v], chosen | bit, size + 1);
  }
};

}  // namespace detail

/// Enumerates every independent set exactly once by branching on the lowest
/// remaining candidate vertex (exclude it, or include it and drop its
/// neighborhood).
inline IndependentSetCensus independent_set_census(const UnitDiskGraph& g,
                                                   std::size_t limit = kDefaultCensusLimit) {
  const std::size_t n = g.order();
  if (n > limit) {
    throw LimitError("independent-set census refused: graph has " + std::to_string(n) +
                     " vertices, enumeration limit is " + std::to_string(limit));
  }
  if (n > 63) throw LimitError("independent-set census supports at most 63 vertices");
  auto masks = g.adjacency_masks();
  for (std::size_t i = 0; i < n; ++i) masks[i] |= std::uint64_t{1} << i;

  detail::CensusWalker w{masks, std::vector<std::uint64_t>(n + 1, 0), 0, {}};
  const std::uint64_t all = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  w.visit(all, 0, 0);

  IndependentSetCensus c;
  c.independence_number = w.best;
  c.degeneracies.assign(w.counts.begin(), w.counts.begin() + static_cast<long>(w.best) + 1);
  std::sort(w.best_sets.begin(), w.best_sets.end());
  for (auto m : w.best_sets) c.mis_solutions.push_back(Bitstring::from_mask(m, n));
  return c;
}

/// HP = D_{|MIS|-1} / (|MIS| * D_{|MIS|}).
inline double hardness_parameter(const IndependentSetCensus& c) {
  const std::size_t m = c.independence_number;
  if (m == 0 || c.degeneracy(m) == 0) {
    throw DomainError("hardness parameter undefined for an empty independence number");
  }
  return static_cast<double>(c.degeneracy(m - 1)) /
         (static_cast<double>(m) * static_cast<double>(c.degeneracy(m)));
}

// ---------------------------------------------------------------------------
// Special graph constructors

inline constexpr double kDefaultSpacingUm = 5.0;

/// Toy graph from a three-nibble identifier. Nibble i (most significant first)
/// is row i from the top of a 4-column by 3-row window; within a nibble the
/// most significant bit is the leftmost column. Vertices are numbered in
/// reading order (top to bottom, left to right).
inline UnitDiskGraph parse_toy_graph_id(std::string_view id,
                                        double spacing_um = kDefaultSpacingUm) {
  if (id.size() != 3) {
    throw DomainError("toy graph id must have 3 hex digits, got '" + std::string(id) + "'");
  }
  std::vector<Site> sites;
  for (std::size_t row = 0; row < 3; ++row) {
    const char ch = id[row];
    int nibble = -1;
    if (ch >= '0' && ch <= '9') nibble = ch - '0';
    if (ch >= 'A' && ch <= 'F') nibble = ch - 'A' + 10;
    if (nibble < 0) {
      throw DomainError("toy graph id '" + std::string(id) + "' has non-hex digit '" +
                        std::string(1, ch) + "' (uppercase 0-9A-F expected)");
    }
    for (int col = 0; col < 4; ++col) {
      if ((nibble >> (3 - col)) & 1) {
        // y grows downwards so that reading order is (row, column) order.
        sites.push_back({col, static_cast<std::int32_t>(row)});
      }
    }
  }
  if (sites.empty()) throw DomainError("toy graph id '" + std::string(id) + "' is empty");
  return build_unit_disk_graph(std::move(sites), spacing_um, std::string(id));
}

/// One representative identifier per lattice-symmetry class of the 4x3 toy
/// family: 9 or 10 vertices, a unique MIS and 2 <= HP <= 3. Ordered by
/// vertex count, then hardness.
inline const std::array<std::string_view, 11>& toy_graph_ids() {
  static const std::array<std::string_view, 11> ids = {
      "5FE", "777", "77E", "5F7", "7F9", "7DE", "7B7", "7E7", "7D7", "7FE", "7F7"};
  return ids;
}

/// Triangle-chain counterexample: main line of 2m+1 atoms with m alternating
/// upward/downward tips. The m+1 even-position line atoms (spacing 2a) form
/// the MIS; the m tips form the competing configuration. Vertex order: line
/// atoms left to right, then tips left to right.
inline UnitDiskGraph triangle_chain_graph(std::size_t m, double spacing_um = kDefaultSpacingUm) {
  if (m == 0) throw DomainError("triangle chain needs m >= 1");
  if (m > 1'000'000) throw DomainError("triangle chain length out of range");
  std::vector<Site> sites;
  for (std::size_t i = 0; i <= 2 * m; ++i) sites.push_back({static_cast<std::int32_t>(i), 0});
  for (std::size_t i = 0; i < m; ++i) {
    sites.push_back({static_cast<std::int32_t>(2 * i + 1), i % 2 == 0 ? 1 : -1});
  }
  return build_unit_disk_graph(std::move(sites), spacing_um,
                               "triangle_chain_m" + std::to_string(m));
}

/// Indices of the main-line MIS vertices and of the tip vertices.
inline std::pair<Bitstring, Bitstring> triangle_chain_configurations(std::size_t m) {
  const std::size_t n = 3 * m + 1;
  Bitstring mis(n), tips(n);
  for (std::size_t i = 0; i <= m; ++i) mis.set(2 * i, true);
  for (std::size_t i = 0; i < m; ++i) tips.set(2 * m + 1 + i, true);
  return {mis, tips};
}

// ---------------------------------------------------------------------------
// Greedy post-processing

/// Repairs a measured configuration into a maximal independent set using the
/// supplied engine: first drop a random endpoint of a random violated edge
/// until independent, then add random free vertices until maximal.
template <class Rng>
Bitstring greedy_repair(const Bitstring& measured, const UnitDiskGraph& g, Rng& rng) {
  if (measured.size() != g.order()) {
    throw DomainError("bitstring length " + std::to_string(measured.size()) +
                      " does not match graph order " + std::to_string(g.order()));
  }
  Bitstring bits = measured;
  std::vector<UnitDiskGraph::Edge> violated;
  for (;;) {
    violated.clear();
    for (const auto& e : g.edges()) {
      if (bits[e.first] && bits[e.second]) violated.push_back(e);
    }
    if (violated.empty()) break;
    std::uniform_int_distribution<std::size_t> pick_edge(0, violated.size() - 1);
    const auto& e = violated[pick_edge(rng)];
    std::bernoulli_distribution pick_end(0.5);
    bits.set(pick_end(rng) ? e.second : e.first, false);
  }
  std::vector<std::size_t> free;
  for (;;) {
    free.clear();
    for (std::size_t v = 0; v < g.order(); ++v) {
      if (bits[v]) continue;
      bool blocked = false;
      for (int u : g.neighbors(v)) blocked = blocked || bits[u];
      if (!blocked) free.push_back(v);
    }
    if (free.empty()) break;
    std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
    bits.set(free[pick(rng)], true);
  }
  return bits;
}

inline Bitstring greedy_repair(const Bitstring& measured, const UnitDiskGraph& g,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return greedy_repair(measured, g, rng);
}

}  // namespace rydmis
