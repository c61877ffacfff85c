#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rydmis/error.hpp"
#include "rydmis/graphs.hpp"
#include "rydmis/hamiltonian.hpp"
#include "rydmis/parallel.hpp"

namespace rydmis {

/// Open interval (lower, upper) of final detunings for which a MIS
/// configuration is a ground state of the final cost Hamiltonian. At either
/// endpoint the ground state is degenerate with a non-MIS configuration.
struct BoundsInterval {
  double lower = 0.0;                 ///< MHz, >= 0
  std::optional<double> upper;        ///< MHz; empty when unbounded
  bool feasible = false;

  bool unbounded() const { return !upper.has_value(); }
  double upper_or_inf() const { return upper.value_or(std::numeric_limits<double>::infinity()); }
};

inline constexpr std::size_t kDefaultBoundsLimit = 20;

/// Per-size extrema of the pair-interaction energy over all 2^N
/// configurations.
struct EnergyLandscape {
  std::size_t mis_size = 0;
  std::vector<double> min_energy;  ///< min V(x) over |x| = k, any x
  double v_star = 0.0;             ///< min V over MIS configurations
  double min_nonindependent_at_mis = std::numeric_limits<double>::infinity();
};

/// Walks all configurations in Gray-code order, updating the interaction
/// energy and the number of violated edges incrementally.
inline EnergyLandscape energy_landscape(const UnitDiskGraph& g, const InteractionTable& table,
                                        std::size_t limit = kDefaultBoundsLimit) {
  const std::size_t n = g.order();
  if (n > limit) {
    throw LimitError("exact detuning bounds refused: graph has " + std::to_string(n) +
                     " vertices, enumeration limit is " + std::to_string(limit));
  }
  if (n > 30) throw LimitError("exact detuning bounds support at most 30 vertices");
  const auto adj = g.adjacency_masks();
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<double> min_e(n + 1, inf);
  std::vector<double> min_indep(n + 1, inf);
  std::vector<double> min_dep(n + 1, inf);
  std::vector<double> field(n, 0.0);  // sum_j V_kj x_j
  std::uint64_t x = 0;
  double energy = 0.0;
  std::int64_t violated = 0;
  std::size_t size = 0;
  min_e[0] = 0.0;
  min_indep[0] = 0.0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t step = 1; step < total; ++step) {
    const int k = std::countr_zero(step);
    const std::uint64_t bit = std::uint64_t{1} << k;
    const int sign = (x & bit) ? -1 : 1;
    const auto nb = static_cast<std::int64_t>(std::popcount(adj[k] & x));
    energy += sign * field[k];
    violated += sign * nb;
    x ^= bit;
    size = static_cast<std::size_t>(static_cast<long>(size) + sign);
    for (std::size_t j = 0; j < n; ++j) field[j] += sign * table(j, static_cast<std::size_t>(k));
    min_e[size] = std::min(min_e[size], energy);
    if (violated == 0) {
      min_indep[size] = std::min(min_indep[size], energy);
    } else {
      min_dep[size] = std::min(min_dep[size], energy);
    }
  }
  EnergyLandscape L;
  while (L.mis_size < n && min_indep[L.mis_size + 1] < inf) ++L.mis_size;
  L.min_energy = std::move(min_e);
  L.v_star = min_indep[L.mis_size];
  L.min_nonindependent_at_mis = min_dep[L.mis_size];
  return L;
}

/// Exact (Delta_LB, Delta_UB) for one graph.
inline BoundsInterval exact_detuning_bounds(const UnitDiskGraph& g, const PhysicalConstants& pc = {},
                                            std::size_t limit = kDefaultBoundsLimit) {
  const InteractionTable table(g, pc);
  const auto L = energy_landscape(g, table, limit);
  const std::size_t m = L.mis_size;
  BoundsInterval b;
  double lower = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    lower = std::max(lower, (L.v_star - L.min_energy[k]) / static_cast<double>(m - k));
  }
  b.lower = lower;
  for (std::size_t k = m + 1; k < L.min_energy.size(); ++k) {
    const double u = (L.min_energy[k] - L.v_star) / static_cast<double>(k - m);
    if (!b.upper || u < *b.upper) b.upper = u;
  }
  b.feasible = b.lower < b.upper_or_inf() && L.min_nonindependent_at_mis > L.v_star;
  return b;
}

/// Statistically recommended final-detuning interval [V0/12, V0/8].
struct RecommendedInterval {
  double lower;
  double upper;
};

inline RecommendedInterval recommended_detuning_interval(double spacing_um,
                                                         const PhysicalConstants& pc = {}) {
  const double v0 = pc.v0(spacing_um);
  return {v0 / 12.0, v0 / 8.0};
}

// ---------------------------------------------------------------------------
// Triangle-chain counterexample

struct TriangleChainSums {
  std::size_t m = 0;
  double sigma0 = 0.0;  ///< sum_{i=1..m} (m+1-i) / i^6
  double sigma1 = 0.0;  ///< sum_{i=1..floor(m/2)} [(m+1-2i)/(4i^2-4i+2)^3 + (m-2i)/(2i)^6]

  /// Energy of the main-line MIS configuration.
  double e0(double delta_f, double v0) const {
    return -static_cast<double>(m + 1) * delta_f + v0 / 64.0 * sigma0;
  }
  /// Energy of the tip configuration.
  double e1(double delta_f, double v0) const {
    return -static_cast<double>(m) * delta_f + v0 / 64.0 * sigma1;
  }
  /// Delta_f must exceed this for the MIS configuration to beat the tips.
  double lower_bound_over_v0() const { return (sigma0 - sigma1) / 64.0; }
};

inline TriangleChainSums triangle_chain_sigma(std::size_t m) {
  if (m == 0) throw DomainError("triangle chain needs m >= 1");
  TriangleChainSums s;
  s.m = m;
  const double md = static_cast<double>(m);
  for (std::size_t i = 1; i <= m; ++i) {
    const double id = static_cast<double>(i);
    s.sigma0 += (md + 1.0 - id) / std::pow(id, 6);
  }
  for (std::size_t i = 1; i <= m / 2; ++i) {
    const double id = static_cast<double>(i);
    s.sigma1 += (md + 1.0 - 2.0 * id) / std::pow(4.0 * id * id - 4.0 * id + 2.0, 3) +
                (md - 2.0 * id) / std::pow(2.0 * id, 6);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Ensemble statistics

/// HP bin edges: the five dataset bins [3*2^(i-4), 3*2^(i-3)) plus
/// underflow and overflow bins.
inline const std::vector<double>& hp_bin_edges() {
  static const std::vector<double> e{0.0, 0.375, 0.75, 1.5, 3.0, 6.0, 12.0,
                                     std::numeric_limits<double>::infinity()};
  return e;
}

inline std::size_t hp_bin(double hp) {
  const auto& e = hp_bin_edges();
  const auto it = std::upper_bound(e.begin(), e.end(), hp);
  return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - e.begin() - 1));
}

struct Quantiles {
  double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
};

/// Linear-interpolation quantiles of a non-empty sample.
inline Quantiles quantiles(std::vector<double> v) {
  if (v.empty()) throw DomainError("quantiles of an empty sample");
  std::sort(v.begin(), v.end());
  const auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double w = pos - static_cast<double>(lo);
    if (w == 0.0) return v[lo];
    return v[lo] + w * (v[hi] - v[lo]);
  };
  return {v.front(), q(0.25), q(0.5), q(0.75), v.back()};
}

struct GraphBounds {
  std::string id;
  std::size_t order = 0;
  double hp = 0.0;
  BoundsInterval bounds;
  double v0 = 0.0;

  double dlb_over_v0() const { return bounds.lower / v0; }
  double dub_over_v0() const { return bounds.upper_or_inf() / v0; }
};

struct BinSummary {
  double hp_lo = 0.0, hp_hi = 0.0;
  std::size_t count = 0;
  Quantiles lower;  ///< Delta_LB / V0
  Quantiles upper;  ///< Delta_UB / V0 (inf when unbounded)
};

struct EnsembleSummary {
  std::vector<GraphBounds> graphs;
  std::vector<BinSummary> bins;   ///< only non-empty bins
  std::size_t lower_ok = 0;       ///< Delta_LB <= V0/12
  std::size_t upper_ok = 0;       ///< Delta_UB >= V0/8
  std::size_t both_ok = 0;
  std::size_t infeasible = 0;

  double fraction_within_recommended() const {
    return graphs.empty() ? 0.0
                          : static_cast<double>(both_ok) / static_cast<double>(graphs.size());
  }
};

inline EnsembleSummary ensemble_bounds_stats(const std::vector<UnitDiskGraph>& graphs,
                                             const PhysicalConstants& pc = {},
                                             std::size_t jobs = 1,
                                             std::size_t limit = kDefaultBoundsLimit) {
  if (graphs.empty()) throw DomainError("ensemble statistics need at least one graph");
  EnsembleSummary s;
  s.graphs.resize(graphs.size());
  parallel_for(graphs.size(), jobs, [&](std::size_t i) {
    const auto& g = graphs[i];
    GraphBounds gb;
    gb.id = g.name().empty() ? "g" + std::to_string(i) : g.name();
    gb.order = g.order();
    gb.hp = hardness_parameter(independent_set_census(g));
    gb.bounds = exact_detuning_bounds(g, pc, limit);
    gb.v0 = pc.v0(g.spacing_um());
    s.graphs[i] = std::move(gb);
  });
  const auto& edges = hp_bin_edges();
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    std::vector<double> lo, hi;
    for (const auto& gb : s.graphs) {
      if (hp_bin(gb.hp) != b) continue;
      lo.push_back(gb.dlb_over_v0());
      hi.push_back(gb.dub_over_v0());
    }
    if (lo.empty()) continue;
    s.bins.push_back({edges[b], edges[b + 1], lo.size(), quantiles(lo), quantiles(hi)});
  }
  for (const auto& gb : s.graphs) {
    const bool lo_ok = gb.dlb_over_v0() <= 1.0 / 12.0;
    const bool hi_ok = gb.dub_over_v0() >= 1.0 / 8.0;
    s.lower_ok += lo_ok;
    s.upper_ok += hi_ok;
    s.both_ok += lo_ok && hi_ok;
    s.infeasible += !gb.bounds.feasible;
  }
  return s;
}

}  // namespace rydmis
