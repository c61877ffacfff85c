#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rydmis/error.hpp"
#include "rydmis/graphs.hpp"

namespace rydmis {

using cplx = std::complex<double>;

/// Device constants. Frequencies are angular (rad/us), so H * t with t in
/// microseconds is a dimensionless phase.
struct PhysicalConstants {
  double c6 = 5'420'503.0;  ///< MHz um^6
  double omega_max = 15.8;  ///< MHz
  double t_max = 4.0;       ///< us
  double delta_noise = 1.0; ///< MHz, global detuning noise floor
  double hw_step_us = 0.05; ///< us, minimal waveform step

  void validate() const {
    const auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(c6) || !positive(omega_max) || !positive(t_max) || !positive(delta_noise) ||
        !positive(hw_step_us)) {
      throw DomainError("physical constants must all be strictly positive");
    }
  }

  /// Nearest-neighbor interaction C6 / a^6.
  double v0(double spacing_um) const { return c6 / std::pow(spacing_um, 6); }

  /// R_b = (C6 / Omega_max)^(1/6), in micrometers.
  double blockade_radius() const { return std::pow(c6 / omega_max, 1.0 / 6.0); }
};

/// Symmetric table of V_ij = C6 / |r_i - r_j|^6 over all pairs.
class InteractionTable {
 public:
  InteractionTable(const UnitDiskGraph& g, const PhysicalConstants& pc)
      : n_(g.order()), v0_(pc.v0(g.spacing_um())), v_(n_ * n_, 0.0) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        // d^6 taken from the exact integer squared distance.
        const double d2 = static_cast<double>(distance2(g.site(i), g.site(j)));
        const double vij = v0_ / (d2 * d2 * d2);
        v_[i * n_ + j] = vij;
        v_[j * n_ + i] = vij;
      }
    }
  }

  std::size_t size() const { return n_; }
  double v0() const { return v0_; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }

  /// Sum_{i<j} V_ij x_i x_j for a mask-encoded configuration.
  double pair_energy(std::uint64_t mask) const {
    double e = 0.0;
    std::uint64_t rest = mask;
    while (rest) {
      const int i = std::countr_zero(rest);
      rest &= rest - 1;
      std::uint64_t later = rest;
      while (later) {
        const int j = std::countr_zero(later);
        later &= later - 1;
        e += v_[static_cast<std::size_t>(i) * n_ + static_cast<std::size_t>(j)];
      }
    }
    return e;
  }

 private:
  std::size_t n_;
  double v0_;
  std::vector<double> v_;
};

/// -Delta * sum_i x_i + sum_{i<j} V_ij x_i x_j.
inline double configuration_energy(const Bitstring& bits, double delta,
                                   const InteractionTable& table) {
  if (bits.size() != table.size()) {
    throw DomainError("configuration length " + std::to_string(bits.size()) +
                      " does not match interaction table size " + std::to_string(table.size()));
  }
  double e = 0.0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    e -= delta;
    for (std::size_t j = i + 1; j < bits.size(); ++j) {
      if (bits[j]) e += table(i, j);
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// Simulation basis

enum class Subspace {
  Full,             ///< all 2^N configurations
  NearestNeighbor,  ///< R_s = a: no two excitations on adjacent lattice sites
  UnitDisk,         ///< R_s = R_b: only independent sets of the graph
};

inline std::string to_string(Subspace s) {
  switch (s) {
    case Subspace::Full: return "full";
    case Subspace::NearestNeighbor: return "nn";
    case Subspace::UnitDisk: return "ud";
  }
  return "?";
}

inline Subspace parse_subspace(const std::string& s) {
  if (s == "full") return Subspace::Full;
  if (s == "nn") return Subspace::NearestNeighbor;
  if (s == "ud") return Subspace::UnitDisk;
  throw DomainError("unknown subspace '" + s + "' (expected full, nn or ud)");
}

struct BasisLimits {
  std::size_t max_full_order = 20;
  std::size_t max_states = std::size_t{1} << 22;
};

/// Ordered simulation basis. States are vertex masks (bit i = atom i) sorted
/// ascending.
class BasisSet {
 public:
  BasisSet(std::size_t order, Subspace subspace, std::vector<std::uint32_t> states)
      : order_(order), subspace_(subspace), states_(std::move(states)) {}

  std::size_t order() const { return order_; }
  Subspace subspace() const { return subspace_; }
  std::size_t size() const { return states_.size(); }
  std::uint32_t state(std::size_t idx) const { return states_[idx]; }
  std::span<const std::uint32_t> states() const { return states_; }
  Bitstring bitstring(std::size_t idx) const { return Bitstring::from_mask(states_[idx], order_); }

  /// Index of `mask`, or -1 when it is excluded from the basis.
  std::int64_t index_of(std::uint64_t mask) const {
    if (subspace_ == Subspace::Full) {
      return mask < states_.size() ? static_cast<std::int64_t>(mask) : -1;
    }
    const auto it = std::lower_bound(states_.begin(), states_.end(), mask);
    if (it == states_.end() || *it != mask) return -1;
    return it - states_.begin();
  }

 private:
  std::size_t order_;
  Subspace subspace_;
  std::vector<std::uint32_t> states_;
};

namespace detail {

inline std::vector<std::uint64_t> blockade_masks(const UnitDiskGraph& g, Subspace s) {
  const std::size_t n = g.order();
  std::vector<std::uint64_t> m(n, 0);
  const std::int64_t radius2 = s == Subspace::NearestNeighbor ? 1 : kUnitDiskRadius2;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && distance2(g.site(i), g.site(j)) <= radius2) m[i] |= std::uint64_t{1} << j;
    }
    m[i] |= std::uint64_t{1} << i;
  }
  return m;
}

// Collects all sets avoiding blockaded pairs; returns false when `cap` is hit.
inline bool collect_blockade_states(std::span<const std::uint64_t> closed, std::uint64_t cand,
                                    std::uint64_t chosen, std::vector<std::uint32_t>& out,
                                    std::size_t cap) {
  if (cand == 0) {
    if (out.size() >= cap) return false;
    out.push_back(static_cast<std::uint32_t>(chosen));
    return true;
  }
  const int v = std::countr_zero(cand);
  const std::uint64_t bit = std::uint64_t{1} << v;
  return collect_blockade_states(closed, cand & ~bit, chosen, out, cap) &&
         collect_blockade_states(closed, cand & ~closed[v], chosen | bit, out, cap);
}

}  // namespace detail

/// Builds the basis for the chosen blockade subspace.
inline BasisSet build_basis(const UnitDiskGraph& g, Subspace subspace,
                            const BasisLimits& limits = {}) {
  const std::size_t n = g.order();
  if (n > 32) throw LimitError("simulation basis supports at most 32 atoms");
  if (subspace == Subspace::Full) {
    if (n > limits.max_full_order) {
      throw LimitError("full Hilbert space of " + std::to_string(n) +
                       " atoms exceeds the limit of " + std::to_string(limits.max_full_order) +
                       " atoms; use the nearest-neighbor subspace (nn) instead");
    }
    std::vector<std::uint32_t> states(std::size_t{1} << n);
    for (std::size_t i = 0; i < states.size(); ++i) states[i] = static_cast<std::uint32_t>(i);
    return BasisSet(n, subspace, std::move(states));
  }
  const auto closed = detail::blockade_masks(g, subspace);
  std::vector<std::uint32_t> states;
  const std::uint64_t all = (std::uint64_t{1} << n) - 1;
  if (!detail::collect_blockade_states(closed, all, 0, states, limits.max_states)) {
    std::string hint = subspace == Subspace::NearestNeighbor
                           ? "; the unit-disk subspace (ud) is smaller but less accurate"
                           : "";
    throw LimitError(to_string(subspace) + " subspace of " + std::to_string(n) +
                     " atoms exceeds the limit of " + std::to_string(limits.max_states) +
                     " basis states" + hint);
  }
  std::sort(states.begin(), states.end());
  return BasisSet(n, subspace, std::move(states));
}

// ---------------------------------------------------------------------------
// Matrix-free Hamiltonian

/// One-flip transition from a basis state to `partner` by flipping `atom`.
/// `row_excited` is true when the atom is excited in the row state, i.e. the
/// matrix element is (Omega/2) e^{-i phi}.
struct Coupling {
  std::uint32_t partner;
  std::uint16_t atom;
  bool row_excited;
};

/// Time- and protocol-independent parts of H over one basis. Within each
/// row the couplings whose flipped atom is empty in the row state come first
/// (matrix element (Omega/2) e^{i phi}), followed by those where it is excited
/// (matrix element (Omega/2) e^{-i phi}).
struct PrecomputedOperators {
  std::vector<std::uint8_t> diag_n;        ///< excitation count per state
  std::vector<double> diag_v;              ///< interaction energy per state
  std::vector<std::uint32_t> row_offsets;  ///< CSR offsets into couplings
  std::vector<std::uint32_t> row_split;    ///< first row_excited coupling per row
  std::vector<Coupling> couplings;
  std::vector<std::uint32_t> partners;     ///< couplings[c].partner, packed

  std::size_t dimension() const { return diag_n.size(); }
  std::span<const Coupling> row(std::size_t idx) const {
    return std::span<const Coupling>(couplings).subspan(row_offsets[idx],
                                                        row_offsets[idx + 1] - row_offsets[idx]);
  }
};

inline PrecomputedOperators precompute_operators(const UnitDiskGraph& g,
                                                 const PhysicalConstants& pc,
                                                 const BasisSet& basis) {
  if (basis.order() != g.order()) {
    throw DomainError("basis order " + std::to_string(basis.order()) +
                      " does not match graph order " + std::to_string(g.order()));
  }
  const InteractionTable table(g, pc);
  const std::size_t dim = basis.size();
  const std::size_t n = g.order();
  PrecomputedOperators ops;
  ops.diag_n.resize(dim);
  ops.diag_v.resize(dim);
  ops.row_offsets.resize(dim + 1, 0);
  ops.row_split.resize(dim, 0);
  ops.couplings.reserve(dim * n / 2);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    const std::uint32_t s = basis.state(idx);
    ops.diag_n[idx] = static_cast<std::uint8_t>(std::popcount(s));
    ops.diag_v[idx] = table.pair_energy(s);
    ops.row_offsets[idx] = static_cast<std::uint32_t>(ops.couplings.size());
    for (const bool excited : {false, true}) {
      if (excited) ops.row_split[idx] = static_cast<std::uint32_t>(ops.couplings.size());
      for (std::size_t k = 0; k < n; ++k) {
        if ((((s >> k) & 1U) != 0) != excited) continue;
        const auto p = basis.index_of(s ^ (std::uint64_t{1} << k));
        if (p < 0) continue;
        ops.couplings.push_back(
            {static_cast<std::uint32_t>(p), static_cast<std::uint16_t>(k), excited});
      }
    }
  }
  ops.row_offsets[dim] = static_cast<std::uint32_t>(ops.couplings.size());
  ops.partners.reserve(ops.couplings.size());
  for (const auto& c : ops.couplings) ops.partners.push_back(c.partner);
  return ops;
}

/// Instantaneous drive values.
struct DriveValues {
  double omega = 0.0;  ///< Rabi amplitude, MHz
  double delta = 0.0;  ///< detuning, MHz
  double phi = 0.0;    ///< phase, rad
};

/// out = H psi with H = (Omega/2) sum_i (e^{i phi}|0><1|_i + h.c.)
///                     - Delta sum_i n_i + sum_{i<j} V_ij n_i n_j.
inline void apply_hamiltonian(std::span<const cplx> psi, std::span<cplx> out,
                              const DriveValues& d, const PrecomputedOperators& ops) {
  const std::size_t dim = ops.dimension();
  if (psi.size() != dim || out.size() != dim) {
    throw DomainError("state length " + std::to_string(psi.size()) +
                      " does not match basis dimension " + std::to_string(dim));
  }
  const double rr = 0.5 * d.omega * std::cos(d.phi);  // raise = rr + i ri
  const double ri = 0.5 * d.omega * std::sin(d.phi);  // lower = rr - i ri
  const std::uint32_t* off = ops.row_offsets.data();
  const std::uint32_t* split = ops.row_split.data();
  const std::uint32_t* part = ops.partners.data();
  const double* dv = ops.diag_v.data();
  const std::uint8_t* dn = ops.diag_n.data();
  const bool drive = d.omega != 0.0;
  for (std::size_t x = 0; x < dim; ++x) {
    const double diag = dv[x] - d.delta * dn[x];
    double re = diag * psi[x].real();
    double im = diag * psi[x].imag();
    if (drive) {
      double ur = 0.0, ui = 0.0, lr = 0.0, li = 0.0;
      for (std::uint32_t c = off[x]; c < split[x]; ++c) {
        ur += psi[part[c]].real();
        ui += psi[part[c]].imag();
      }
      for (std::uint32_t c = split[x]; c < off[x + 1]; ++c) {
        lr += psi[part[c]].real();
        li += psi[part[c]].imag();
      }
      re += rr * (ur + lr) - ri * (ui - li);
      im += rr * (ui + li) + ri * (ur - lr);
    }
    out[x] = cplx(re, im);
  }
}

inline std::vector<cplx> apply_hamiltonian(std::span<const cplx> psi, const DriveValues& d,
                                           const PrecomputedOperators& ops) {
  std::vector<cplx> out(psi.size());
  apply_hamiltonian(psi, out, d, ops);
  return out;
}

}  // namespace rydmis
