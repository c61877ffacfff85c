#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rydmis/error.hpp"
#include "rydmis/graphs.hpp"
#include "rydmis/hamiltonian.hpp"
#include "rydmis/schedules.hpp"

namespace rydmis {

enum class Integrator {
  Adaptive32,  ///< embedded Bogacki-Shampine 3(2) pair, PI step control
  FixedRK2,    ///< explicit midpoint rule with a constant step
};

struct EvolutionConfig {
  Integrator integrator = Integrator::Adaptive32;
  double rel_tol = 1e-8;
  double abs_tol = 1e-8;
  double max_step = 0.05;       ///< us
  double fixed_step = 1e-4;     ///< us, FixedRK2 only
  double min_step = 1e-13;      ///< us, below this the step has underflowed
  double max_norm_drift = 1e-6;
  std::size_t max_steps = 50'000'000;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw DomainError("tolerances must be positive");
    if (!(max_step > 0.0) || !(fixed_step > 0.0)) throw DomainError("step sizes must be positive");
  }
};

/// Everything about one graph that evolutions share read-only.
struct SimulationContext {
  UnitDiskGraph graph;
  PhysicalConstants constants;
  IndependentSetCensus census;
  BasisSet basis;
  PrecomputedOperators ops;
  GraphTraces traces;
  double hp = 0.0;

  static SimulationContext build(const UnitDiskGraph& g, const PhysicalConstants& pc,
                                 Subspace subspace, const BasisLimits& limits = {}) {
    pc.validate();
    auto census = independent_set_census(g);
    auto basis = build_basis(g, subspace, limits);
    auto ops = precompute_operators(g, pc, basis);
    const double hp = hardness_parameter(census);
    return {g, pc, std::move(census), std::move(basis), std::move(ops), graph_traces(g), hp};
  }
};

/// Normalized amplitude vector over a basis.
struct QuantumState {
  std::vector<cplx> amplitudes;

  static QuantumState ground(std::size_t dim) {
    QuantumState s{std::vector<cplx>(dim, cplx{0.0, 0.0})};
    s.amplitudes.at(0) = 1.0;  // basis index 0 is the all-zeros configuration
    return s;
  }

  double norm() const {
    double s = 0.0;
    for (const auto& a : amplitudes) s += std::norm(a);
    return std::sqrt(s);
  }
};

struct IntegrationStats {
  std::size_t step_count = 0;
  std::size_t rejected_steps = 0;
  std::size_t rhs_evaluations = 0;
  double norm_drift = 0.0;  ///< max over accepted steps of | ||psi|| - 1 |
};

struct EvolutionResult {
  QuantumState final_state;
  double p_mis = 0.0;
  std::vector<double> densities;
  IntegrationStats stats;
};

namespace detail {

inline double l2(std::span<const cplx> v) {
  double s = 0.0;
  for (const auto& a : v) s += std::norm(a);
  return std::sqrt(s);
}

// k = -i H(t) y
inline void schrodinger_rhs(const Schedule& s, double t, std::span<const cplx> y,
                            std::span<cplx> k, const PrecomputedOperators& ops) {
  apply_hamiltonian(y, k, s(t), ops);
  for (auto& v : k) v = cplx(v.imag(), -v.real());
}

}  // namespace detail

/// Integrates i dpsi/dt = H(t) psi over [0, t_f] starting from `psi`
/// (modified in place). The state is not renormalized here.
inline IntegrationStats integrate(const Schedule& schedule, const PrecomputedOperators& ops,
                                  std::vector<cplx>& psi, const EvolutionConfig& cfg = {}) {
  cfg.validate();
  const std::size_t dim = ops.dimension();
  if (psi.size() != dim) throw DomainError("state length does not match basis dimension");
  IntegrationStats st;
  const double tf = schedule.duration();
  if (tf <= 0.0) return st;

  std::vector<cplx> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim), ynew(dim);
  const auto track_norm = [&](std::span<const cplx> y) {
    st.norm_drift = std::max(st.norm_drift, std::abs(detail::l2(y) - 1.0));
  };

  if (cfg.integrator == Integrator::FixedRK2) {
    const auto n = static_cast<std::size_t>(std::ceil(tf / cfg.fixed_step - 1e-9));
    const double h = tf / static_cast<double>(n);
    for (std::size_t s = 0; s < n; ++s) {
      const double t = h * static_cast<double>(s);
      detail::schrodinger_rhs(schedule, t, psi, k1, ops);
      for (std::size_t i = 0; i < dim; ++i) tmp[i] = psi[i] + 0.5 * h * k1[i];
      detail::schrodinger_rhs(schedule, std::min(t + 0.5 * h, tf), tmp, k2, ops);
      for (std::size_t i = 0; i < dim; ++i) psi[i] += h * k2[i];
      st.rhs_evaluations += 2;
      ++st.step_count;
      track_norm(psi);
    }
    return st;
  }

  // Bogacki-Shampine 3(2), first-same-as-last.
  constexpr double a21 = 0.5, a32 = 0.75;
  constexpr double b1 = 2.0 / 9.0, b2 = 1.0 / 3.0, b3 = 4.0 / 9.0;
  constexpr double e1 = -5.0 / 72.0, e2 = 1.0 / 12.0, e3 = 1.0 / 9.0, e4 = -1.0 / 8.0;
  constexpr double order = 3.0;
  constexpr double alpha = 0.7 / order, beta = 0.4 / order, safety = 0.9;

  double t = 0.0;
  detail::schrodinger_rhs(schedule, t, psi, k1, ops);
  st.rhs_evaluations = 1;

  // Initial step from the local rate of change.
  double h = std::min(cfg.max_step, tf);
  {
    const double rate = detail::l2(k1);
    const double tol = std::max(cfg.abs_tol, cfg.rel_tol * detail::l2(psi));
    if (rate > 0.0) h = std::min(h, 0.5 * std::cbrt(tol) / rate);
    h = std::max(h, 1e3 * cfg.min_step);
  }
  double err_prev = 1e-4;
  double psi_norm = detail::l2(psi);

  while (t < tf) {
    if (st.step_count + st.rejected_steps >= cfg.max_steps) {
      throw IntegrationError("integration exceeded " + std::to_string(cfg.max_steps) + " steps");
    }
    bool last = false;
    if (t + h >= tf * (1.0 - 1e-14)) {
      h = tf - t;
      last = true;
    }
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = psi[i] + (a21 * h) * k1[i];
    detail::schrodinger_rhs(schedule, t + 0.5 * h, tmp, k2, ops);
    for (std::size_t i = 0; i < dim; ++i) tmp[i] = psi[i] + (a32 * h) * k2[i];
    detail::schrodinger_rhs(schedule, t + 0.75 * h, tmp, k3, ops);
    for (std::size_t i = 0; i < dim; ++i) {
      ynew[i] = psi[i] + h * (b1 * k1[i] + b2 * k2[i] + b3 * k3[i]);
    }
    const double t_new = last ? tf : t + h;
    detail::schrodinger_rhs(schedule, t_new, ynew, k4, ops);
    st.rhs_evaluations += 3;

    double err_sq = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      err_sq += std::norm(h * (e1 * k1[i] + e2 * k2[i] + e3 * k3[i] + e4 * k4[i]));
    }
    const double ynorm = detail::l2(ynew);
    const double scale = std::max(cfg.abs_tol, cfg.rel_tol * std::max(psi_norm, ynorm));
    const double e = std::sqrt(err_sq) / scale;

    if (e <= 1.0) {
      t = t_new;
      psi.swap(ynew);
      k1.swap(k4);
      psi_norm = ynorm;
      ++st.step_count;
      st.norm_drift = std::max(st.norm_drift, std::abs(psi_norm - 1.0));
      const double fac = e == 0.0 ? 5.0 : safety * std::pow(e, -alpha) * std::pow(err_prev, beta);
      err_prev = std::max(e, 1e-4);
      h = std::min(cfg.max_step, h * std::clamp(fac, 0.2, 5.0));
    } else {
      ++st.rejected_steps;
      h *= std::clamp(safety * std::pow(e, -1.0 / order), 0.1, 0.9);
      if (h < cfg.min_step) {
        throw IntegrationError("step size underflow at t = " + std::to_string(t) +
                               " us: the problem is too stiff for an explicit integrator");
      }
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Observables

/// sum over MIS solutions of |<psi|MIS_i>|^2.
inline double p_mis(const QuantumState& state, const BasisSet& basis,
                    const IndependentSetCensus& census) {
  if (state.amplitudes.size() != basis.size()) {
    throw DomainError("state length does not match basis dimension");
  }
  double p = 0.0;
  for (const auto& sol : census.mis_solutions) {
    const auto idx = basis.index_of(sol.to_mask());
    if (idx < 0) {
      throw Error("internal inconsistency: MIS configuration " + sol.str() +
                  " is missing from the simulation basis");
    }
    p += std::norm(state.amplitudes[static_cast<std::size_t>(idx)]);
  }
  return p;
}

/// <n_i> for every atom.
inline std::vector<double> rydberg_density(const QuantumState& state, const BasisSet& basis) {
  std::vector<double> n(basis.order(), 0.0);
  for (std::size_t x = 0; x < basis.size(); ++x) {
    const double w = std::norm(state.amplitudes[x]);
    std::uint32_t m = basis.state(x);
    while (m) {
      n[static_cast<std::size_t>(std::countr_zero(m))] += w;
      m &= m - 1;
    }
  }
  return n;
}

/// Evolves the all-zeros state under `schedule`, renormalizes once at the end
/// (refusing if the norm drifted more than the configured bound), and scores
/// the final state.
inline EvolutionResult evolve(const SimulationContext& ctx, const Schedule& schedule,
                              const EvolutionConfig& cfg = {}) {
  if (schedule.duration() < 0.0) throw DomainError("schedule duration must be >= 0");
  auto state = QuantumState::ground(ctx.basis.size());
  EvolutionResult r;
  r.stats = integrate(schedule, ctx.ops, state.amplitudes, cfg);
  const double norm = state.norm();
  r.stats.norm_drift = std::max(r.stats.norm_drift, std::abs(norm - 1.0));
  if (r.stats.norm_drift > cfg.max_norm_drift) {
    throw IntegrationError("norm drift " + std::to_string(r.stats.norm_drift) +
                           " exceeds " + std::to_string(cfg.max_norm_drift) +
                           "; tighten the integration tolerance");
  }
  for (auto& a : state.amplitudes) a /= norm;
  r.p_mis = p_mis(state, ctx.basis, ctx.census);
  r.densities = rydberg_density(state, ctx.basis);
  r.final_state = std::move(state);
  return r;
}

// ---------------------------------------------------------------------------
// Shot sampling

struct ShotHistogram {
  std::vector<std::uint64_t> size_counts;  ///< repaired independent-set size -> shots
  std::uint64_t mis_hits = 0;              ///< repaired shots that are MIS solutions
  std::uint64_t raw_mis_hits = 0;          ///< shots that were MIS before repair
  std::uint64_t shots = 0;
};

/// Draws `n_shots` configurations from |psi_x|^2, repairs each with the greedy
/// procedure and histograms the independent-set sizes. One engine seeded from
/// `seed` drives both sampling and repair.
inline ShotHistogram sample_and_repair(const QuantumState& state, const BasisSet& basis,
                                       const UnitDiskGraph& g, const IndependentSetCensus& census,
                                       std::uint64_t n_shots, std::uint64_t seed) {
  if (n_shots == 0) throw DomainError("need at least one shot");
  if (state.amplitudes.size() != basis.size()) {
    throw DomainError("state length does not match basis dimension");
  }
  std::vector<double> cdf(basis.size());
  double acc = 0.0;
  for (std::size_t x = 0; x < basis.size(); ++x) {
    acc += std::norm(state.amplitudes[x]);
    cdf[x] = acc;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, acc);
  ShotHistogram h;
  h.size_counts.assign(g.order() + 1, 0);
  h.shots = n_shots;
  const std::size_t mis = census.independence_number;
  for (std::uint64_t s = 0; s < n_shots; ++s) {
    const double r = u(rng);
    auto idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
    idx = std::min(idx, basis.size() - 1);
    const Bitstring raw = basis.bitstring(idx);
    if (raw.count() == mis && is_independent(raw, g)) ++h.raw_mis_hits;
    const Bitstring fixed = greedy_repair(raw, g, rng);
    const std::size_t k = fixed.count();
    ++h.size_counts[k];
    if (k == mis) ++h.mis_hits;
  }
  return h;
}

}  // namespace rydmis
