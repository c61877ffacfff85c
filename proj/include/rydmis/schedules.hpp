#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rydmis/error.hpp"
#include "rydmis/graphs.hpp"
#include "rydmis/hamiltonian.hpp"

namespace rydmis {

// ---------------------------------------------------------------------------
// Piecewise-linear curve

class PiecewiseLinearCurve {
 public:
  PiecewiseLinearCurve() = default;
  PiecewiseLinearCurve(std::vector<double> times, std::vector<double> values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() < 2) throw DomainError("piecewise-linear curve needs >= 2 breakpoints");
    if (times_.size() != values_.size()) {
      throw DomainError("piecewise-linear curve has " + std::to_string(times_.size()) +
                        " times but " + std::to_string(values_.size()) + " values");
    }
    if (times_.front() != 0.0) throw DomainError("piecewise-linear curve must start at t = 0");
    for (std::size_t i = 1; i < times_.size(); ++i) {
      if (!(times_[i] > times_[i - 1])) {
        throw DomainError("piecewise-linear breakpoints must be strictly increasing (index " +
                          std::to_string(i) + ")");
      }
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw DomainError("piecewise-linear curve has a non-finite value");
    }
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }
  double duration() const { return times_.back(); }

  double operator()(double t) const {
    const double tf = times_.back();
    if (t < 0.0 || t > tf * (1.0 + 1e-12)) {
      throw DomainError("piecewise-linear curve evaluated at t = " + std::to_string(t) +
                        " outside [0, " + std::to_string(tf) + "]");
    }
    if (t >= tf) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times_.begin()) - 1;
    const double w = (t - times_[k]) / (times_[k + 1] - times_[k]);
    return values_[k] + w * (values_[k + 1] - values_[k]);
  }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

/// Piecewise-constant curve: values[i] holds on [times[i], times[i+1]).
class PiecewiseConstantCurve {
 public:
  PiecewiseConstantCurve() = default;
  PiecewiseConstantCurve(std::vector<double> times, std::vector<double> values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() < 2 || values_.size() + 1 != times_.size()) {
      throw DomainError("piecewise-constant curve needs n+1 times for n values");
    }
    for (std::size_t i = 1; i < times_.size(); ++i) {
      if (!(times_[i] > times_[i - 1])) {
        throw DomainError("piecewise-constant breakpoints must be strictly increasing");
      }
    }
  }

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& values() const { return values_; }

  double operator()(double t) const {
    if (t <= times_.front()) return values_.front();
    if (t >= times_.back()) return values_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
  }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Protocol parameters

enum class Protocol { Lin4, Lin6, CD, Hardware };

inline std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::Lin4: return "lin4";
    case Protocol::Lin6: return "lin6";
    case Protocol::CD: return "cd";
    case Protocol::Hardware: return "hardware";
  }
  return "?";
}

inline Protocol parse_protocol(const std::string& s) {
  if (s == "lin4") return Protocol::Lin4;
  if (s == "lin6") return Protocol::Lin6;
  if (s == "cd") return Protocol::CD;
  throw DomainError("unknown protocol '" + s + "' (expected lin4, lin6 or cd)");
}

inline std::vector<std::string> parameter_names(Protocol p) {
  switch (p) {
    case Protocol::Lin4: return {"tau_i", "tau_f", "delta_i", "delta_f"};
    case Protocol::Lin6: return {"tau_i", "tau_f", "delta_i", "delta_f", "tau_m", "delta_m"};
    case Protocol::CD: return {"delta_i", "delta_f", "nu"};
    case Protocol::Hardware: return {};
  }
  return {};
}

struct Lin4Params {
  double tau_i = 0.0;    ///< Rabi up-ramp, us
  double tau_f = 0.0;    ///< Rabi down-ramp, us
  double delta_i = 0.0;  ///< MHz, < 0
  double delta_f = 0.0;  ///< MHz, > 0

  std::vector<double> to_vector() const { return {tau_i, tau_f, delta_i, delta_f}; }
  static Lin4Params from_vector(std::span<const double> v) {
    if (v.size() != 4) throw DomainError("lin4 expects 4 parameters");
    return {v[0], v[1], v[2], v[3]};
  }
};

struct Lin6Params {
  double tau_i = 0.0;
  double tau_f = 0.0;
  double delta_i = 0.0;
  double delta_f = 0.0;
  double tau_m = 0.0;    ///< interior detuning knot time, us
  double delta_m = 0.0;  ///< interior detuning knot value, MHz

  std::vector<double> to_vector() const { return {tau_i, tau_f, delta_i, delta_f, tau_m, delta_m}; }
  static Lin6Params from_vector(std::span<const double> v) {
    if (v.size() != 6) throw DomainError("lin6 expects 6 parameters");
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }
};

struct CDParams {
  double delta_i = 0.0;
  double delta_f = 0.0;
  double nu = 0.0;  ///< interaction interpolation strength, MHz

  std::vector<double> to_vector() const { return {delta_i, delta_f, nu}; }
  static CDParams from_vector(std::span<const double> v) {
    if (v.size() != 3) throw DomainError("cd expects 3 parameters");
    return {v[0], v[1], v[2]};
  }
};

/// Unit-strength (V0 = 1) interaction traces of a graph.
struct GraphTraces {
  double t1_0 = 0.0;
  double t2_0 = 0.0;
};

// ---------------------------------------------------------------------------
// Schedule

/// Smooth adiabatic base functions with analytic first derivatives.
struct AdiabaticBase {
  double delta_i = 0.0;
  double delta_f = 0.0;
  double t_f = 1.0;
  double omega_max = 15.8;

  struct Sample {
    double omega, omega_dot, delta, delta_dot;
  };

  /// theta = pi t / t_f; Omega = Omega_max sin^2((pi/2) sin theta),
  /// Delta = (Di+Df)/2 + ((Di-Df)/2) cos theta.
  Sample operator()(double t) const {
    constexpr double pi = std::numbers::pi;
    const double theta = pi * t / t_f;
    const double theta_dot = pi / t_f;
    // Endpoints pinned so that sin(theta) is exactly zero there.
    const double sin_t = (t <= 0.0 || t >= t_f) ? 0.0 : std::sin(theta);
    const double cos_t = t <= 0.0 ? 1.0 : (t >= t_f ? -1.0 : std::cos(theta));
    const double u = 0.5 * pi * sin_t;
    const double su = std::sin(u);
    const double omega = omega_max * su * su;
    const double omega_dot = omega_max * std::sin(2.0 * u) * 0.5 * pi * cos_t * theta_dot;
    const double half_sum = 0.5 * (delta_i + delta_f);
    const double half_diff = 0.5 * (delta_i - delta_f);
    const double delta = t <= 0.0 ? delta_i : (t >= t_f ? delta_f : half_sum + half_diff * cos_t);
    return {omega, omega_dot, delta, -half_diff * sin_t * theta_dot};
  }
};

inline AdiabaticBase cd_base(double delta_i, double delta_f, double t_f, double omega_max) {
  if (!(t_f > 0.0)) throw DomainError("cd base needs t_f > 0");
  return {delta_i, delta_f, t_f, omega_max};
}

/// Counterdiabatic drive parameters after rescaling.
struct CounterdiabaticShape {
  AdiabaticBase base;
  double t1 = 0.0;    ///< nu * T1^(0)
  double t2 = 0.0;    ///< nu^2 * T2^(0)
  double kappa = 1.0; ///< scale applied to the adiabatic Rabi amplitude

  struct Sample {
    double omega_ad;  ///< kappa-scaled adiabatic amplitude
    double omega_cd;
    double omega;     ///< sqrt(omega_ad^2 + omega_cd^2)
    double delta;
    double phi;
    double denominator;
  };

  Sample operator()(double t) const {
    const auto b = base(t);
    const double om = kappa * b.omega;
    const double om_dot = kappa * b.omega_dot;
    const double numerator = om * b.delta_dot - om_dot * b.delta + om_dot * t1;
    const double denominator = om * om + b.delta * b.delta - 2.0 * b.delta * t1 + t2;
    const double cd = denominator > 0.0 ? numerator / denominator : 0.0;
    const double phi = (om == 0.0 && cd == 0.0) ? 0.0 : std::atan2(cd, om);
    return {om, cd, std::hypot(om, cd), b.delta, phi, denominator};
  }
};

struct LinearShape {
  PiecewiseLinearCurve omega;
  PiecewiseLinearCurve delta;
};

struct HardwareShape {
  PiecewiseLinearCurve omega;
  PiecewiseLinearCurve delta;
  PiecewiseConstantCurve phi;
  int phase_sign = 1;  ///< applied on export only; phi is stored in the simulator convention
  double max_clamp = 0.0;  ///< largest |Omega| correction applied when clamping
};

/// Time-dependent drive (Omega(t), Delta(t), phi(t)) on [0, t_f], tagged with
/// the protocol family and the parameters it was built from.
class Schedule {
 public:
  using Shape = std::variant<LinearShape, CounterdiabaticShape, HardwareShape>;

  Schedule(Protocol family, std::vector<double> params, double duration, Shape shape)
      : family_(family), params_(std::move(params)), duration_(duration), shape_(std::move(shape)) {}

  Protocol family() const { return family_; }
  const std::vector<double>& params() const { return params_; }
  double duration() const { return duration_; }
  const Shape& shape() const { return shape_; }

  DriveValues operator()(double t) const {
    return std::visit(
        [t](const auto& s) -> DriveValues {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, LinearShape>) {
            return {s.omega(t), s.delta(t), 0.0};
          } else if constexpr (std::is_same_v<S, CounterdiabaticShape>) {
            const auto c = s(t);
            return {c.omega, c.delta, c.phi};
          } else {
            return {s.omega(t), s.delta(t), s.phi(t)};
          }
        },
        shape_);
  }

  double omega(double t) const { return (*this)(t).omega; }
  double delta(double t) const { return (*this)(t).delta; }
  double phi(double t) const { return (*this)(t).phi; }

  /// Counterdiabatic rescale factor (1 for other families).
  double kappa() const {
    if (const auto* cd = std::get_if<CounterdiabaticShape>(&shape_)) return cd->kappa;
    return 1.0;
  }

 private:
  Protocol family_;
  std::vector<double> params_;
  double duration_;
  Shape shape_;
};

/// Boundary conditions and amplitude range every emitted schedule satisfies.
/// Returns the list of violations (empty when valid).
inline std::vector<std::string> schedule_violations(const Schedule& s, const PhysicalConstants& pc,
                                                    std::size_t samples = 2000,
                                                    double omega_tol = 1e-4) {
  std::vector<std::string> out;
  const double tf = s.duration();
  if (!(tf > 0.0)) out.push_back("duration must be positive");
  if (s.omega(0.0) != 0.0) out.push_back("Omega(0) must be exactly 0");
  if (s.omega(tf) != 0.0) out.push_back("Omega(t_f) must be exactly 0");
  if (!(s.delta(0.0) <= -pc.delta_noise)) {
    out.push_back("Delta(0) = " + std::to_string(s.delta(0.0)) + " must be <= -" +
                  std::to_string(pc.delta_noise));
  }
  if (!(s.delta(tf) > 0.0)) out.push_back("Delta(t_f) must be > 0");
  for (std::size_t k = 0; k <= samples; ++k) {
    const double t = tf * static_cast<double>(k) / static_cast<double>(samples);
    const double om = s.omega(t);
    if (om < -omega_tol || om > pc.omega_max + omega_tol || !std::isfinite(om)) {
      out.push_back("Omega(" + std::to_string(t) + ") = " + std::to_string(om) +
                    " outside [0, Omega_max]");
      break;
    }
  }
  return out;
}

namespace detail {

inline std::string join_violations(const std::string& what, const std::vector<std::string>& v) {
  std::string msg = what + ":";
  for (const auto& e : v) msg += " " + e + ";";
  msg.pop_back();
  return msg;
}

// Times/values for the trapezoidal Rabi shape, dropping a zero-length plateau.
inline PiecewiseLinearCurve trapezoid(double tau_i, double tau_f, double t_f, double omega_max) {
  std::vector<double> t{0.0, tau_i};
  std::vector<double> v{0.0, omega_max};
  if (t_f - tau_f > tau_i) {
    t.push_back(t_f - tau_f);
    v.push_back(omega_max);
  }
  t.push_back(t_f);
  v.push_back(0.0);
  return {std::move(t), std::move(v)};
}

inline void check_ramps(double tau_i, double tau_f, double t_f, std::vector<std::string>& errs) {
  if (!(t_f > 0.0)) errs.push_back("t_f must be positive");
  if (!(tau_i > 0.0)) errs.push_back("tau_i must be > 0 (zero-length Rabi ramp)");
  if (!(tau_f > 0.0)) errs.push_back("tau_f must be > 0 (zero-length Rabi ramp)");
  if (!(tau_i + tau_f <= t_f * (1.0 + 1e-12))) errs.push_back("tau_i + tau_f must be <= t_f");
}

inline void check_detunings(double delta_i, double delta_f, const PhysicalConstants& pc,
                            std::vector<std::string>& errs) {
  if (!(delta_i <= -pc.delta_noise)) {
    errs.push_back("delta_i = " + std::to_string(delta_i) + " must be <= -" +
                   std::to_string(pc.delta_noise));
  }
  if (!(delta_f > 0.0)) errs.push_back("delta_f must be > 0");
}

}  // namespace detail

/// Lin4: trapezoidal Omega (ramp up over tau_i, plateau at Omega_max, ramp
/// down over tau_f) with a single linear detuning sweep delta_i -> delta_f.
inline Schedule lin4_schedule(const Lin4Params& p, double t_f, const PhysicalConstants& pc = {}) {
  std::vector<std::string> errs;
  detail::check_ramps(p.tau_i, p.tau_f, t_f, errs);
  detail::check_detunings(p.delta_i, p.delta_f, pc, errs);
  if (!errs.empty()) throw DomainError(detail::join_violations("invalid lin4 parameters", errs));
  LinearShape shape{detail::trapezoid(p.tau_i, std::min(p.tau_f, t_f - p.tau_i), t_f, pc.omega_max),
                    PiecewiseLinearCurve({0.0, t_f}, {p.delta_i, p.delta_f})};
  return Schedule(Protocol::Lin4, p.to_vector(), t_f, std::move(shape));
}

/// Lin6: Lin4 Rabi shape, detuning through (0, delta_i), (tau_m, delta_m),
/// (t_f, delta_f).
inline Schedule lin6_schedule(const Lin6Params& p, double t_f, const PhysicalConstants& pc = {}) {
  std::vector<std::string> errs;
  detail::check_ramps(p.tau_i, p.tau_f, t_f, errs);
  detail::check_detunings(p.delta_i, p.delta_f, pc, errs);
  if (!(p.tau_m > 0.0 && p.tau_m < t_f)) errs.push_back("tau_m must lie in (0, t_f)");
  if (!std::isfinite(p.delta_m)) errs.push_back("delta_m must be finite");
  if (!errs.empty()) throw DomainError(detail::join_violations("invalid lin6 parameters", errs));
  LinearShape shape{
      detail::trapezoid(p.tau_i, std::min(p.tau_f, t_f - p.tau_i), t_f, pc.omega_max),
      PiecewiseLinearCurve({0.0, p.tau_m, t_f}, {p.delta_i, p.delta_m, p.delta_f})};
  return Schedule(Protocol::Lin6, p.to_vector(), t_f, std::move(shape));
}

// ---------------------------------------------------------------------------
// Counterdiabatic drive

/// N T1 = sum_{i<j} v_ij and N T2 = (1/2) sum_{i<=j} sum_{k != i,j} v_ik v_kj
/// for a symmetric coupling matrix with zero diagonal.
inline GraphTraces traces_from_couplings(std::span<const double> v, std::size_t n) {
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      if (j > i) s1 += v[i * n + j];
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        s2 += v[i * n + k] * v[k * n + j];
      }
    }
  }
  const double nn = static_cast<double>(n);
  return {s1 / nn, 0.5 * s2 / nn};
}

/// Traces with unit-strength couplings v_ij = (a / d_ij)^6.
inline GraphTraces graph_traces(const UnitDiskGraph& g) {
  const std::size_t n = g.order();
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d2 = static_cast<double>(distance2(g.site(i), g.site(j)));
      v[i * n + j] = 1.0 / (d2 * d2 * d2);
    }
  }
  return traces_from_couplings(v, n);
}

/// Traces with the adjacency matrix in place of the interactions.
inline GraphTraces graph_traces_adjacency(const UnitDiskGraph& g) {
  const std::size_t n = g.order();
  std::vector<double> v(n * n, 0.0);
  for (const auto& [i, j] : g.edges()) {
    v[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)] = 1.0;
    v[static_cast<std::size_t>(j) * n + static_cast<std::size_t>(i)] = 1.0;
  }
  return traces_from_couplings(v, n);
}

struct CDDriveOptions {
  std::size_t grid = 4000;         ///< samples for the amplitude maximum
  double kappa_min = 1e-3;
  double kappa_tol_mhz = 1e-4;     ///< |max Omega - Omega_max| after rescale
  double nu_max = std::numeric_limits<double>::infinity();  ///< C6 / a^6
};

namespace detail {

struct PeakSearch {
  double value;
  double time;
};

// Maximum of f on [0, tf]: dense grid, then golden-section refinement around
// the best few grid maxima.
template <class F>
PeakSearch refine_max(F&& f, double tf, std::size_t grid) {
  std::vector<double> vals(grid + 1);
  for (std::size_t k = 0; k <= grid; ++k) vals[k] = f(tf * static_cast<double>(k) / grid);
  std::vector<std::size_t> peaks;
  for (std::size_t k = 0; k <= grid; ++k) {
    const bool left = k == 0 || vals[k] >= vals[k - 1];
    const bool right = k == grid || vals[k] >= vals[k + 1];
    if (left && right) peaks.push_back(k);
  }
  std::sort(peaks.begin(), peaks.end(), [&](auto a, auto b) { return vals[a] > vals[b]; });
  if (peaks.size() > 3) peaks.resize(3);
  PeakSearch best{-std::numeric_limits<double>::infinity(), 0.0};
  const double h = tf / static_cast<double>(grid);
  for (auto k : peaks) {
    double a = std::max(0.0, (static_cast<double>(k) - 1.0) * h);
    double b = std::min(tf, (static_cast<double>(k) + 1.0) * h);
    constexpr double g = 0.6180339887498949;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 60 && b - a > 1e-14 * tf; ++it) {
      if (fc > fd) {
        b = d; d = c; fd = fc; c = b - g * (b - a); fc = f(c);
      } else {
        a = c; c = d; fc = fd; d = a + g * (b - a); fd = f(d);
      }
    }
    for (auto [v, t] : {std::pair{vals[k], h * static_cast<double>(k)}, std::pair{fc, c},
                        std::pair{fd, d}}) {
      if (v > best.value) best = {v, t};
    }
  }
  return best;
}

}  // namespace detail

/// Graph-dependent counterdiabatic schedule. The phase carries the
/// variational gauge term; when the combined amplitude would exceed
/// Omega_max the adiabatic amplitude is scaled by kappa (found by bisection)
/// and the CD term recomputed from the scaled amplitude.
inline Schedule cd_drive(const AdiabaticBase& base, const GraphTraces& traces, double nu,
                         const PhysicalConstants& pc = {}, const CDDriveOptions& opt = {}) {
  std::vector<std::string> errs;
  if (!(nu >= 0.0 && nu <= opt.nu_max)) {
    errs.push_back("nu = " + std::to_string(nu) + " outside [0, " + std::to_string(opt.nu_max) +
                   "]");
  }
  detail::check_detunings(base.delta_i, base.delta_f, pc, errs);
  if (!(base.t_f > 0.0)) errs.push_back("t_f must be positive");
  if (!errs.empty()) throw DomainError(detail::join_violations("invalid cd parameters", errs));

  CounterdiabaticShape shape{base, traces.t1_0 * nu, traces.t2_0 * nu * nu, 1.0};
  const double tf = base.t_f;

  for (std::size_t k = 0; k <= opt.grid; ++k) {
    const double t = tf * static_cast<double>(k) / static_cast<double>(opt.grid);
    if (!(shape(t).denominator > 0.0)) {
      throw DomainError("counterdiabatic denominator vanishes at t = " + std::to_string(t) +
                        " us (nu = " + std::to_string(nu) + ")");
    }
  }

  const auto peak = [&](double kappa) {
    CounterdiabaticShape s = shape;
    s.kappa = kappa;
    return detail::refine_max([&](double t) { return s(t).omega; }, tf, opt.grid).value;
  };
  if (peak(1.0) > pc.omega_max) {
    // The peak is not monotone in kappa: shrinking Omega_ad can enlarge the
    // CD term where Delta_ad crosses zero. Bracket the largest feasible kappa
    // on a log grid, then bisect.
    constexpr int kScan = 48;
    const double lmin = std::log(opt.kappa_min);
    double lo = -1.0, hi = 1.0, peak_lo = 0.0;
    for (int k = kScan - 1; k >= 0; --k) {
      const double kap = std::exp(lmin * (1.0 - static_cast<double>(k) / kScan));
      const double pk = peak(kap);
      if (pk <= pc.omega_max) {
        lo = kap;
        peak_lo = pk;
        break;
      }
      hi = kap;
    }
    if (lo < 0.0) {
      throw DomainError("counterdiabatic amplitude exceeds Omega_max for every kappa in [" +
                        std::to_string(opt.kappa_min) + ", 1]");
    }
    for (int it = 0; it < 200 && pc.omega_max - peak_lo > opt.kappa_tol_mhz; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double pm = peak(mid);
      if (pm > pc.omega_max) {
        hi = mid;
      } else {
        lo = mid;
        peak_lo = pm;
      }
    }
    shape.kappa = lo;
  }
  return Schedule(Protocol::CD, {base.delta_i, base.delta_f, nu}, tf, shape);
}

inline Schedule cd_schedule(const CDParams& p, double t_f, const GraphTraces& traces,
                            const PhysicalConstants& pc = {}, const CDDriveOptions& opt = {}) {
  return cd_drive(cd_base(p.delta_i, p.delta_f, t_f, pc.omega_max), traces, p.nu, pc, opt);
}

// ---------------------------------------------------------------------------
// Hardness-parametrized schedule models

/// Saturating per-parameter model p(h) = p_inf + (p_0 - p_inf) exp(-h / h_p).
struct SaturatingCurve {
  double p0 = 0.0;
  double p_inf = 0.0;
  double h_p = 1.0;
  double r2 = 1.0;
  double rms_residual = 0.0;
  bool degenerate = false;

  double operator()(double h) const { return p_inf + (p0 - p_inf) * std::exp(-h / h_p); }
};

/// Fitted HP -> parameter map for one protocol family.
struct FitModel {
  Protocol family = Protocol::Lin4;
  double t_f = 1.0;
  std::vector<std::string> names;
  std::vector<SaturatingCurve> curves;
  std::vector<double> hp;         ///< fitted sample HPs
  std::vector<std::vector<double>> residuals;  ///< per parameter, per sample
};

/// Reference scales used by the HP models.
struct ModelContext {
  double t_f = 1.0;
  double delta_ub = 0.0;  ///< recommended upper detuning V0 / 8
  double delta_noise = 1.0;
};

enum class ModelKind { Limit, Fitted };

/// Hardness-limit parameters read off the optimized schedules.
inline std::vector<double> hp_limit_params(Protocol family, const ModelContext& ctx) {
  const double tf = ctx.t_f;
  const double ub = ctx.delta_ub;
  switch (family) {
    case Protocol::Lin4: return {tf / 2.0, tf / 10.0, -ub / 2.0, ub};
    case Protocol::Lin6: return {0.22 * tf, 0.12 * tf, -0.83 * ub, ub, 0.34 * tf, 0.36 * ub};
    case Protocol::CD: return {-ub / 10.0, ub, 4.30};
    case Protocol::Hardware: break;
  }
  throw DomainError("no hardness model for hardware programs");
}

/// Parameters for hardness `hp` from the limit constants or a fitted model.
/// Fitted values are clamped into the family's validity region.
inline std::vector<double> hp_schedule_model(double hp, Protocol family, ModelKind kind,
                                             const ModelContext& ctx,
                                             const FitModel* fitted = nullptr) {
  if (!(hp > 0.0)) throw DomainError("hardness parameter must be positive");
  if (kind == ModelKind::Limit) return hp_limit_params(family, ctx);
  if (fitted == nullptr || fitted->curves.empty()) {
    throw DomainError("fitted " + to_string(family) + " model requested but none was fitted");
  }
  if (fitted->family != family) {
    throw DomainError("fitted model is for " + to_string(fitted->family) + ", not " +
                      to_string(family));
  }
  std::vector<double> p;
  for (const auto& c : fitted->curves) p.push_back(c(hp));
  const double tf = ctx.t_f;
  const double tmin = 1e-3 * tf;
  switch (family) {
    case Protocol::Lin4:
    case Protocol::Lin6:
      p[0] = std::clamp(p[0], tmin, tf - tmin);
      p[1] = std::clamp(p[1], tmin, tf - p[0]);
      p[2] = std::min(p[2], -ctx.delta_noise);
      p[3] = std::max(p[3], 1e-3);
      if (family == Protocol::Lin6) p[4] = std::clamp(p[4], tmin, tf - tmin);
      break;
    case Protocol::CD:
      p[0] = std::min(p[0], -ctx.delta_noise);
      p[1] = std::max(p[1], 1e-3);
      p[2] = std::max(p[2], 0.0);
      break;
    case Protocol::Hardware: break;
  }
  return p;
}

/// Builds a schedule of `family` from a parameter vector.
inline Schedule make_schedule(Protocol family, std::span<const double> params, double t_f,
                              const PhysicalConstants& pc, const GraphTraces& traces = {},
                              const CDDriveOptions& cd = {}) {
  switch (family) {
    case Protocol::Lin4: return lin4_schedule(Lin4Params::from_vector(params), t_f, pc);
    case Protocol::Lin6: return lin6_schedule(Lin6Params::from_vector(params), t_f, pc);
    case Protocol::CD: return cd_schedule(CDParams::from_vector(params), t_f, traces, pc, cd);
    case Protocol::Hardware: break;
  }
  throw DomainError("hardware programs are not built from parameters");
}

// ---------------------------------------------------------------------------
// Hardware discretization

/// Resamples a schedule onto a uniform grid of `step_us`: Omega and Delta are
/// piecewise linear through the grid samples, phi is piecewise constant with
/// each interval taking its midpoint value. A duration that is not a multiple
/// of the step is padded with Omega = 0 and Delta held at Delta(t_f).
inline Schedule discretize_for_hardware(const Schedule& s, double step_us,
                                        const PhysicalConstants& pc = {}, int phase_sign = 1) {
  if (!(step_us >= pc.hw_step_us * (1.0 - 1e-12))) {
    throw DomainError("step " + std::to_string(step_us) + " us is below the hardware minimum " +
                      std::to_string(pc.hw_step_us) + " us");
  }
  if (phase_sign != 1 && phase_sign != -1) throw DomainError("phase sign must be +1 or -1");
  const double tf = s.duration();
  const double ratio = tf / step_us;
  std::size_t n = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio)) {
    n = static_cast<std::size_t>(std::ceil(ratio));
  }
  n = std::max<std::size_t>(n, 1);
  const double padded = static_cast<double>(n) * step_us;
  const bool exact = std::abs(padded - tf) <= 1e-9 * std::max(1.0, tf);

  std::vector<double> times(n + 1), om(n + 1), de(n + 1), ph(n);
  double max_clamp = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    times[k] = k == n && exact ? tf : static_cast<double>(k) * step_us;
    const double t = std::min(times[k], tf);
    double o = times[k] >= tf ? 0.0 : s.omega(t);
    const double c = std::clamp(o, 0.0, pc.omega_max);
    max_clamp = std::max(max_clamp, std::abs(c - o));
    om[k] = c;
    de[k] = s.delta(t);
  }
  om.front() = 0.0;
  om.back() = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double mid = 0.5 * (times[k] + times[k + 1]);
    ph[k] = mid <= tf ? s.phi(mid) : 0.0;
  }
  HardwareShape shape{PiecewiseLinearCurve(times, std::move(om)),
                      PiecewiseLinearCurve(times, std::move(de)),
                      PiecewiseConstantCurve(times, std::move(ph)), phase_sign, max_clamp};
  return Schedule(Protocol::Hardware, s.params(), times.back(), std::move(shape));
}

/// Number of uniform intervals in a hardware program.
inline std::size_t hardware_intervals(const Schedule& hw) {
  const auto* h = std::get_if<HardwareShape>(&hw.shape());
  if (h == nullptr) throw DomainError("not a hardware program");
  return h->phi.values().size();
}

}  // namespace rydmis
