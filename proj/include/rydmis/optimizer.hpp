#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rydmis/bounds.hpp"
#include "rydmis/dataset.hpp"
#include "rydmis/error.hpp"
#include "rydmis/evolution.hpp"
#include "rydmis/io.hpp"
#include "rydmis/parallel.hpp"
#include "rydmis/schedules.hpp"

namespace rydmis {

inline constexpr const char* kCodeVersion = "rydmis 1.0.0";

// ---------------------------------------------------------------------------
// Nelder-Mead

struct SimplexConfig {
  std::size_t max_evals = 400;  ///< total objective evaluations over all restarts
  double x_tol = 1e-4;          ///< simplex diameter in unit coordinates
  double f_tol = 1e-5;
  std::size_t restarts = 2;
  double initial_scale = 0.1;   ///< fraction of each box

  void validate() const {
    if (max_evals == 0 || !(x_tol > 0.0) || !(f_tol > 0.0) || !(initial_scale > 0.0)) {
      throw DomainError("simplex settings must be positive");
    }
  }
};

struct SimplexResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  std::size_t evals = 0;
  std::size_t restarts_used = 0;
};

/// Minimizes f over R^d (standard reflection/expansion/contraction/shrink
/// coefficients 1, 2, 1/2, 1/2). `scale` holds the initial edge length per
/// axis. Restart r starts from the incumbent with edges scaled by 1/2^r and
/// random signs drawn from `rng`.
template <class F>
SimplexResult nelder_mead(F&& f, std::vector<double> x0, std::vector<double> scale,
                          const SimplexConfig& cfg, std::mt19937_64& rng,
                          const std::function<double(const std::vector<double>&,
                                                     const std::vector<double>&)>& diameter) {
  cfg.validate();
  const std::size_t d = x0.size();
  SimplexResult best;
  best.x = x0;
  std::size_t evals = 0;
  const auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    if (v < best.f) {
      best.f = v;
      best.x = x;
    }
    return v;
  };
  std::uniform_int_distribution<int> coin(0, 1);

  for (std::size_t run = 0; run <= cfg.restarts && evals < cfg.max_evals; ++run) {
    best.restarts_used = run;
    const std::vector<double> start = run == 0 ? x0 : best.x;
    const double shrink = std::ldexp(1.0, -static_cast<int>(run));
    std::vector<std::vector<double>> pts(d + 1, start);
    std::vector<double> fv(d + 1);
    fv[0] = run == 0 ? eval(start) : best.f;
    for (std::size_t k = 0; k < d; ++k) {
      const double sign = run == 0 ? 1.0 : (coin(rng) ? 1.0 : -1.0);
      pts[k + 1][k] += sign * shrink * scale[k];
      if (evals >= cfg.max_evals) break;
      fv[k + 1] = eval(pts[k + 1]);
    }
    if (evals >= cfg.max_evals) break;

    std::vector<std::size_t> idx(d + 1);
    while (evals < cfg.max_evals) {
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
      const auto lo = idx.front(), hi = idx.back(), second = idx[d - 1];
      double dia = 0.0;
      for (std::size_t k = 1; k <= d; ++k) dia = std::max(dia, diameter(pts[idx[k]], pts[lo]));
      const double spread = std::abs(fv[hi] - fv[lo]);
      if (dia < cfg.x_tol && spread < cfg.f_tol) break;
      if (dia < 1e-3 * cfg.x_tol) break;  // collapsed

      std::vector<double> c(d, 0.0);
      for (std::size_t k = 0; k <= d; ++k) {
        if (k == hi) continue;
        for (std::size_t i = 0; i < d; ++i) c[i] += pts[k][i] / static_cast<double>(d);
      }
      const auto along = [&](double t) {
        std::vector<double> x(d);
        for (std::size_t i = 0; i < d; ++i) x[i] = c[i] + t * (pts[hi][i] - c[i]);
        return x;
      };
      const auto xr = along(-1.0);
      const double fr = eval(xr);
      if (fr < fv[lo]) {
        if (evals >= cfg.max_evals) {
          pts[hi] = xr;
          fv[hi] = fr;
          break;
        }
        const auto xe = along(-2.0);
        const double fe = eval(xe);
        if (fe < fr) {
          pts[hi] = xe;
          fv[hi] = fe;
        } else {
          pts[hi] = xr;
          fv[hi] = fr;
        }
        continue;
      }
      if (fr < fv[second]) {
        pts[hi] = xr;
        fv[hi] = fr;
        continue;
      }
      if (evals >= cfg.max_evals) break;
      const bool outside = fr < fv[hi];
      const auto xc = along(outside ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[hi])) {
        pts[hi] = xc;
        fv[hi] = fc;
        continue;
      }
      for (std::size_t k = 0; k <= d && evals < cfg.max_evals; ++k) {
        if (k == lo) continue;
        for (std::size_t i = 0; i < d; ++i) pts[k][i] = pts[lo][i] + 0.5 * (pts[k][i] - pts[lo][i]);
        fv[k] = eval(pts[k]);
      }
    }
  }
  best.evals = evals;
  return best;
}

// ---------------------------------------------------------------------------
// Box reparametrization

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double logit(double u) { return std::log(u / (1.0 - u)); }

/// Maps unit coordinates u in (0,1)^d to family parameters. Every u maps to
/// a parameter vector satisfying the family's invariants, so the optimizer
/// never evaluates an invalid schedule.
struct ParameterSpace {
  Protocol family = Protocol::Lin4;
  double t_f = 1.0;
  double delta_scale = 1.0;  ///< MHz; detuning boxes are multiples of this
  double delta_noise = 1.0;
  double nu_max = 1.0;

  std::size_t dimension() const { return parameter_names(family).size(); }

  // Lin: tau_i = t_f * lerp(0.01, 0.99, u0); tau_f = (t_f - tau_i) * lerp(0.01, 0.99, u1).
  static double lerp(double a, double b, double u) { return a + (b - a) * u; }
  static double unlerp(double a, double b, double v) { return (v - a) / (b - a); }

  double di_lo() const { return -2.0 * delta_scale; }
  double di_hi() const { return -delta_noise; }
  double df_lo() const { return 0.02 * delta_scale; }
  double df_hi() const { return delta_scale; }

  std::vector<double> decode(const std::vector<double>& u) const {
    switch (family) {
      case Protocol::Lin4:
      case Protocol::Lin6: {
        const double ti = t_f * lerp(0.01, 0.99, u[0]);
        const double tf = (t_f - ti) * lerp(0.01, 0.99, u[1]);
        std::vector<double> p{ti, tf, lerp(di_lo(), di_hi(), u[2]), lerp(df_lo(), df_hi(), u[3])};
        if (family == Protocol::Lin6) {
          p.push_back(t_f * lerp(0.01, 0.99, u[4]));
          p.push_back(lerp(-2.0 * delta_scale, 2.0 * delta_scale, u[5]));
        }
        return p;
      }
      case Protocol::CD:
        return {lerp(di_lo(), di_hi(), u[0]), lerp(df_lo(), df_hi(), u[1]), lerp(0.0, nu_max, u[2])};
      case Protocol::Hardware: break;
    }
    throw DomainError("hardware programs have no parameter space");
  }

  /// Inverse of decode, clamped into the open unit box.
  std::vector<double> encode(const std::vector<double>& p) const {
    const auto c = [](double u) { return std::clamp(u, 1e-6, 1.0 - 1e-6); };
    switch (family) {
      case Protocol::Lin4:
      case Protocol::Lin6: {
        const double u0 = c(unlerp(0.01, 0.99, p[0] / t_f));
        const double ti = t_f * lerp(0.01, 0.99, u0);
        std::vector<double> u{u0, c(unlerp(0.01, 0.99, p[1] / (t_f - ti))),
                              c(unlerp(di_lo(), di_hi(), p[2])), c(unlerp(df_lo(), df_hi(), p[3]))};
        if (family == Protocol::Lin6) {
          u.push_back(c(unlerp(0.01, 0.99, p[4] / t_f)));
          u.push_back(c(unlerp(-2.0 * delta_scale, 2.0 * delta_scale, p[5])));
        }
        return u;
      }
      case Protocol::CD:
        return {c(unlerp(di_lo(), di_hi(), p[0])), c(unlerp(df_lo(), df_hi(), p[1])),
                c(unlerp(0.0, nu_max, p[2]))};
      case Protocol::Hardware: break;
    }
    throw DomainError("hardware programs have no parameter space");
  }
};

// ---------------------------------------------------------------------------
// Single-graph optimization

struct OptimizationProblem {
  std::shared_ptr<const SimulationContext> context;
  Protocol family = Protocol::Lin4;
  double t_f = 1.0;
  ParameterSpace space;
  CDDriveOptions cd{};
  /// Objective integrator settings; looser than the reporting settings.
  EvolutionConfig search{};
  /// Settings for the final re-evaluation of the best point.
  EvolutionConfig report{};
  std::optional<std::vector<double>> initial;  ///< family params; default HP-limit model
};

inline EvolutionConfig default_search_config() {
  EvolutionConfig c;
  c.rel_tol = 1e-6;
  c.abs_tol = 1e-6;
  c.max_norm_drift = 1e-3;
  return c;
}

/// Problem with boxes scaled by the recommended upper detuning V0/8.
inline OptimizationProblem make_problem(const UnitDiskGraph& g, Protocol family, double t_f,
                                        const PhysicalConstants& pc = {},
                                        Subspace subspace = Subspace::NearestNeighbor,
                                        const BasisLimits& limits = {}) {
  if (family == Protocol::Hardware) throw DomainError("hardware programs cannot be optimized");
  if (!(t_f > 0.0)) throw DomainError("t_f must be positive");
  OptimizationProblem p;
  p.context = std::make_shared<const SimulationContext>(SimulationContext::build(g, pc, subspace, limits));
  p.family = family;
  p.t_f = t_f;
  const double ub = recommended_detuning_interval(g.spacing_um(), pc).upper;
  p.space = {family, t_f, ub, pc.delta_noise, ub};
  p.search = default_search_config();
  return p;
}

inline ModelContext model_context(const OptimizationProblem& p) {
  return {p.t_f, p.space.delta_scale, p.context->constants.delta_noise};
}

/// P_MIS of one parameter vector; pure.
inline double evaluate_params(const OptimizationProblem& p, const std::vector<double>& params,
                              const EvolutionConfig& cfg) {
  const auto s = make_schedule(p.family, params, p.t_f, p.context->constants, p.context->traces, p.cd);
  return evolve(*p.context, s, cfg).p_mis;
}

struct EvalRecord {
  std::vector<double> params;
  double p_mis = std::numeric_limits<double>::quiet_NaN();  ///< NaN when the evaluation failed
  std::string error;
};

struct OptimizationResult {
  std::vector<double> best_params;
  double best_p_mis = 0.0;     ///< at the search tolerance
  double report_p_mis = 0.0;   ///< best point re-evaluated at the reporting tolerance
  double report_norm_drift = 0.0;
  double initial_p_mis = 0.0;
  std::size_t evals = 0;
  std::size_t failures = 0;
  std::vector<EvalRecord> trace;
};

inline OptimizationResult optimize_schedule(const OptimizationProblem& p, const SimplexConfig& cfg,
                                            std::uint64_t seed) {
  cfg.validate();
  const auto& space = p.space;
  const std::size_t d = space.dimension();
  const auto init = p.initial ? *p.initial : hp_limit_params(p.family, model_context(p));
  auto u0 = space.encode(init);
  // Start away from the box edges so the sigmoid slope is usable.
  for (auto& u : u0) u = std::clamp(u, 0.02, 0.98);

  std::vector<double> z0(d), scale(d);
  for (std::size_t k = 0; k < d; ++k) {
    z0[k] = logit(u0[k]);
    const double slope = u0[k] * (1.0 - u0[k]);
    scale[k] = std::min(2.0, cfg.initial_scale / slope);
  }

  OptimizationResult r;
  const auto to_u = [](const std::vector<double>& z) {
    std::vector<double> u(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) u[k] = sigmoid(z[k]);
    return u;
  };
  std::map<std::vector<double>, double> memo;
  const auto objective = [&](const std::vector<double>& z) {
    const auto params = space.decode(to_u(z));
    if (const auto it = memo.find(params); it != memo.end()) return it->second;
    EvalRecord rec{params, std::numeric_limits<double>::quiet_NaN(), {}};
    double f = std::numeric_limits<double>::infinity();
    try {
      rec.p_mis = evaluate_params(p, params, p.search);
      f = -rec.p_mis;
    } catch (const IntegrationError& e) {
      rec.error = e.what();
    } catch (const DomainError& e) {
      rec.error = e.what();
    }
    if (!rec.error.empty()) ++r.failures;
    r.trace.push_back(std::move(rec));
    memo.emplace(params, f);
    return f;
  };
  const auto diameter = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(sigmoid(a[k]) - sigmoid(b[k])));
    return m;
  };
  std::mt19937_64 rng(seed);
  const auto res = nelder_mead(objective, z0, scale, cfg, rng, diameter);
  r.evals = r.trace.size();
  if (r.failures == r.trace.size()) {
    std::string msg = "all " + std::to_string(r.failures) + " objective evaluations failed";
    if (!r.trace.empty()) msg += "; first error: " + r.trace.front().error;
    throw IntegrationError(msg);
  }
  r.initial_p_mis = std::isnan(r.trace.front().p_mis) ? 0.0 : r.trace.front().p_mis;
  r.best_params = space.decode(to_u(res.x));
  r.best_p_mis = -res.f;
  const auto s = make_schedule(p.family, r.best_params, p.t_f, p.context->constants, p.context->traces, p.cd);
  const auto rep = evolve(*p.context, s, p.report);
  r.report_p_mis = rep.p_mis;
  r.report_norm_drift = rep.stats.norm_drift;
  return r;
}

// ---------------------------------------------------------------------------
// Baseline

/// Fixed symmetric linear sweep: tau_i = tau_f = t_f/10, Delta_i = -Delta_f = -V0/8.
inline std::vector<double> baseline_params(double t_f, double delta_ub) {
  return {t_f / 10.0, t_f / 10.0, -delta_ub, delta_ub};
}

// ---------------------------------------------------------------------------
// Batch optimization

struct BatchRow {
  std::size_t index = 0;
  std::string graph_id;
  std::size_t order = 0;
  double hp = 0.0;
  std::vector<double> params;
  double p_mis = std::numeric_limits<double>::quiet_NaN();  ///< reporting tolerance
  double search_p_mis = std::numeric_limits<double>::quiet_NaN();
  double initial_p_mis = std::numeric_limits<double>::quiet_NaN();
  std::size_t evals = 0;
  std::string status = "ok";  ///< "ok" or "failed"
  std::string error;
};

struct BatchConfig {
  Protocol family = Protocol::Lin4;
  double t_f = 1.0;
  Subspace subspace = Subspace::NearestNeighbor;
  SimplexConfig simplex{};
  PhysicalConstants constants{};
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  BasisLimits limits{};
};

inline std::vector<std::string> batch_header(Protocol family) {
  std::vector<std::string> h{"index", "graph_id", "N", "HP"};
  for (const auto& n : parameter_names(family)) h.push_back(n);
  for (const char* c : {"p_mis", "search_p_mis", "initial_p_mis", "evals", "status", "error"}) h.push_back(c);
  return h;
}

inline std::vector<std::string> batch_cells(const BatchRow& r, Protocol family) {
  std::vector<std::string> c{std::to_string(r.index), r.graph_id, std::to_string(r.order), format_double(r.hp)};
  const auto np = parameter_names(family).size();
  for (std::size_t k = 0; k < np; ++k) c.push_back(k < r.params.size() ? format_double(r.params[k]) : "nan");
  c.push_back(format_double(r.p_mis));
  c.push_back(format_double(r.search_p_mis));
  c.push_back(format_double(r.initial_p_mis));
  c.push_back(std::to_string(r.evals));
  c.push_back(r.status);
  c.push_back(r.error);
  return c;
}

inline std::string batch_csv(const std::vector<BatchRow>& rows, Protocol family) {
  CsvWriter w(batch_header(family));
  for (const auto& r : rows) w.row_strings(batch_cells(r, family));
  return w.str();
}

/// Reads a results or checkpoint table written by batch_csv.
inline std::vector<BatchRow> parse_batch_csv(const std::string& text, Protocol family) {
  const auto rows = parse_csv(text);
  const auto header = batch_header(family);
  if (rows.empty() || rows.front() != header) throw FormatError("batch table header does not match the " + to_string(family) + " layout");
  const auto np = parameter_names(family).size();
  std::vector<BatchRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& c = rows[i];
    if (c.size() != header.size()) throw FormatError("batch table row " + std::to_string(i + 1) + " has " + std::to_string(c.size()) + " cells");
    BatchRow r;
    r.index = static_cast<std::size_t>(std::stoull(c[0]));
    r.graph_id = c[1];
    r.order = static_cast<std::size_t>(std::stoull(c[2]));
    r.hp = parse_double_cell(c[3]);
    for (std::size_t k = 0; k < np; ++k) r.params.push_back(parse_double_cell(c[4 + k]));
    r.p_mis = parse_double_cell(c[4 + np]);
    r.search_p_mis = parse_double_cell(c[5 + np]);
    r.initial_p_mis = parse_double_cell(c[6 + np]);
    r.evals = static_cast<std::size_t>(std::stoull(c[7 + np]));
    r.status = c[8 + np];
    r.error = c[9 + np];
    out.push_back(std::move(r));
  }
  return out;
}

inline json batch_manifest(const BatchConfig& cfg, std::size_t graphs) {
  return {{"code_version", kCodeVersion},
          {"protocol", to_string(cfg.family)},
          {"t_f_us", cfg.t_f},
          {"subspace", to_string(cfg.subspace)},
          {"seed", cfg.seed},
          {"graphs", graphs},
          {"simplex",
           {{"max_evals", cfg.simplex.max_evals},
            {"x_tol", cfg.simplex.x_tol},
            {"f_tol", cfg.simplex.f_tol},
            {"restarts", cfg.simplex.restarts},
            {"initial_scale", cfg.simplex.initial_scale}}},
          {"constants",
           {{"c6", cfg.constants.c6},
            {"omega_max", cfg.constants.omega_max},
            {"t_max", cfg.constants.t_max},
            {"delta_noise", cfg.constants.delta_noise},
            {"hw_step_us", cfg.constants.hw_step_us}}}};
}

/// Optimizes every graph. Graph i uses seed mix_seed(cfg.seed, i). When
/// `checkpoint` is given, finished rows are appended to it as they complete
/// and rows already present are reused, so an interrupted batch resumes.
/// Per-graph failures become rows with status "failed".
inline std::vector<BatchRow> batch_optimize(const std::vector<UnitDiskGraph>& graphs, const BatchConfig& cfg,
                                            const std::optional<std::filesystem::path>& checkpoint = {}) {
  if (graphs.empty()) throw DomainError("batch optimization needs at least one graph");
  cfg.simplex.validate();
  std::vector<std::optional<BatchRow>> rows(graphs.size());
  std::mutex io_mutex;
  std::string ck_text;
  if (checkpoint && std::filesystem::exists(*checkpoint)) {
    ck_text = read_text_file(*checkpoint);
    for (auto& r : parse_batch_csv(ck_text, cfg.family)) {
      if (r.index < graphs.size() && r.graph_id == (graphs[r.index].name().empty() ? "g" + std::to_string(r.index) : graphs[r.index].name())) {
        const auto i = r.index;
        rows[i] = std::move(r);
      }
    }
  } else if (checkpoint) {
    ck_text = CsvWriter(batch_header(cfg.family)).str();
    write_text_file_atomic(*checkpoint, ck_text);
  }

  parallel_for(graphs.size(), cfg.jobs, [&](std::size_t i) {
    if (rows[i]) return;
    const auto& g = graphs[i];
    BatchRow row;
    row.index = i;
    row.graph_id = g.name().empty() ? "g" + std::to_string(i) : g.name();
    row.order = g.order();
    try {
      const auto prob = make_problem(g, cfg.family, cfg.t_f, cfg.constants, cfg.subspace, cfg.limits);
      row.hp = prob.context->hp;
      const auto res = optimize_schedule(prob, cfg.simplex, mix_seed(cfg.seed, i));
      row.params = res.best_params;
      row.p_mis = res.report_p_mis;
      row.search_p_mis = res.best_p_mis;
      row.initial_p_mis = res.initial_p_mis;
      row.evals = res.evals;
    } catch (const Error& e) {
      row.status = "failed";
      row.error = e.what();
      if (row.hp == 0.0) {
        try {
          row.hp = hardness_parameter(independent_set_census(g));
        } catch (const Error&) {
        }
      }
    }
    if (checkpoint) {
      std::lock_guard lock(io_mutex);
      CsvWriter line(batch_header(cfg.family));
      line.row_strings(batch_cells(row, cfg.family));
      const auto& s = line.str();
      ck_text += s.substr(s.find('\n') + 1);
      write_text_file_atomic(*checkpoint, ck_text);
    }
    rows[i] = std::move(row);
  });
  std::vector<BatchRow> out;
  for (auto& r : rows) out.push_back(std::move(*r));
  return out;
}

// ---------------------------------------------------------------------------
// HP model fit

namespace detail {

struct CurveFit {
  double p0, p_inf, sse;
};

/// Linear least squares for (p0, p_inf) at fixed h_p.
inline CurveFit fit_at(double hp_scale, const std::vector<double>& h, const std::vector<double>& y) {
  double see = 0, sey = 0, sy = 0, se = 0, n = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double e = std::exp(-h[i] / hp_scale);
    see += e * e;
    se += e;
    sey += e * y[i];
    sy += y[i];
  }
  // Model y = a + b e with a = p_inf, b = p0 - p_inf.
  const double det = n * see - se * se;
  double a, b;
  if (std::abs(det) < 1e-300) {
    a = sy / n;
    b = 0.0;
  } else {
    b = (n * sey - se * sy) / det;
    a = (sy - b * se) / n;
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double r = y[i] - (a + b * std::exp(-h[i] / hp_scale));
    sse += r * r;
  }
  return {a + b, a, sse};
}

}  // namespace detail

/// Least-squares fit of p(h) = p_inf + (p0 - p_inf) exp(-h/h_p). For each
/// h_p the amplitudes solve a linear problem; h_p is found by a log-spaced
/// scan followed by golden-section refinement in log h_p.
inline SaturatingCurve fit_saturating(const std::vector<double>& h, const std::vector<double>& y) {
  if (h.size() != y.size() || h.size() < 3) throw DomainError("saturating fit needs >= 3 matched samples");
  SaturatingCurve c;
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sst = 0.0, scale = 0.0;
  for (double v : y) {
    sst += (v - mean) * (v - mean);
    scale = std::max(scale, std::abs(v));
  }
  if (sst <= 1e-24 * std::max(1.0, scale * scale) * static_cast<double>(y.size())) {
    c.p0 = c.p_inf = mean;
    c.h_p = 1.0;
    c.r2 = 1.0;
    c.degenerate = true;
    return c;
  }
  const auto [hmin, hmax] = std::minmax_element(h.begin(), h.end());
  double lo = std::log(*hmin / 100.0), hi = std::log(*hmax * 100.0);
  const int grid = 400;
  double best_x = lo, best_f = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= grid; ++k) {
    const double x = lo + (hi - lo) * k / grid;
    const double f = detail::fit_at(std::exp(x), h, y).sse;
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  const double step = (hi - lo) / grid;
  double a = std::max(lo, best_x - step), b = std::min(hi, best_x + step);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = detail::fit_at(std::exp(x1), h, y).sse, f2 = detail::fit_at(std::exp(x2), h, y).sse;
  for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = detail::fit_at(std::exp(x1), h, y).sse;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = detail::fit_at(std::exp(x2), h, y).sse;
    }
  }
  const double hp_scale = std::exp(0.5 * (a + b));
  const auto fit = detail::fit_at(hp_scale, h, y);
  c.p0 = fit.p0;
  c.p_inf = fit.p_inf;
  c.h_p = hp_scale;
  c.r2 = 1.0 - fit.sse / sst;
  c.rms_residual = std::sqrt(fit.sse / static_cast<double>(y.size()));
  return c;
}

inline constexpr std::size_t kMinFitRows = 20;

/// Fits every parameter of `family` against HP over successful rows.
inline FitModel fit_hp_model(const std::vector<BatchRow>& rows, Protocol family, double t_f = 1.0) {
  std::vector<const BatchRow*> ok;
  for (const auto& r : rows) {
    if (r.status == "ok" && r.hp > 0.0) ok.push_back(&r);
  }
  if (ok.size() < kMinFitRows) {
    throw DomainError("HP model fit needs >= " + std::to_string(kMinFitRows) + " successful rows, got " +
                      std::to_string(ok.size()));
  }
  double hmin = ok.front()->hp, hmax = hmin;
  for (const auto* r : ok) {
    hmin = std::min(hmin, r->hp);
    hmax = std::max(hmax, r->hp);
  }
  if (hmax < 10.0 * hmin) {
    throw DomainError("degenerate HP spread: rows span [" + format_double(hmin) + ", " + format_double(hmax) +
                      "], less than one decade");
  }
  const auto names = parameter_names(family);
  FitModel m;
  m.family = family;
  m.t_f = t_f;
  m.names = names;
  for (const auto* r : ok) m.hp.push_back(r->hp);
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<double> y;
    for (const auto* r : ok) {
      if (r->params.size() != names.size()) throw DomainError("row " + r->graph_id + " has the wrong parameter count");
      y.push_back(r->params[k]);
    }
    auto c = fit_saturating(m.hp, y);
    std::vector<double> res;
    for (std::size_t i = 0; i < y.size(); ++i) res.push_back(y[i] - c(m.hp[i]));
    m.curves.push_back(c);
    m.residuals.push_back(std::move(res));
  }
  return m;
}

inline json fit_model_to_json(const FitModel& m) {
  json params = json::array();
  for (std::size_t k = 0; k < m.curves.size(); ++k) {
    const auto& c = m.curves[k];
    params.push_back({{"name", m.names[k]},
                      {"p0", c.p0},
                      {"p_inf", c.p_inf},
                      {"h_p", c.h_p},
                      {"r2", c.r2},
                      {"rms_residual", c.rms_residual},
                      {"degenerate", c.degenerate}});
  }
  return {{"protocol", to_string(m.family)}, {"t_f_us", m.t_f}, {"samples", m.hp.size()}, {"parameters", params}};
}

inline FitModel fit_model_from_json(const json& j) {
  using detail::require;
  FitModel m;
  const auto& jp = require(j, "", "protocol");
  if (!jp.is_string()) detail::schema_error("/protocol", "expected a string");
  try {
    m.family = parse_protocol(jp.get<std::string>());
  } catch (const DomainError& e) {
    detail::schema_error("/protocol", e.what());
  }
  m.t_f = detail::as_number(require(j, "", "t_f_us"), "/t_f_us");
  const auto& ps = require(j, "", "parameters");
  if (!ps.is_array()) detail::schema_error("/parameters", "expected an array");
  const auto names = parameter_names(m.family);
  if (ps.size() != names.size()) detail::schema_error("/parameters", "expected " + std::to_string(names.size()) + " entries");
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const std::string p = "/parameters/" + std::to_string(k);
    SaturatingCurve c;
    c.p0 = detail::as_number(require(ps[k], p, "p0"), p + "/p0");
    c.p_inf = detail::as_number(require(ps[k], p, "p_inf"), p + "/p_inf");
    c.h_p = detail::as_number(require(ps[k], p, "h_p"), p + "/h_p");
    if (!(c.h_p > 0.0)) detail::schema_error(p + "/h_p", "must be positive");
    if (ps[k].contains("r2")) c.r2 = detail::as_number(ps[k]["r2"], p + "/r2");
    if (ps[k].contains("degenerate") && ps[k]["degenerate"].is_boolean()) c.degenerate = ps[k]["degenerate"].get<bool>();
    m.names.push_back(names[k]);
    m.curves.push_back(c);
  }
  return m;
}

}  // namespace rydmis
