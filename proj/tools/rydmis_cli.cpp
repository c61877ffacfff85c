// Command-line front end: census, bounds, simulation, optimization, fitting,
// dataset generation and hardware export.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rydmis/rydmis.hpp"

namespace fs = std::filesystem;
using namespace rydmis;

namespace {

constexpr const char* kOutEnv = "RYDMIS_OUT";

struct Common {
  double a = kDefaultSpacingUm;
  double tf = 1.0;
  std::string subspace = "nn";
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  std::string out;
};

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

/// Output location for one run. A path with an extension names a file, any
/// other path a directory. Empty means the RYDMIS_OUT root, or stdout only
/// when that is unset as well.
struct OutputPlan {
  fs::path dir;
  std::optional<fs::path> file;
  bool enabled = false;

  fs::path path(const std::string& name) const { return dir / name; }
};

OutputPlan plan_output(const std::string& out, bool default_to_cwd) {
  OutputPlan p;
  std::string o = out;
  if (o.empty()) {
    if (const char* env = std::getenv(kOutEnv); env != nullptr && *env != '\0') o = env;
  }
  if (o.empty()) {
    if (!default_to_cwd) return p;
    o = ".";
  }
  p.enabled = true;
  fs::path fp(o);
  if (fp.has_extension()) {
    p.file = fp;
    p.dir = fp.has_parent_path() ? fp.parent_path() : fs::path(".");
  } else {
    p.dir = fp;
  }
  return p;
}

class Run {
 public:
  Run(std::string command, const std::vector<std::string>& argv, const Common& c, OutputPlan plan)
      : command_(std::move(command)), plan_(std::move(plan)) {
    manifest_ = {{"command", command_},
                 {"argv", argv},
                 {"code_version", kCodeVersion},
                 {"started_utc", now_utc()},
                 {"config",
                  {{"a_um", c.a}, {"t_f_us", c.tf}, {"subspace", c.subspace}, {"seed", c.seed}, {"jobs", c.jobs}}},
                 {"outputs", json::array()}};
  }

  json& manifest() { return manifest_; }
  const OutputPlan& plan() const { return plan_; }

  /// Registers the outputs and writes the manifest before any of them.
  void declare(const std::vector<fs::path>& outputs) {
    if (!plan_.enabled) return;
    for (const auto& p : outputs) manifest_["outputs"].push_back(p.string());
    write_text_file_atomic(manifest_path(), manifest_.dump(2) + "\n");
  }

  void finish() {
    if (!plan_.enabled) return;
    manifest_["finished_utc"] = now_utc();
    write_text_file_atomic(manifest_path(), manifest_.dump(2) + "\n");
  }

 private:
  fs::path manifest_path() const {
    if (plan_.file) {
      auto p = *plan_.file;
      p += ".manifest.json";
      return p;
    }
    return plan_.dir / "manifest.json";
  }

  std::string command_;
  OutputPlan plan_;
  json manifest_;
};

PhysicalConstants constants_from(const Common&) { return PhysicalConstants{}; }

std::vector<UnitDiskGraph> load_all(const std::vector<std::string>& files, double a_override, bool override_a) {
  std::vector<UnitDiskGraph> gs;
  for (const auto& f : files) {
    for (auto& g : load_graphs(f)) {
      if (override_a) g = build_unit_disk_graph(g.sites(), a_override, g.name());
      gs.push_back(std::move(g));
    }
  }
  if (gs.empty()) throw DomainError("no graphs given");
  return gs;
}

std::string graph_id(const UnitDiskGraph& g, std::size_t i) {
  return g.name().empty() ? "g" + std::to_string(i) : g.name();
}

std::vector<double> parse_param_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(parse_double_cell(item));
  return v;
}

/// Parameters from --params, a fitted model, or the hardness-limit model.
std::vector<double> resolve_params(Protocol family, const std::string& params, const std::string& model,
                                   const std::string& fit_path, double hp, const ModelContext& ctx) {
  if (!params.empty()) return parse_param_list(params);
  if (model == "limit") return hp_schedule_model(hp, family, ModelKind::Limit, ctx);
  if (model == "fitted") {
    if (fit_path.empty()) throw DomainError("--model fitted needs --fit <model.json>");
    const auto m = fit_model_from_json(load_json(fit_path));
    return hp_schedule_model(hp, family, ModelKind::Fitted, ctx, &m);
  }
  throw DomainError("unknown model '" + model + "' (expected limit or fitted)");
}

std::string schedule_series_csv(const Schedule& s, std::size_t samples) {
  CsvWriter w({"t_us", "omega_mhz", "delta_mhz", "phi_rad"});
  for (std::size_t k = 0; k <= samples; ++k) {
    const double t = s.duration() * static_cast<double>(k) / static_cast<double>(samples);
    const auto d = s(t);
    w.row(t, d.omega, d.delta, d.phi);
  }
  return w.str();
}

void emit(const Run& run, const std::string& name, const std::string& text, bool to_stdout) {
  if (to_stdout) std::cout << text;
  if (run.plan().enabled) write_text_file_atomic(run.plan().path(name), text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rydberg-atom adiabatic MIS toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Common c;
  app.add_option("--a", c.a, "lattice spacing in um")->check(CLI::PositiveNumber);
  app.add_option("--tf", c.tf, "schedule duration in us")->check(CLI::PositiveNumber);
  app.add_option("--subspace", c.subspace, "simulation basis")->check(CLI::IsMember({"full", "nn", "ud"}));
  app.add_option("--seed", c.seed, "random seed");
  app.add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", c.out, std::string("output directory or file (default $") + kOutEnv + ")");
  std::vector<std::string> args(argv, argv + argc);

  // hp
  auto* hp_cmd = app.add_subcommand("hp", "independent-set census and hardness parameter");
  std::vector<std::string> hp_files;
  hp_cmd->add_option("graphs", hp_files, "graph JSON files")->required()->check(CLI::ExistingFile);

  // bounds
  auto* bd_cmd = app.add_subcommand("bounds", "exact final-detuning bounds");
  std::vector<std::string> bd_files;
  bool bd_recommended = false;
  std::size_t bd_generate = 0, bd_min_order = 8, bd_max_order = 14, bd_limit = kDefaultBoundsLimit, bd_chain = 0;
  double bd_density = 0.75;
  bd_cmd->add_option("graphs", bd_files, "graph JSON files")->check(CLI::ExistingFile);
  bd_cmd->add_flag("--recommended", bd_recommended, "print the recommended interval [V0/12, V0/8]");
  bd_cmd->add_option("--generate", bd_generate, "ensemble of this many random graphs");
  bd_cmd->add_option("--min-order", bd_min_order, "smallest generated order");
  bd_cmd->add_option("--max-order", bd_max_order, "largest generated order");
  bd_cmd->add_option("--density", bd_density, "site density of generated graphs");
  bd_cmd->add_option("--limit", bd_limit, "enumeration limit in vertices");
  bd_cmd->add_option("--triangle-chain", bd_chain, "tabulate chain sums for m = 1..M");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "evolve a graph under a schedule");
  std::string sim_graph, sim_protocol = "lin4", sim_model = "limit", sim_fit, sim_params, sim_integrator = "adaptive";
  std::uint64_t sim_shots = 0;
  double sim_rtol = 1e-8, sim_atol = 1e-8;
  std::size_t sim_samples = 400;
  sim_cmd->add_option("graph", sim_graph, "graph JSON file")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--protocol", sim_protocol, "lin4, lin6 or cd")->check(CLI::IsMember({"lin4", "lin6", "cd"}));
  sim_cmd->add_option("--model", sim_model, "limit or fitted")->check(CLI::IsMember({"limit", "fitted"}));
  sim_cmd->add_option("--fit", sim_fit, "fitted model JSON");
  sim_cmd->add_option("--params", sim_params, "explicit comma-separated parameters");
  sim_cmd->add_option("--shots", sim_shots, "sample and repair this many shots");
  sim_cmd->add_option("--rtol", sim_rtol, "relative tolerance");
  sim_cmd->add_option("--atol", sim_atol, "absolute tolerance");
  sim_cmd->add_option("--integrator", sim_integrator, "adaptive or rk2")->check(CLI::IsMember({"adaptive", "rk2"}));
  sim_cmd->add_option("--samples", sim_samples, "schedule series samples");

  // optimize
  auto* opt_cmd = app.add_subcommand("optimize", "optimize one graph's schedule");
  std::string opt_graph, opt_protocol = "lin4";
  SimplexConfig simplex;
  opt_cmd->add_option("graph", opt_graph, "graph JSON file")->required()->check(CLI::ExistingFile);
  opt_cmd->add_option("--protocol", opt_protocol, "lin4, lin6 or cd")->check(CLI::IsMember({"lin4", "lin6", "cd"}));
  const auto add_simplex = [&](CLI::App* sc) {
    sc->add_option("--max-evals", simplex.max_evals, "objective evaluation budget");
    sc->add_option("--restarts", simplex.restarts, "simplex restarts");
    sc->add_option("--x-tol", simplex.x_tol, "simplex size tolerance");
    sc->add_option("--f-tol", simplex.f_tol, "objective spread tolerance");
  };
  add_simplex(opt_cmd);

  // batch-optimize
  auto* bat_cmd = app.add_subcommand("batch-optimize", "optimize every graph of a collection");
  std::vector<std::string> bat_files;
  std::string bat_protocol = "lin4";
  bat_cmd->add_option("graphs", bat_files, "graph JSON files")->required()->check(CLI::ExistingFile);
  bat_cmd->add_option("--protocol", bat_protocol, "lin4, lin6 or cd")->check(CLI::IsMember({"lin4", "lin6", "cd"}));
  add_simplex(bat_cmd);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit the HP -> parameter model to batch results");
  std::string fit_results, fit_protocol = "lin4";
  std::size_t fit_samples = 200;
  fit_cmd->add_option("results", fit_results, "batch results CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--protocol", fit_protocol, "lin4, lin6 or cd")->check(CLI::IsMember({"lin4", "lin6", "cd"}));
  fit_cmd->add_option("--samples", fit_samples, "points per fitted curve series");

  // dataset-gen
  auto* ds_cmd = app.add_subcommand("dataset-gen", "generate a representative graph dataset");
  DatasetSpec ds_spec;
  PoolSpec pool_spec;
  pool_spec.draws_per_order = 100;
  pool_spec.densities = {0.6};
  pool_spec.walk_steps = 400;
  pool_spec.walk_hp_lo = 3.0;
  ds_cmd->add_option("--min-order", ds_spec.min_order, "smallest order");
  ds_cmd->add_option("--max-order", ds_spec.max_order, "largest order");
  ds_cmd->add_option("--per-order", ds_spec.per_order, "graphs per order");
  ds_cmd->add_option("--bins", ds_spec.num_bins, "number of HP bins");
  ds_cmd->add_option("--per-bin", ds_spec.per_bin, "graphs per HP bin");
  ds_cmd->add_option("--hp-min", ds_spec.hp_min, "lower edge of the first HP bin");
  ds_cmd->add_option("--draws", pool_spec.draws_per_order, "random draws per order");
  ds_cmd->add_option("--walk-steps", pool_spec.walk_steps, "HP-targeted walk length per draw (0 = plain sampling)");
  ds_cmd->add_option("--walk-hp-min", pool_spec.walk_hp_lo, "lowest walk target HP");
  ds_cmd->add_option("--walk-hp-max", pool_spec.walk_hp_hi, "highest walk target HP");
  ds_cmd->add_option("--density", pool_spec.densities, "window site densities (cycled)");

  // toy
  auto* toy_cmd = app.add_subcommand("toy", "materialize 4x3 toy graphs from identifiers");
  std::vector<std::string> toy_ids;
  bool toy_all = false;
  toy_cmd->add_option("--id", toy_ids, "three-hex-digit identifier");
  toy_cmd->add_flag("--all", toy_all, "all 11 toy graphs");

  // export-schedule
  auto* ex_cmd = app.add_subcommand("export-schedule", "discretize a schedule into a hardware program");
  std::string ex_graph, ex_protocol = "lin4", ex_model = "limit", ex_fit, ex_params;
  double ex_step = PhysicalConstants{}.hw_step_us, ex_hp = 0.0;
  int ex_sign = 1;
  ex_cmd->add_option("graph", ex_graph, "graph JSON file (required for cd)")->check(CLI::ExistingFile);
  ex_cmd->add_option("--protocol", ex_protocol, "lin4, lin6 or cd")->check(CLI::IsMember({"lin4", "lin6", "cd"}));
  ex_cmd->add_option("--model", ex_model, "limit or fitted")->check(CLI::IsMember({"limit", "fitted"}));
  ex_cmd->add_option("--fit", ex_fit, "fitted model JSON");
  ex_cmd->add_option("--params", ex_params, "explicit comma-separated parameters");
  ex_cmd->add_option("--hp", ex_hp, "hardness parameter when no graph is given");
  ex_cmd->add_option("--step", ex_step, "grid step in us");
  ex_cmd->add_option("--phase-sign", ex_sign, "device phase convention")->check(CLI::IsMember({1, -1}));

  // postprocess
  auto* pp_cmd = app.add_subcommand("postprocess", "greedy repair of measured bitstrings");
  std::string pp_shots, pp_graph;
  pp_cmd->add_option("shots", pp_shots, "text/CSV file with one bitstring per line")->required()->check(CLI::ExistingFile);
  pp_cmd->add_option("graph", pp_graph, "graph JSON file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const auto pc = constants_from(c);
  const bool a_given = app.count("--a") > 0;
  try {
    if (hp_cmd->parsed()) {
      const auto graphs = load_all(hp_files, c.a, a_given);
      Run run("hp", args, c, plan_output(c.out, false));
      run.declare({run.plan().path("hp.csv")});
      CsvWriter w({"graph_id", "N", "edges", "mis_size", "d_mis_minus_1", "d_mis", "hp", "connected"});
      for (std::size_t i = 0; i < graphs.size(); ++i) {
        const auto& g = graphs[i];
        const auto census = independent_set_census(g);
        const auto m = census.independence_number;
        w.row(graph_id(g, i), g.order(), g.edges().size(), m, census.degeneracy(m - 1), census.degeneracy(m),
              hardness_parameter(census), g.connected());
      }
      emit(run, "hp.csv", w.str(), true);
      run.finish();
      return 0;
    }

    if (bd_cmd->parsed()) {
      Run run("bounds", args, c, plan_output(c.out, false));
      if (bd_recommended) {
        const auto r = recommended_detuning_interval(c.a, pc);
        std::ostringstream ss;
        ss << std::fixed << std::setprecision(3) << "a_um," << c.a << "\nv0_mhz," << pc.v0(c.a)
           << "\ndelta_lb_mhz," << r.lower << "\ndelta_ub_mhz," << r.upper << "\nblockade_radius_um,"
           << pc.blockade_radius() << "\n";
        run.declare({run.plan().path("recommended.csv")});
        emit(run, "recommended.csv", ss.str(), true);
        run.finish();
        return 0;
      }
      if (bd_chain > 0) {
        CsvWriter w({"m", "N", "sigma0", "sigma1", "sigma0_minus_sigma1", "lb_over_v0"});
        for (std::size_t m = 1; m <= bd_chain; ++m) {
          const auto s = triangle_chain_sigma(m);
          w.row(m, 3 * m + 1, s.sigma0, s.sigma1, s.sigma0 - s.sigma1, s.lower_bound_over_v0());
        }
        run.declare({run.plan().path("triangle_chain.csv")});
        emit(run, "triangle_chain.csv", w.str(), true);
        run.finish();
        return 0;
      }
      std::vector<UnitDiskGraph> graphs;
      if (bd_generate > 0) {
        if (bd_min_order == 0 || bd_max_order < bd_min_order) throw DomainError("invalid order range");
        const std::size_t span = bd_max_order - bd_min_order + 1;
        for (std::size_t i = 0; i < bd_generate; ++i) {
          const std::size_t n = bd_min_order + i % span;
          graphs.push_back(generate_random_udg(n, window_for_order(n, bd_density), mix_seed(c.seed, n, i), c.a)
                               .renamed("r" + std::to_string(i)));
        }
      } else {
        graphs = load_all(bd_files, c.a, a_given);
      }
      run.manifest()["generate"] = bd_generate;
      run.declare({run.plan().path("bounds.csv"), run.plan().path("bounds_bins.csv")});
      const auto s = ensemble_bounds_stats(graphs, pc, c.jobs, bd_limit);
      CsvWriter w({"graph_id", "N", "HP", "dlb_over_v0", "dub_over_v0", "feasible"});
      for (const auto& gb : s.graphs) w.row(gb.id, gb.order, gb.hp, gb.dlb_over_v0(), gb.dub_over_v0(), gb.bounds.feasible);
      emit(run, "bounds.csv", w.str(), true);
      CsvWriter b({"hp_lo", "hp_hi", "count", "lb_min", "lb_q25", "lb_median", "lb_q75", "lb_max", "ub_min",
                   "ub_q25", "ub_median", "ub_q75", "ub_max"});
      for (const auto& bin : s.bins) {
        b.row(bin.hp_lo, bin.hp_hi, bin.count, bin.lower.min, bin.lower.q25, bin.lower.median, bin.lower.q75,
              bin.lower.max, bin.upper.min, bin.upper.q25, bin.upper.median, bin.upper.q75, bin.upper.max);
      }
      emit(run, "bounds_bins.csv", b.str(), false);
      std::cerr << "graphs " << s.graphs.size() << ", within [V0/12, V0/8]: " << s.both_ok << " ("
                << 100.0 * s.fraction_within_recommended() << "%), infeasible: " << s.infeasible << "\n";
      run.finish();
      return 0;
    }

    if (sim_cmd->parsed()) {
      auto g = load_graphs(sim_graph).at(0);
      if (a_given) g = build_unit_disk_graph(g.sites(), c.a, g.name());
      const auto family = parse_protocol(sim_protocol);
      const auto ctx = SimulationContext::build(g, pc, parse_subspace(c.subspace));
      const ModelContext mc{c.tf, recommended_detuning_interval(g.spacing_um(), pc).upper, pc.delta_noise};
      const auto params = resolve_params(family, sim_params, sim_model, sim_fit, ctx.hp, mc);
      const auto sched = make_schedule(family, params, c.tf, pc, ctx.traces);
      EvolutionConfig cfg;
      cfg.rel_tol = sim_rtol;
      cfg.abs_tol = sim_atol;
      cfg.integrator = sim_integrator == "rk2" ? Integrator::FixedRK2 : Integrator::Adaptive32;
      Run run("simulate", args, c, plan_output(c.out, false));
      run.manifest()["protocol"] = sim_protocol;
      run.manifest()["params"] = params;
      std::vector<fs::path> outs{run.plan().path("simulate.csv"), run.plan().path("densities.csv"),
                                 run.plan().path("schedule_series.csv")};
      if (sim_shots > 0) outs.push_back(run.plan().path("sizes.csv"));
      run.declare(outs);
      const auto res = evolve(ctx, sched, cfg);
      CsvWriter w({"graph_id", "N", "HP", "protocol", "subspace", "dimension", "t_f_us", "kappa", "p_mis",
                   "norm_drift", "steps", "rejected_steps"});
      w.row(graph_id(g, 0), g.order(), ctx.hp, sim_protocol, c.subspace, ctx.basis.size(), c.tf, sched.kappa(),
            res.p_mis, res.stats.norm_drift, res.stats.step_count, res.stats.rejected_steps);
      emit(run, "simulate.csv", w.str(), true);
      CsvWriter d({"atom", "x", "y", "density"});
      for (std::size_t i = 0; i < g.order(); ++i) d.row(i, g.site(i).x, g.site(i).y, res.densities[i]);
      emit(run, "densities.csv", d.str(), false);
      emit(run, "schedule_series.csv", schedule_series_csv(sched, sim_samples), false);
      if (sim_shots > 0) {
        const auto h = sample_and_repair(res.final_state, ctx.basis, g, ctx.census, sim_shots, c.seed);
        CsvWriter s({"size", "count"});
        for (std::size_t k = 0; k < h.size_counts.size(); ++k) s.row(k, h.size_counts[k]);
        emit(run, "sizes.csv", s.str(), false);
        std::cerr << "shots " << h.shots << ", MIS after repair " << h.mis_hits << ", before repair "
                  << h.raw_mis_hits << "\n";
      }
      run.finish();
      return 0;
    }

    if (opt_cmd->parsed()) {
      auto g = load_graphs(opt_graph).at(0);
      if (a_given) g = build_unit_disk_graph(g.sites(), c.a, g.name());
      const auto family = parse_protocol(opt_protocol);
      const auto prob = make_problem(g, family, c.tf, pc, parse_subspace(c.subspace));
      Run run("optimize", args, c, plan_output(c.out, false));
      run.declare({run.plan().path("optimize.csv"), run.plan().path("trace.csv")});
      const auto r = optimize_schedule(prob, simplex, c.seed);
      std::vector<std::string> header{"graph_id", "N", "HP"};
      for (const auto& n : parameter_names(family)) header.push_back(n);
      for (const char* h : {"p_mis", "search_p_mis", "initial_p_mis", "norm_drift", "evals", "failures"}) header.push_back(h);
      CsvWriter w(header);
      std::vector<std::string> cells{graph_id(g, 0), std::to_string(g.order()), format_double(prob.context->hp)};
      for (double v : r.best_params) cells.push_back(format_double(v));
      for (double v : {r.report_p_mis, r.best_p_mis, r.initial_p_mis, r.report_norm_drift}) cells.push_back(format_double(v));
      cells.push_back(std::to_string(r.evals));
      cells.push_back(std::to_string(r.failures));
      w.row_strings(cells);
      emit(run, "optimize.csv", w.str(), true);
      std::vector<std::string> th{"eval"};
      for (const auto& n : parameter_names(family)) th.push_back(n);
      th.push_back("p_mis");
      th.push_back("error");
      CsvWriter t(th);
      for (std::size_t k = 0; k < r.trace.size(); ++k) {
        std::vector<std::string> row{std::to_string(k)};
        for (double v : r.trace[k].params) row.push_back(format_double(v));
        row.push_back(format_double(r.trace[k].p_mis));
        row.push_back(r.trace[k].error);
        t.row_strings(row);
      }
      emit(run, "trace.csv", t.str(), false);
      run.finish();
      return 0;
    }

    if (bat_cmd->parsed()) {
      const auto graphs = load_all(bat_files, c.a, a_given);
      BatchConfig bc;
      bc.family = parse_protocol(bat_protocol);
      bc.t_f = c.tf;
      bc.subspace = parse_subspace(c.subspace);
      bc.simplex = simplex;
      bc.constants = pc;
      bc.seed = c.seed;
      bc.jobs = c.jobs;
      Run run("batch-optimize", args, c, plan_output(c.out, true));
      run.manifest()["batch"] = batch_manifest(bc, graphs.size());
      const auto ck = run.plan().path("checkpoint.csv");
      run.declare({run.plan().path("results.csv"), ck});
      const auto rows = batch_optimize(graphs, bc, ck);
      emit(run, "results.csv", batch_csv(rows, bc.family), false);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.status != "ok";
      std::cerr << rows.size() << " graphs optimized, " << failed << " failed; results in "
                << run.plan().path("results.csv").string() << "\n";
      run.finish();
      return 0;
    }

    if (fit_cmd->parsed()) {
      const auto family = parse_protocol(fit_protocol);
      const auto rows = parse_batch_csv(read_text_file(fit_results), family);
      const auto m = fit_hp_model(rows, family, c.tf);
      auto plan = plan_output(c.out, false);
      Run run("fit", args, c, plan);
      const std::string model_name = plan.file ? plan.file->filename().string() : "fit.json";
      run.declare({plan.path(model_name), plan.path("fit_residuals.csv"), plan.path("fit_curves.csv")});
      emit(run, model_name, fit_model_to_json(m).dump(2) + "\n", true);
      std::vector<std::string> rh{"hp"};
      for (const auto& n : m.names) rh.push_back(n + "_residual");
      CsvWriter r(rh);
      for (std::size_t i = 0; i < m.hp.size(); ++i) {
        std::vector<std::string> row{format_double(m.hp[i])};
        for (const auto& res : m.residuals) row.push_back(format_double(res[i]));
        r.row_strings(row);
      }
      emit(run, "fit_residuals.csv", r.str(), false);
      std::vector<std::string> ch{"hp"};
      for (const auto& n : m.names) ch.push_back(n);
      CsvWriter cv(ch);
      const auto [lo, hi] = std::minmax_element(m.hp.begin(), m.hp.end());
      for (std::size_t k = 0; k <= fit_samples; ++k) {
        const double h = *lo * std::pow(*hi / *lo, static_cast<double>(k) / static_cast<double>(fit_samples));
        std::vector<std::string> row{format_double(h)};
        for (const auto& curve : m.curves) row.push_back(format_double(curve(h)));
        cv.row_strings(row);
      }
      emit(run, "fit_curves.csv", cv.str(), false);
      run.finish();
      return 0;
    }

    if (ds_cmd->parsed()) {
      ds_spec.validate();
      pool_spec.orders.clear();
      for (auto n = ds_spec.min_order; n <= ds_spec.max_order; ++n) pool_spec.orders.push_back(n);
      pool_spec.spacing_um = c.a;
      Run run("dataset-gen", args, c, plan_output(c.out, true));
      run.manifest()["spec"] = {{"min_order", ds_spec.min_order}, {"max_order", ds_spec.max_order},
                                {"per_order", ds_spec.per_order}, {"bins", ds_spec.num_bins},
                                {"per_bin", ds_spec.per_bin},     {"hp_min", ds_spec.hp_min}};
      run.manifest()["pool"] = {{"draws_per_order", pool_spec.draws_per_order}, {"densities", pool_spec.densities},
                                {"walk_steps", pool_spec.walk_steps}, {"walk_hp_min", pool_spec.walk_hp_lo},
                                {"walk_hp_max", pool_spec.walk_hp_hi}};
      run.declare({run.plan().path("dataset.json"), run.plan().path("dataset.csv")});
      const auto pool = generate_pool(pool_spec, c.seed, c.jobs);
      const auto sel = select_representative_dataset(pool, ds_spec, c.seed);
      std::vector<UnitDiskGraph> graphs;
      json entries = json::array();
      CsvWriter w({"graph_id", "N", "HP", "bin", "connected"});
      for (std::size_t i = 0; i < sel.graphs.size(); ++i) {
        const auto& e = sel.graphs[i];
        const auto id = "d" + std::to_string(i);
        graphs.push_back(e.graph.renamed(id));
        entries.push_back({{"id", id}, {"order", e.graph.order()}, {"hp", e.hp}});
        w.row(id, e.graph.order(), e.hp, ds_spec.bin_of(e.hp) + 1, e.connected);
      }
      run.manifest()["pool_size"] = pool.size();
      run.manifest()["graphs"] = entries;
      run.manifest()["order_loghp_correlation"] = {{"pool", order_loghp_correlation(pool)},
                                                   {"dataset", order_loghp_correlation(sel.graphs)}};
      save_graphs(run.plan().path("dataset.json"), graphs);
      emit(run, "dataset.csv", w.str(), false);
      std::cerr << "selected " << graphs.size() << " graphs from a pool of " << pool.size() << "\n";
      run.finish();
      return 0;
    }

    if (toy_cmd->parsed()) {
      std::vector<std::string> ids = toy_ids;
      if (toy_all) ids.assign(toy_graph_ids().begin(), toy_graph_ids().end());
      if (ids.empty()) throw DomainError("give --id <XYZ> or --all");
      std::vector<UnitDiskGraph> graphs;
      for (const auto& id : ids) graphs.push_back(parse_toy_graph_id(id, c.a));
      auto plan = plan_output(c.out, false);
      Run run("toy", args, c, plan);
      if (!plan.enabled) {
        std::cout << graphs_to_text(graphs);
        return 0;
      }
      const fs::path target = plan.file ? *plan.file : plan.dir / "toy_graphs.json";
      run.declare({target});
      save_graphs(target, graphs);
      run.finish();
      return 0;
    }

    if (ex_cmd->parsed()) {
      const auto family = parse_protocol(ex_protocol);
      std::optional<UnitDiskGraph> g;
      if (!ex_graph.empty()) {
        g = load_graphs(ex_graph).at(0);
        if (a_given) g = build_unit_disk_graph(g->sites(), c.a, g->name());
      }
      if (family == Protocol::CD && !g) throw DomainError("cd schedules need a graph for their traces");
      const double spacing = g ? g->spacing_um() : c.a;
      const double hp = g ? hardness_parameter(independent_set_census(*g)) : (ex_hp > 0 ? ex_hp : 1.0);
      const ModelContext mc{c.tf, recommended_detuning_interval(spacing, pc).upper, pc.delta_noise};
      const auto params = resolve_params(family, ex_params, ex_model, ex_fit, hp, mc);
      const auto traces = g ? graph_traces(*g) : GraphTraces{};
      const auto sched = make_schedule(family, params, c.tf, pc, traces);
      const auto hw = discretize_for_hardware(sched, ex_step, pc, ex_sign);
      const auto text = schedule_to_json(hw, pc).dump(2) + "\n";
      auto plan = plan_output(c.out, false);
      Run run("export-schedule", args, c, plan);
      run.manifest()["params"] = params;
      run.manifest()["intervals"] = hardware_intervals(hw);
      run.manifest()["max_clamp_mhz"] = std::get<HardwareShape>(hw.shape()).max_clamp;
      if (!plan.enabled) {
        std::cout << text;
        return 0;
      }
      const fs::path target = plan.file ? *plan.file : plan.dir / "schedule.json";
      run.declare({target});
      write_text_file_atomic(target, text);
      run.finish();
      return 0;
    }

    if (pp_cmd->parsed()) {
      auto g = load_graphs(pp_graph).at(0);
      const auto census = independent_set_census(g);
      std::istringstream in(read_text_file(pp_shots));
      std::string line;
      std::vector<Bitstring> shots;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        const auto cut = line.find(',');
        std::string cell = line.substr(0, cut);
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        if (cell.empty() || cell.find_first_not_of("01") != std::string::npos) {
          if (lineno == 1 || cell.empty()) continue;  // header or blank
          throw FormatError(pp_shots + ":" + std::to_string(lineno) + ": not a bitstring: '" + cell + "'");
        }
        if (cell.size() != g.order()) {
          throw FormatError(pp_shots + ":" + std::to_string(lineno) + ": bitstring length " +
                            std::to_string(cell.size()) + " != graph order " + std::to_string(g.order()));
        }
        shots.push_back(Bitstring::parse(cell));
      }
      if (shots.empty()) throw FormatError(pp_shots + ": no bitstrings found");
      Run run("postprocess", args, c, plan_output(c.out, false));
      run.declare({run.plan().path("repaired.csv")});
      std::mt19937_64 rng(c.seed);
      CsvWriter w({"shot", "measured", "repaired", "measured_size", "repaired_size", "is_mis"});
      std::size_t hits = 0;
      for (std::size_t k = 0; k < shots.size(); ++k) {
        const auto fixed = greedy_repair(shots[k], g, rng);
        const bool mis = fixed.count() == census.independence_number;
        hits += mis;
        w.row(k, shots[k].str(), fixed.str(), shots[k].count(), fixed.count(), mis);
      }
      emit(run, "repaired.csv", w.str(), true);
      std::cerr << hits << " of " << shots.size() << " repaired shots are maximum independent sets\n";
      run.finish();
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
