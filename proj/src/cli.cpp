#include "dald/cli.hpp"

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"

namespace dald {

namespace fs = std::filesystem;

json ExperimentConfig::to_json() const {
  json rep = json::object();
  for (const auto& [b, t] : repeats) rep[std::to_string(b)] = t;
  json s = solver_to_json(solver);
  s["kind"] = solver_kind;
  return json{{"problem", problem}, {"rows", rows},
              {"cols", cols},       {"parts", parts},
              {"seed", seed},       {"seeds", seeds},
              {"plan", plan},       {"mode", to_string(mode)},
              {"policy", to_string(policy)},
              {"quota", quota},     {"repeats", rep},
              {"plan_seed", plan_seed},
              {"method", method},   {"solver", s},
              {"dald", config_to_json(dald)},
              {"out", out}};
}

ExperimentConfig ExperimentConfig::from_json(const json& in, ExperimentConfig c) {
  const json& j = in.is_object() && in.contains("config") ? in.at("config") : in;
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "config must be a JSON object");
  try {
    c.problem = j.value("problem", c.problem);
    c.rows = j.value("rows", c.rows);
    c.cols = j.value("cols", c.cols);
    c.parts = j.value("parts", c.parts);
    c.seed = j.value("seed", c.seed);
    c.seeds = j.value("seeds", c.seeds);
    c.plan = j.value("plan", c.plan);
    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("policy")) c.policy = policy_from_string(j.at("policy").get<std::string>());
    c.quota = j.value("quota", c.quota);
    if (j.contains("repeats")) {
      c.repeats.clear();
      for (const auto& [k, v] : j.at("repeats").items()) c.repeats[std::stoi(k)] = v.get<int>();
    }
    c.plan_seed = j.value("plan_seed", c.plan_seed);
    c.method = j.value("method", c.method);
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      c.solver_kind = s.value("kind", c.solver_kind);
      json rest = s;
      rest.erase("kind");
      c.solver = solver_from_json(rest, c.solver);
    }
    if (j.contains("dald")) c.dald = config_from_json(j.at("dald"), c.dald);
    c.out = j.value("out", c.out);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::ParseError, "config: repeat keys must be block ids");
  }
  return c;
}

LoadedProblem load_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.problem == "counterexample") return {admm_counterexample(), std::nullopt};
  if (cfg.problem == "toy") return {toy_example(), std::nullopt};
  if (cfg.problem == "lnf") {
    auto g = lnf_generate(cfg.rows, cfg.cols, seed, cfg.parts);
    return {std::move(g.problem), std::move(g.instance)};
  }
  if (!fs::exists(cfg.problem))
    throw Error(ErrorCode::InvalidConfig, "problem '" + cfg.problem + "' is neither a builtin nor an existing file");
  const json j = read_json_file(cfg.problem);
  if (j.is_object() && j.contains("arcs")) {
    LnfInstance inst = lnf_from_json(j);
    DecomposedProblem p = lnf_problem(inst);
    return {std::move(p), std::move(inst)};
  }
  return {problem_from_json(j), std::nullopt};
}

SweepPlan load_plan(const ExperimentConfig& cfg, int num_blocks) {
  HierarchicalNetwork net;
  if (cfg.plan == "chain") {
    net = sequential_chain(num_blocks);
  } else {
    if (!fs::exists(cfg.plan)) throw Error(ErrorCode::InvalidConfig, "plan file '" + cfg.plan + "' does not exist");
    net = network_from_json(read_json_file(cfg.plan));
  }
  SweepPlan plan = es_sweep_plan(net);
  plan.mode = cfg.mode;
  plan.policy = cfg.policy;
  plan.quota = cfg.quota;
  plan.repeats = cfg.repeats;
  plan.seed = cfg.plan_seed;
  return plan;
}

SolverSpec resolve_solver(const ExperimentConfig& cfg, const DecomposedProblem& problem) {
  SolverSpec s = cfg.solver;
  if (cfg.solver_kind != "auto") {
    s.kind = solver_kind_from_string(cfg.solver_kind);
    return s;
  }
  bool closed_form = true;
  for (const auto& t : problem.terms()) closed_form = closed_form && t.expr && t.expr->is_affine();
  for (const auto& c : problem.constraints())
    closed_form = closed_form && c.kind == ConstraintKind::Equality && c.expr && c.expr->is_affine();
  for (const auto& b : problem.blocks())
    for (std::size_t j = 0; j < b.dim(); ++j)
      closed_form = closed_form && std::isinf(b.lower[j]) && std::isinf(b.upper[j]);
  s.kind = closed_form ? SolverKind::AnalyticLinear : SolverKind::ProjectedGradient;
  return s;
}

namespace {

fs::path output_path(const std::string& p) {
  fs::path path(p);
  if (path.is_relative())
    if (const char* root = std::getenv("DALD_OUTPUT_ROOT"); root && *root) return fs::path(root) / path;
  return path;
}

RunTrace execute(const ExperimentConfig& cfg, const LoadedProblem& lp) {
  const auto& p = lp.problem;
  const SolverSpec solver = resolve_solver(cfg, p);
  if (cfg.method == "alm") return run_alm(p, solver, cfg.dald);
  const SweepPlan plan = load_plan(cfg, static_cast<int>(p.num_blocks()));
  if (cfg.method == "bcd") return run_bcd(p, plan, solver, cfg.dald);
  if (cfg.method != "dald") throw Error(ErrorCode::InvalidConfig, "unknown method '" + cfg.method + "'");
  return run_dald(p, plan, solver, cfg.dald);
}

void write_trace_file(const fs::path& path, const RunTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write '" + path.string() + "'");
  write_trace_csv(out, trace);
}

json make_summary(const ExperimentConfig& cfg, const LoadedProblem& lp, const RunTrace& trace) {
  json s = summary_to_json(trace.final);
  s["method"] = cfg.method;
  s["solver"] = to_string(resolve_solver(cfg, lp.problem).kind);
  if (lp.lnf) {
    const double oracle = lnf_oracle(*lp.lnf).cost;
    s["oracle_cost"] = oracle;
    s["relative_gap"] = std::abs(trace.final.objective - oracle) / std::max(1.0, std::abs(oracle));
  }
  s["config"] = cfg.to_json();
  return s;
}

// Flags recorded as deferred edits so they can be applied on top of a
// config file.
struct Overrides {
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> items;

  template <class T, class F>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& desc, F apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, desc);
    items.emplace_back(opt, [value, apply](ExperimentConfig& c) { apply(c, *value); });
    return opt;
  }
  template <class F>
  CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& desc, F apply) {
    CLI::Option* opt = app->add_flag(name, desc);
    items.emplace_back(opt, [apply](ExperimentConfig& c) { apply(c); });
    return opt;
  }
  void apply(ExperimentConfig& c) const {
    for (const auto& [opt, f] : items)
      if (opt->count() > 0) f(c);
  }
};

void add_problem_options(CLI::App* app, Overrides& ov) {
  ov.add<std::string>(app, "--problem", "counterexample | toy | lnf | path to problem or LNF JSON",
                      [](ExperimentConfig& c, const std::string& v) { c.problem = v; });
  ov.add<int>(app, "--rows", "LNF grid rows", [](ExperimentConfig& c, int v) { c.rows = v; });
  ov.add<int>(app, "--cols", "LNF grid columns", [](ExperimentConfig& c, int v) { c.cols = v; });
  ov.add<int>(app, "--parts", "LNF partitions", [](ExperimentConfig& c, int v) { c.parts = v; });
  ov.add<std::uint64_t>(app, "--seed", "generator seed", [](ExperimentConfig& c, std::uint64_t v) { c.seed = v; });
}

void add_run_options(CLI::App* app, Overrides& ov) {
  add_problem_options(app, ov);
  ov.add<std::vector<std::uint64_t>>(app, "--seeds", "seed list for sweeps",
                                     [](ExperimentConfig& c, const std::vector<std::uint64_t>& v) { c.seeds = v; })
      ->delimiter(',');
  ov.add<std::string>(app, "--plan", "chain | path to matrix or network JSON",
                      [](ExperimentConfig& c, const std::string& v) { c.plan = v; });
  ov.add<std::string>(app, "--mode", "full-cycle | partial-cycle | selective-repetitive",
                      [](ExperimentConfig& c, const std::string& v) { c.mode = mode_from_string(v); });
  ov.add<std::string>(app, "--policy", "random | greedy (partial-cycle)",
                      [](ExperimentConfig& c, const std::string& v) { c.policy = policy_from_string(v); });
  ov.add<int>(app, "--quota", "blocks per sweep in partial-cycle mode", [](ExperimentConfig& c, int v) { c.quota = v; });
  ov.add<std::vector<std::string>>(app, "--repeat", "block:times for selective-repetitive mode",
                                   [](ExperimentConfig& c, const std::vector<std::string>& v) {
                                     c.repeats.clear();
                                     for (const auto& s : v) {
                                       const auto colon = s.find(':');
                                       if (colon == std::string::npos)
                                         throw Error(ErrorCode::InvalidConfig, "--repeat expects block:times");
                                       c.repeats[std::stoi(s.substr(0, colon))] = std::stoi(s.substr(colon + 1));
                                     }
                                   });
  ov.add<std::uint64_t>(app, "--plan-seed", "seed for random block selection",
                        [](ExperimentConfig& c, std::uint64_t v) { c.plan_seed = v; });
  ov.add<std::string>(app, "--method", "dald | alm | bcd", [](ExperimentConfig& c, const std::string& v) { c.method = v; })
      ->check(CLI::IsMember({"dald", "alm", "bcd"}));
  ov.add<std::string>(app, "--solver", "auto | projected-gradient | analytic-linear",
                      [](ExperimentConfig& c, const std::string& v) { c.solver_kind = v; })
      ->check(CLI::IsMember({"auto", "projected-gradient", "pg", "analytic-linear", "analytic"}));
  ov.add<double>(app, "--tol-solver", "block solver stationarity tolerance",
                 [](ExperimentConfig& c, double v) { c.solver.tol_solver = v; });
  ov.add<int>(app, "--solver-max-iters", "block solver iteration cap",
              [](ExperimentConfig& c, int v) { c.solver.max_iters = v; });
  ov.add<std::string>(app, "--criterion", "inner exit rule B1 | B2 | B3 | B4",
                      [](ExperimentConfig& c, const std::string& v) { c.dald.criterion = criterion_from_string(v); });
  ov.add<int>(app, "--vmax", "sweep cap for B4", [](ExperimentConfig& c, int v) { c.dald.v_max = v; });
  ov.add<double>(app, "--eps-pri", "primal residual tolerance", [](ExperimentConfig& c, double v) { c.dald.eps_pri = v; });
  ov.add<double>(app, "--eps-dual", "dual residual tolerance", [](ExperimentConfig& c, double v) { c.dald.eps_dual = v; });
  ov.add<double>(app, "--eps-dual0", "B2 initial tolerance", [](ExperimentConfig& c, double v) { c.dald.eps_dual0 = v; });
  ov.add<double>(app, "--eps-decay", "B2 tolerance decay", [](ExperimentConfig& c, double v) { c.dald.eps_dual_decay = v; });
  ov.add<int>(app, "--v0", "B3 initial sweep cap", [](ExperimentConfig& c, int v) { c.dald.v0 = v; });
  ov.add<double>(app, "--v-growth", "B3 sweep cap growth", [](ExperimentConfig& c, double v) { c.dald.v_growth = v; });
  ov.add<int>(app, "--max-outer", "outer iteration limit", [](ExperimentConfig& c, int v) { c.dald.max_outer = v; });
  ov.add<long>(app, "--max-inner", "cumulative inner iteration limit",
               [](ExperimentConfig& c, long v) { c.dald.max_cumulative_inner = v; });
  ov.add<double>(app, "--divergence-norm", "abort threshold for ||x|| and ||C||",
                 [](ExperimentConfig& c, double v) { c.dald.divergence_norm = v; });
  ov.add<double>(app, "--rho0", "initial penalty", [](ExperimentConfig& c, double v) { c.dald.rho0 = v; });
  ov.add<double>(app, "--penalty-growth", "penalty factor per outer iteration",
                 [](ExperimentConfig& c, double v) { c.dald.penalty_growth = v; });
  ov.add<double>(app, "--rho-cap", "penalty cap", [](ExperimentConfig& c, double v) { c.dald.rho_cap = v; });
  ov.flag(app, "--parallel", "solve independent blocks of a stage concurrently",
          [](ExperimentConfig& c) { c.dald.execution = ExecutionPolicy::Parallel; });
  ov.flag(app, "--record-snapshots", "keep x after every sweep", [](ExperimentConfig& c) { c.dald.record_snapshots = true; });
  ov.add<std::string>(app, "--out", "output directory (relative paths resolve under $DALD_OUTPUT_ROOT)",
                      [](ExperimentConfig& c, const std::string& v) { c.out = v; });
}

ExperimentConfig assemble(const std::string& config_path, const Overrides& ov) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = ExperimentConfig::from_json(read_json_file(config_path));
  ov.apply(cfg);
  return cfg;
}

int cmd_run(const ExperimentConfig& cfg) {
  const LoadedProblem lp = load_problem(cfg, cfg.seed);
  const RunTrace trace = execute(cfg, lp);
  const fs::path dir = output_path(cfg.out);
  fs::create_directories(dir);
  write_trace_file(dir / "trace.csv", trace);
  const json summary = make_summary(cfg, lp, trace);
  write_json_file((dir / "summary.json").string(), summary);
  const auto& f = trace.final;
  std::cout << to_string(f.status) << ": outer=" << f.outer_iters << " inner=" << f.cumulative_inner
            << " objective=" << f.objective << " primal_inf=" << f.primal_inf << " dual_inf=" << f.dual_inf
            << " |x|_inf=" << inf_norm(f.x);
  if (summary.contains("oracle_cost")) std::cout << " oracle=" << summary["oracle_cost"].get<double>();
  std::cout << "\n  wrote " << (dir / "trace.csv").string() << " and " << (dir / "summary.json").string() << "\n";
  return f.status == RunStatus::Converged ? 0 : 2;
}

int cmd_sweep(const ExperimentConfig& base, const std::vector<int>& vmax_list, bool parallel_cells) {
  if (vmax_list.empty()) {
    std::cerr << "sweep-vmax: empty --vmax-list\n";
    return 1;
  }
  const std::vector<std::uint64_t> seeds = base.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : base.seeds;
  struct Cell {
    int vmax;
    std::uint64_t seed;
    RunSummary summary;
    std::exception_ptr error;
  };
  std::vector<Cell> cells;
  for (std::uint64_t s : seeds)
    for (int v : vmax_list) cells.push_back({v, s, {}, nullptr});
  const fs::path dir = output_path(base.out);
  fs::create_directories(dir / "cells");

  const int m = static_cast<int>(cells.size());
#pragma omp parallel for schedule(dynamic) if (parallel_cells)
  for (int c = 0; c < m; ++c) {
    try {
      ExperimentConfig cfg = base;
      cfg.seed = cells[c].seed;
      cfg.dald.criterion = InnerCriterion::B4;
      cfg.dald.v_max = cells[c].vmax;
      const LoadedProblem lp = load_problem(cfg, cfg.seed);
      const RunTrace trace = execute(cfg, lp);
      write_trace_file(dir / "cells" /
                           ("trace_vmax" + std::to_string(cells[c].vmax) + "_seed" + std::to_string(cells[c].seed) + ".csv"),
                       trace);
      cells[c].summary = trace.final;
    } catch (...) {
      cells[c].error = std::current_exception();
    }
  }
  for (const auto& c : cells)
    if (c.error) std::rethrow_exception(c.error);

  std::ofstream csv(dir / "sweep.csv");
  if (!csv) throw Error(ErrorCode::InvalidConfig, "cannot write sweep.csv");
  csv << "vmax,seed,status,cumulative_inner,outer_iters,objective\n";
  bool all = true;
  char buf[64];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%.17g", c.summary.objective);
    csv << c.vmax << "," << c.seed << "," << to_string(c.summary.status) << "," << c.summary.cumulative_inner << ","
        << c.summary.outer_iters << "," << buf << "\n";
    std::cout << "vmax=" << c.vmax << " seed=" << c.seed << " " << to_string(c.summary.status)
              << " inner=" << c.summary.cumulative_inner << " outer=" << c.summary.outer_iters << "\n";
    all = all && c.summary.status == RunStatus::Converged;
  }
  std::cout << "wrote " << (dir / "sweep.csv").string() << "\n";
  return all ? 0 : 2;
}

int cmd_gen_lnf(const ExperimentConfig& cfg, const std::string& out, const std::string& dot) {
  const auto g = lnf_generate(cfg.rows, cfg.cols, cfg.seed, cfg.parts);
  const fs::path path = output_path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_json_file(path.string(), lnf_to_json(g.instance));
  std::cout << "wrote " << path.string() << " (" << g.instance.nodes.size() << " nodes, " << g.instance.arcs.size()
            << " arcs, oracle cost " << lnf_oracle(g.instance).cost << ")\n";
  if (!dot.empty()) {
    const fs::path dp = output_path(dot);
    if (dp.has_parent_path()) fs::create_directories(dp.parent_path());
    std::ofstream os(dp);
    write_lnf_dot(os, g.instance);
    std::cout << "wrote " << dp.string() << "\n";
  }
  return 0;
}

int cmd_validate(const std::string& problem, const std::string& plan_path) {
  const json j = read_json_file(plan_path);
  HierarchicalNetwork net;
  try {
    net = network_from_json(j);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    std::cout << "invalid plan: " << e.what() << "\n";
    return 1;
  }
  std::cout << "plan: " << net.num_nodes() << " nodes, " << net.edges().size() << " edges, root " << net.root()
            << "\n  diagonal equals out-degree: ok\n  acyclic: ok\n  single root: ok\n";
  const SweepPlan plan = es_sweep_plan(net);
  std::cout << "  stages:";
  for (const auto& s : plan.stages) {
    std::cout << " {";
    for (std::size_t k = 0; k < s.size(); ++k) std::cout << (k ? "," : "") << s[k];
    std::cout << "}";
  }
  std::cout << "\n";
  if (!problem.empty()) {
    ExperimentConfig cfg;
    cfg.problem = problem;
    const LoadedProblem lp = load_problem(cfg, cfg.seed);
    if (lp.problem.num_blocks() != static_cast<std::size_t>(net.num_nodes())) {
      std::cout << "invalid plan: " << net.num_nodes() << " nodes for a problem with " << lp.problem.num_blocks()
                << " blocks\n";
      return 1;
    }
    const auto warnings = validate_stage_coupling(lp.problem, plan);
    for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
    if (warnings.empty()) std::cout << "no stage-coupling warnings\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Block-decomposed augmented Lagrangian experiments"};
  app.require_subcommand(1);

  Overrides run_ov, sweep_ov, gen_ov;
  std::string run_config, sweep_config;
  auto* run = app.add_subcommand("run", "execute one run and write trace.csv and summary.json");
  run->add_option("--config", run_config, "JSON config file (flags override it)")->check(CLI::ExistingFile);
  add_run_options(run, run_ov);

  auto* sweep = app.add_subcommand("sweep-vmax", "one B4 run per (v_max, seed); writes sweep.csv");
  sweep->add_option("--config", sweep_config, "JSON config file (flags override it)")->check(CLI::ExistingFile);
  add_run_options(sweep, sweep_ov);
  std::vector<int> vmax_list;
  bool parallel_cells = false;
  sweep->add_option("--vmax-list", vmax_list, "comma-separated v_max values")->delimiter(',');
  sweep->add_flag("--parallel-cells", parallel_cells, "run sweep cells concurrently");

  auto* gen = app.add_subcommand("gen-lnf", "generate a grid network-flow instance");
  add_problem_options(gen, gen_ov);
  std::string gen_out = "lnf.json", gen_dot;
  gen->add_option("--out", gen_out, "instance JSON path");
  gen->add_option("--dot", gen_dot, "also write a DOT drawing");

  auto* val = app.add_subcommand("validate", "check a plan matrix/network and its stage coupling");
  std::string val_problem, val_plan;
  val->add_option("--plan", val_plan, "matrix or network JSON")->required()->check(CLI::ExistingFile);
  val->add_option("--problem", val_problem, "builtin name or problem JSON to check coupling against");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (run->parsed()) return cmd_run(assemble(run_config, run_ov));
    if (sweep->parsed()) return cmd_sweep(assemble(sweep_config, sweep_ov), vmax_list, parallel_cells);
    if (gen->parsed()) {
      ExperimentConfig cfg;
      cfg.problem = "lnf";
      gen_ov.apply(cfg);
      return cmd_gen_lnf(cfg, gen_out, gen_dot);
    }
    if (val->parsed()) return cmd_validate(val_problem, val_plan);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace dald
