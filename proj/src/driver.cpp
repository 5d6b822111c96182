#include "dald/driver.hpp"

#include <algorithm>
#include <chrono>
#include <climits>
#include <cmath>
#include <exception>
#include <functional>

namespace dald {

std::string_view to_string(InnerCriterion c) {
  switch (c) {
    case InnerCriterion::B1: return "B1";
    case InnerCriterion::B2: return "B2";
    case InnerCriterion::B3: return "B3";
    case InnerCriterion::B4: return "B4";
  }
  return "unknown";
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "Converged";
    case RunStatus::Diverged: return "Diverged";
    case RunStatus::MaxOuterReached: return "MaxOuterReached";
    case RunStatus::MaxInnerReached: return "MaxInnerReached";
    case RunStatus::SolverFailure: return "SolverFailure";
  }
  return "unknown";
}

std::string_view to_string(ExecutionPolicy p) { return p == ExecutionPolicy::Serial ? "serial" : "parallel"; }

void DaldConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (!(eps_pri > 0.0) || !(eps_dual > 0.0)) bad("eps_pri and eps_dual must be > 0");
  if (max_outer < 1 || max_cumulative_inner < 1) bad("iteration limits must be >= 1");
  if (!(divergence_norm > 0.0)) bad("divergence_norm must be > 0");
  if (!(rho0 > 0.0) || !std::isfinite(rho0)) throw Error(ErrorCode::NonpositivePenalty, "rho0 must be > 0");
  if (!(penalty_growth >= 1.0) || !(rho_cap >= rho0)) bad("penalty schedule must be nondecreasing");
  switch (criterion) {
    case InnerCriterion::B1: break;
    case InnerCriterion::B2:
      if (!(eps_dual0 >= eps_dual) || !(eps_dual_decay > 0.0 && eps_dual_decay < 1.0))
        bad("B2 needs eps_dual0 >= eps_dual and a decay in (0,1)");
      break;
    case InnerCriterion::B3:
      if (v0 < 1 || !(v_growth > 1.0)) bad("B3 needs v0 >= 1 and growth > 1");
      break;
    case InnerCriterion::B4:
      if (v_max < 1) bad("v_max must be >= 1");
      break;
  }
}

double DaldConfig::eps_dual_at(int k) const {
  return std::max(eps_dual, eps_dual0 * std::pow(eps_dual_decay, k - 1));
}

int DaldConfig::v_max_at(int k) const {
  const double v = std::ceil(v0 * std::pow(v_growth, k - 1));
  return v >= static_cast<double>(INT_MAX) ? INT_MAX : static_cast<int>(v);
}

bool inner_should_stop(InnerCriterion criterion, int k, int v, double dual_inf_norm, const DaldConfig& config) {
  switch (criterion) {
    case InnerCriterion::B1: return dual_inf_norm <= config.eps_dual;
    case InnerCriterion::B2: return dual_inf_norm <= config.eps_dual_at(k);
    case InnerCriterion::B3: return v >= config.v_max_at(k) || dual_inf_norm <= config.eps_dual;
    case InnerCriterion::B4: return v >= config.v_max || dual_inf_norm <= config.eps_dual;
  }
  return true;
}

bool outer_should_stop(double primal_inf_norm, double dual_inf_norm, const DaldConfig& config) {
  return primal_inf_norm <= config.eps_pri && dual_inf_norm <= config.eps_dual;
}

namespace {

using Clock = std::chrono::steady_clock;

// Only the tolerance part of a criterion, used when partial-cycle mode has
// not yet touched every block.
bool cap_reached(InnerCriterion criterion, int k, int v, const DaldConfig& config) {
  switch (criterion) {
    case InnerCriterion::B3: return v >= config.v_max_at(k);
    case InnerCriterion::B4: return v >= config.v_max;
    default: return false;
  }
}

struct StepStats {
  long solver_iters = 0;
  long inexact = 0;
  void add(const BlockSolution& s) {
    solver_iters += s.iters_used;
    if (s.status != SolveStatus::Converged) ++inexact;
  }
};

// One inner iteration: updates x in place (prev is the snapshot before it),
// marks solved blocks and optionally appends AL values after each solve.
using InnerStep = std::function<void(Point& x, const Point& prev, const MultiplierState& state, long sweep_index,
                                     const std::vector<double>& last_dual, std::vector<char>& touched,
                                     StepStats& stats, std::vector<double>* al_values)>;

RunTrace outer_loop(const DecomposedProblem& problem, const DaldConfig& config, bool partial,
                    const InnerStep& step) {
  const auto t0 = Clock::now();
  RunTrace trace;
  RunSummary& sum = trace.final;

  Point x = config.initial ? *config.initial : problem.initial_point();
  problem.check_point(x);
  for (std::size_t b = 0; b < x.size(); ++b) {
    const auto& blk = problem.blocks()[b];
    for (std::size_t j = 0; j < x[b].size(); ++j) x[b][j] = std::clamp(x[b][j], blk.lower[j], blk.upper[j]);
  }
  MultiplierState state =
      MultiplierState::initial(problem.num_constraints(), config.rho0, config.penalty_growth, config.rho_cap);
  const std::size_t n = problem.num_blocks();
  std::vector<double> last_dual(n, std::numeric_limits<double>::infinity());
  StepStats stats;
  long cum = 0;

  auto finish = [&](RunStatus status, std::string message) {
    sum.status = status;
    sum.message = std::move(message);
    sum.x = x;
    sum.mu = state.mu;
    sum.rho = state.rho;
    sum.cumulative_inner = cum;
    sum.solver_iters = stats.solver_iters;
    sum.inexact_solves = stats.inexact;
    if (!trace.records.empty()) {
      const auto& r = trace.records.back();
      sum.objective = r.objective;
      sum.al_value = r.al_value;
      sum.primal_inf = r.primal_inf;
      sum.dual_inf = r.dual_inf;
    }
    sum.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return trace;
  };

  for (int k = 1; k <= config.max_outer; ++k) {
    sum.outer_iters = k;
    std::vector<char> solved(n, 0);
    std::vector<double> primal;
    double dual_inf = 0.0;
    double primal_inf = 0.0;
    for (int v = 1;; ++v) {
      const Point prev = x;
      TraceRecord rec;
      std::vector<double> al_values;
      std::vector<char> touched(n, 0);
      try {
        step(x, prev, state, cum, last_dual, touched, stats, config.record_solve_values ? &al_values : nullptr);
      } catch (const Error& e) {
        return finish(RunStatus::SolverFailure, e.what());
      }
      ++cum;
      const DualResidual d = dual_residual(prev, x);
      for (std::size_t b = 0; b < n; ++b)
        if (touched[b]) {
          last_dual[b] = inf_norm(d.per_block[b]);
          solved[b] = 1;
        }
      primal = primal_residual(problem, x, state);
      primal_inf = inf_norm(primal);
      dual_inf = d.inf_norm;

      rec.k = k;
      rec.v = v;
      rec.cumulative_inner = cum;
      rec.objective = eval_objective(problem, x);
      rec.al_value = eval_global_al(problem, x, state);
      rec.primal_inf = primal_inf;
      rec.dual_inf = dual_inf;
      if (config.record_snapshots) rec.snapshot = x;
      rec.solve_al_values = std::move(al_values);
      trace.records.push_back(std::move(rec));

      const double x_inf = inf_norm(x);
      if (!std::isfinite(x_inf) || !std::isfinite(primal_inf) || x_inf > config.divergence_norm ||
          primal_inf > config.divergence_norm)
        return finish(RunStatus::Diverged, "iterate or constraint violation exceeded the divergence norm");

      const bool all_solved = !partial || std::all_of(solved.begin(), solved.end(), [](char c) { return c != 0; });
      const bool stop = all_solved ? inner_should_stop(config.criterion, k, v, dual_inf, config)
                                   : cap_reached(config.criterion, k, v, config);
      if (stop) break;
      if (cum >= config.max_cumulative_inner)
        return finish(RunStatus::MaxInnerReached, "cumulative inner iteration budget exhausted");
    }
    const bool all_solved = !partial || std::all_of(solved.begin(), solved.end(), [](char c) { return c != 0; });
    if (all_solved && outer_should_stop(primal_inf, dual_inf, config))
      return finish(RunStatus::Converged, "primal and dual residuals within tolerance");
    state = update_penalty(update_multipliers(state, primal));
    // Displacements measured under the old multipliers say nothing about the
    // new subproblems; greedy selection revisits every block first.
    std::fill(last_dual.begin(), last_dual.end(), std::numeric_limits<double>::infinity());
    if (cum >= config.max_cumulative_inner)
      return finish(RunStatus::MaxInnerReached, "cumulative inner iteration budget exhausted");
  }
  return finish(RunStatus::MaxOuterReached, "outer iteration limit reached");
}

void validate_plan_for(const DecomposedProblem& problem, const SweepPlan& plan) {
  plan.validate();
  if (static_cast<std::size_t>(plan.num_blocks()) != problem.num_blocks())
    throw Error(ErrorCode::DimensionMismatch, "plan covers " + std::to_string(plan.num_blocks()) +
                                                  " blocks, problem has " + std::to_string(problem.num_blocks()));
}

// w_{-i}: direct predecessors and blocks already solved in the current stage
// contribute their fresh values, everything else the previous sweep's.
std::vector<double> assemble_coupling(const DecomposedProblem& problem, const SweepPlan& plan, BlockId i,
                                      const Point& x, const Point& prev, const std::vector<BlockId>& done_in_stage) {
  const auto& refs = problem.view(i).coupling_refs;
  std::vector<double> w;
  w.reserve(refs.size());
  for (const auto& r : refs) {
    const bool fresh = plan.is_predecessor(r.block, i) ||
                       std::find(done_in_stage.begin(), done_in_stage.end(), r.block) != done_in_stage.end();
    w.push_back(fresh ? x[r.block - 1][r.index] : prev[r.block - 1][r.index]);
  }
  return w;
}

}  // namespace

RunTrace run_dald(const DecomposedProblem& problem, const SweepPlan& plan, const SolverSpec& solver,
                  const DaldConfig& config) {
  config.validate();
  solver.validate();
  validate_plan_for(problem, plan);

  const bool parallel = config.execution == ExecutionPolicy::Parallel;

  InnerStep step = [&](Point& x, const Point& prev, const MultiplierState& state, long sweep_index,
                       const std::vector<double>& last_dual, std::vector<char>& touched, StepStats& stats,
                       std::vector<double>* al_values) {
    if (al_values) al_values->push_back(eval_global_al(problem, x, state));
    const Stages stages = select_blocks(plan, sweep_index, last_dual);
    for (const auto& stage : stages) {
      const bool concurrent = parallel && stage.size() > 1 && stage_is_independent(problem, stage);
      if (concurrent) {
        const int m = static_cast<int>(stage.size());
        std::vector<BlockSolution> sols(m);
        std::vector<std::exception_ptr> errors(m);
#pragma omp parallel for schedule(dynamic)
        for (int s = 0; s < m; ++s) {
          try {
            const BlockId i = stage[s];
            const auto w = assemble_coupling(problem, plan, i, x, prev, {});
            sols[s] = solve_block(problem, i, w, state, x[i - 1], solver);
          } catch (...) {
            errors[s] = std::current_exception();
          }
        }
        for (auto& e : errors)
          if (e) std::rethrow_exception(e);
        for (int s = 0; s < m; ++s) {
          const BlockId i = stage[s];
          stats.add(sols[s]);
          x[i - 1] = std::move(sols[s].x);
          touched[i - 1] = 1;
          if (al_values) al_values->push_back(eval_global_al(problem, x, state));
        }
      } else {
        std::vector<BlockId> done;
        for (BlockId i : stage) {
          const auto w = assemble_coupling(problem, plan, i, x, prev, done);
          BlockSolution sol = solve_block(problem, i, w, state, x[i - 1], solver);
          stats.add(sol);
          x[i - 1] = std::move(sol.x);
          touched[i - 1] = 1;
          done.push_back(i);
          if (al_values) al_values->push_back(eval_global_al(problem, x, state));
        }
      }
    }
  };
  return outer_loop(problem, config, plan.mode == CoordinationMode::PartialCycle, step);
}

RunTrace run_alm(const DecomposedProblem& problem, const SolverSpec& solver, const DaldConfig& config) {
  config.validate();
  solver.validate();
  SolverSpec joint = solver;
  joint.kind = SolverKind::ProjectedGradient;
  DaldConfig cfg = config;
  cfg.criterion = InnerCriterion::B1;

  InnerStep step = [&](Point& x, const Point&, const MultiplierState& state, long, const std::vector<double>&,
                       std::vector<char>& touched, StepStats& stats, std::vector<double>* al_values) {
    if (al_values) al_values->push_back(eval_global_al(problem, x, state));
    GlobalAugmentedLagrangian al(problem, state);
    const auto start = problem.flatten(x);
    BlockSolution sol = minimize_projected_gradient(BoxObjectiveRef(al), start, joint);
    stats.add(sol);
    x = problem.unflatten(sol.x);
    std::fill(touched.begin(), touched.end(), 1);
    if (al_values) al_values->push_back(eval_global_al(problem, x, state));
  };
  return outer_loop(problem, cfg, false, step);
}

namespace {

// f restricted to block i, coupled elements read from the live point.
class BlockObjective {
 public:
  BlockObjective(const DecomposedProblem& problem, BlockId i, const Point& x)
      : problem_(problem), block_(problem.block(i)), view_(problem.view(i)), x_(x) {
    std::size_t width = 0;
    for (const auto& s : view_.term_slots) width = std::max(width, s.size());
    buf_.resize(width);
    gbuf_.resize(width);
  }

  std::size_t dim() const { return block_.dim(); }
  std::span<const double> lower() const { return block_.lower; }
  std::span<const double> upper() const { return block_.upper; }

  double value(std::span<const double> xi) const {
    double s = 0.0;
    for (std::size_t t = 0; t < view_.terms.size(); ++t) {
      const auto n = gather(t, xi);
      s += problem_.terms()[view_.terms[t]].eval(std::span<const double>(buf_.data(), n));
    }
    return s;
  }

  double gradient(std::span<const double> xi, std::span<double> g) const {
    std::fill(g.begin(), g.end(), 0.0);
    double s = 0.0;
    for (std::size_t t = 0; t < view_.terms.size(); ++t) {
      const auto n = gather(t, xi);
      const auto& term = problem_.terms()[view_.terms[t]];
      std::span<const double> v(buf_.data(), n);
      s += term.eval(v);
      term.grad(v, std::span<double>(gbuf_.data(), n));
      const auto& slots = view_.term_slots[t];
      for (std::size_t j = 0; j < n; ++j)
        if (slots[j].local >= 0) g[static_cast<std::size_t>(slots[j].local)] += gbuf_[j];
    }
    return s;
  }

 private:
  std::size_t gather(std::size_t t, std::span<const double> xi) const {
    const auto& vars = problem_.terms()[view_.terms[t]].vars;
    for (std::size_t j = 0; j < vars.size(); ++j)
      buf_[j] = vars[j].block == block_.id ? xi[vars[j].index] : x_[vars[j].block - 1][vars[j].index];
    return vars.size();
  }

  const DecomposedProblem& problem_;
  const VariableBlock& block_;
  const BlockView& view_;
  const Point& x_;
  mutable std::vector<double> buf_;
  mutable std::vector<double> gbuf_;
};

}  // namespace

RunTrace run_bcd(const DecomposedProblem& problem, const SweepPlan& plan, const SolverSpec& solver,
                 const DaldConfig& config) {
  if (problem.num_constraints() != 0)
    throw Error(ErrorCode::ConstraintsPresent, std::to_string(problem.num_constraints()) + " constraints");
  config.validate();
  solver.validate();
  validate_plan_for(problem, plan);

  const auto t0 = Clock::now();
  RunTrace trace;
  RunSummary& sum = trace.final;
  Point x = config.initial ? *config.initial : problem.initial_point();
  problem.check_point(x);
  for (std::size_t b = 0; b < x.size(); ++b) {
    const auto& blk = problem.blocks()[b];
    for (std::size_t j = 0; j < x[b].size(); ++j) x[b][j] = std::clamp(x[b][j], blk.lower[j], blk.upper[j]);
  }
  sum.outer_iters = 1;
  sum.status = RunStatus::MaxInnerReached;
  sum.message = "cumulative inner iteration budget exhausted";
  for (long v = 1; v <= config.max_cumulative_inner; ++v) {
    const Point prev = x;
    TraceRecord rec;
    if (config.record_solve_values) rec.solve_al_values.push_back(eval_objective(problem, x));
    try {
      for (const auto& stage : plan.stages)
        for (BlockId i : stage) {
          BlockObjective f(problem, i, x);
          BlockSolution sol = minimize_projected_gradient(BoxObjectiveRef(f), x[i - 1], solver);
          sum.solver_iters += sol.iters_used;
          if (sol.status != SolveStatus::Converged) ++sum.inexact_solves;
          x[i - 1] = std::move(sol.x);
          if (config.record_solve_values) rec.solve_al_values.push_back(eval_objective(problem, x));
        }
    } catch (const Error& e) {
      sum.status = RunStatus::SolverFailure;
      sum.message = e.what();
      break;
    }
    double dual_inf = 0.0;
    for (std::size_t b = 0; b < x.size(); ++b)
      for (std::size_t j = 0; j < x[b].size(); ++j) {
        const double d = std::abs(x[b][j] - prev[b][j]);
        if (std::isnan(d) || d > dual_inf) dual_inf = d;
      }
    rec.k = 1;
    rec.v = static_cast<int>(v);
    rec.cumulative_inner = v;
    rec.objective = eval_objective(problem, x);
    rec.al_value = rec.objective;
    rec.primal_inf = 0.0;
    rec.dual_inf = dual_inf;
    if (config.record_snapshots) rec.snapshot = x;
    trace.records.push_back(std::move(rec));
    sum.cumulative_inner = v;
    const double x_inf = inf_norm(x);
    if (!std::isfinite(x_inf) || x_inf > config.divergence_norm) {
      sum.status = RunStatus::Diverged;
      sum.message = "iterate exceeded the divergence norm";
      break;
    }
    if (dual_inf <= config.eps_dual) {
      sum.status = RunStatus::Converged;
      sum.message = "dual residual within tolerance";
      break;
    }
  }
  sum.x = x;
  if (!trace.records.empty()) {
    const auto& r = trace.records.back();
    sum.objective = r.objective;
    sum.al_value = r.al_value;
    sum.dual_inf = r.dual_inf;
  }
  sum.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return trace;
}

}  // namespace dald
