#pragma once

// Three-loop scheme: outer multiplier updates, inner block sweeps, and the
// solver layer minimizing each block's local augmented Lagrangian.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dald/coordination.hpp"
#include "dald/lagrangian.hpp"
#include "dald/solvers.hpp"

namespace dald {

/// Inner-loop exit rules:
///   B1  ||D|| <= eps_dual
///   B2  ||D|| <= eps_dual^k, eps_dual^k = max(eps_dual, eps0 * decay^(k-1))
///   B3  v = ceil(v0 * growth^(k-1))  or  ||D|| <= eps_dual
///   B4  v = v_max                    or  ||D|| <= eps_dual
enum class InnerCriterion { B1, B2, B3, B4 };

enum class ExecutionPolicy { Serial, Parallel };

struct DaldConfig {
  double eps_pri = 1e-3;
  double eps_dual = 1e-3;
  InnerCriterion criterion = InnerCriterion::B1;
  double eps_dual0 = 1e-1;
  double eps_dual_decay = 0.5;
  int v0 = 1;
  double v_growth = 2.0;
  int v_max = 1;
  int max_outer = 100000;
  long max_cumulative_inner = 10000;
  double divergence_norm = 1e8;
  bool record_snapshots = false;
  /// Record the global AL after every block solve (sweep-descent checks).
  bool record_solve_values = false;
  ExecutionPolicy execution = ExecutionPolicy::Serial;
  double rho0 = 1.0;
  double penalty_growth = 1.0;
  double rho_cap = std::numeric_limits<double>::infinity();
  /// Overrides the problem's own starting point when set.
  std::optional<Point> initial;

  void validate() const;
  double eps_dual_at(int k) const;
  int v_max_at(int k) const;
};

bool inner_should_stop(InnerCriterion criterion, int k, int v, double dual_inf_norm, const DaldConfig& config);
bool outer_should_stop(double primal_inf_norm, double dual_inf_norm, const DaldConfig& config);

/// One inner iteration (a sweep, or a joint solve for the ALM).
struct TraceRecord {
  int k = 0;
  int v = 0;
  long cumulative_inner = 0;
  double objective = 0.0;
  double al_value = 0.0;
  double primal_inf = 0.0;
  double dual_inf = 0.0;
  std::optional<Point> snapshot;
  /// Global AL before the sweep followed by its value after each solve.
  std::vector<double> solve_al_values;

  bool operator==(const TraceRecord&) const = default;
};

enum class RunStatus { Converged, Diverged, MaxOuterReached, MaxInnerReached, SolverFailure };

struct RunSummary {
  RunStatus status = RunStatus::MaxOuterReached;
  Point x;
  std::vector<double> mu;
  std::vector<double> rho;
  int outer_iters = 0;
  long cumulative_inner = 0;
  double objective = 0.0;
  double al_value = 0.0;
  double primal_inf = 0.0;
  double dual_inf = 0.0;
  long solver_iters = 0;
  /// Block solves that ended Stalled or at the iteration cap.
  long inexact_solves = 0;
  double wall_seconds = 0.0;
  std::string message;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  RunSummary final;
};

/// Runs the decomposition with the given plan. Failures of the run itself
/// (divergence, limits, a block solve throwing) are reported through the
/// status; invalid inputs throw.
RunTrace run_dald(const DecomposedProblem& problem, const SweepPlan& plan, const SolverSpec& solver,
                  const DaldConfig& config);

/// Method of multipliers: each inner iteration minimizes the global AL over
/// all blocks jointly with projected gradient; inner iterations repeat until
/// ||D|| <= eps_dual.
RunTrace run_alm(const DecomposedProblem& problem, const SolverSpec& solver, const DaldConfig& config);

/// Cyclic block minimization of f until ||D|| <= eps_dual. Throws
/// ConstraintsPresent if the problem has constraints.
RunTrace run_bcd(const DecomposedProblem& problem, const SweepPlan& plan, const SolverSpec& solver,
                 const DaldConfig& config);

std::string_view to_string(InnerCriterion c);
std::string_view to_string(RunStatus s);
std::string_view to_string(ExecutionPolicy p);

}  // namespace dald
