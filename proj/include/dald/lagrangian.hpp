#pragma once

// Augmented Lagrangian evaluation, residuals and multiplier/penalty updates.
//
// For multipliers mu and penalties rho (one pair per constraint, stored once
// even when a constraint is shared by several blocks) the augmented
// Lagrangian is
//
//   AL(x) = f(x) + sum_c [ mu_c phi_c(x) + rho_c^2 phi_c(x)^2 ].
//
// Equalities use phi_c = psi_c. Inequalities psi_c <= 0 carry a squared
// slack s = e^2 >= 0 that is minimized out in closed form, which gives
// phi_c = max(psi_c, -mu_c / (2 rho_c^2)).

#include <limits>
#include <span>
#include <vector>

#include "dald/model.hpp"

namespace dald {

struct MultiplierState {
  std::vector<double> mu;
  std::vector<double> rho;
  double penalty_growth = 1.0;
  double rho_cap = std::numeric_limits<double>::infinity();

  /// mu = 0, rho = rho0 for m constraints.
  static MultiplierState initial(std::size_t m, double rho0 = 1.0, double growth = 1.0,
                                 double cap = std::numeric_limits<double>::infinity());
  /// Throws NonpositivePenalty / DimensionMismatch / InvalidConfig.
  void validate(std::size_t m) const;
};

struct SlackResult {
  double slack_squared = 0.0;
  double phi = 0.0;
};

/// Minimizer over s >= 0 of mu (psi + s) + rho^2 (psi + s)^2.
SlackResult optimal_slack(double psi, double mu, double rho);

/// phi_c after slack elimination (identity for equalities).
inline double effective_value(ConstraintKind kind, double psi, double mu, double rho) {
  return kind == ConstraintKind::Equality ? psi : optimal_slack(psi, mu, rho).phi;
}

double eval_objective(const DecomposedProblem& problem, const Point& x);
double eval_global_al(const DecomposedProblem& problem, const Point& x, const MultiplierState& state);
/// Gradient of the global AL with respect to the flattened x.
std::vector<double> grad_global_al(const DecomposedProblem& problem, const Point& x,
                                   const MultiplierState& state);

/// Local AL of block i with the coupled elements frozen at w_minus_i
/// (laid out as DecomposedProblem::view(i).coupling_refs). Holds scratch
/// buffers, so one instance must not be shared across threads.
class LocalAugmentedLagrangian {
 public:
  LocalAugmentedLagrangian(const DecomposedProblem& problem, BlockId i,
                           std::span<const double> w_minus_i, const MultiplierState& state);

  std::size_t dim() const { return block_.dim(); }
  std::span<const double> lower() const { return block_.lower; }
  std::span<const double> upper() const { return block_.upper; }
  BlockId block() const { return id_; }

  double value(std::span<const double> x_i) const;
  /// Overwrites g with the gradient; returns the value.
  double gradient(std::span<const double> x_i, std::span<double> g) const;

 private:
  void gather(std::span<const Slot> slots, std::span<const double> x_i) const;

  const DecomposedProblem& problem_;
  const VariableBlock& block_;
  const BlockView& view_;
  BlockId id_;
  std::span<const double> w_;
  const MultiplierState& state_;
  mutable std::vector<double> buf_;
  mutable std::vector<double> gbuf_;
};

/// Global AL over the flattened vector, the joint objective of the ALM.
class GlobalAugmentedLagrangian {
 public:
  GlobalAugmentedLagrangian(const DecomposedProblem& problem, const MultiplierState& state);

  std::size_t dim() const { return lower_.size(); }
  std::span<const double> lower() const { return lower_; }
  std::span<const double> upper() const { return upper_; }

  double value(std::span<const double> flat) const;
  double gradient(std::span<const double> flat, std::span<double> g) const;

 private:
  void gather(std::span<const VarRef> vars, std::span<const double> flat) const;

  const DecomposedProblem& problem_;
  const MultiplierState& state_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  mutable std::vector<double> buf_;
  mutable std::vector<double> gbuf_;
};

double eval_local_al(const DecomposedProblem& problem, BlockId i, std::span<const double> x_i,
                     std::span<const double> w_minus_i, const MultiplierState& state);
std::vector<double> grad_local_al(const DecomposedProblem& problem, BlockId i,
                                  std::span<const double> x_i, std::span<const double> w_minus_i,
                                  const MultiplierState& state);

/// mu_c += 2 rho_c^2 C_c for every constraint.
MultiplierState update_multipliers(const MultiplierState& state, std::span<const double> primal);
/// rho_c = min(growth * rho_c, cap).
MultiplierState update_penalty(const MultiplierState& state);

/// Per-constraint C = phi(x), slack-eliminated for inequalities.
std::vector<double> primal_residual(const DecomposedProblem& problem, const Point& x,
                                    const MultiplierState& state);

struct DualResidual {
  Point per_block;
  double inf_norm = 0.0;
};

/// D_i = x_curr_i - x_prev_i.
DualResidual dual_residual(const Point& x_prev, const Point& x_curr);

struct Residuals {
  std::vector<double> primal;
  Point dual;
  double primal_inf_norm = 0.0;
  double dual_inf_norm = 0.0;
};

Residuals compute_residuals(const DecomposedProblem& problem, const Point& x_prev,
                            const Point& x_curr, const MultiplierState& state);

double inf_norm(std::span<const double> v);
double inf_norm(const Point& x);

}  // namespace dald
