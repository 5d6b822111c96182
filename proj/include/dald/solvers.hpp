#pragma once

// Solver layer: minimizers for one block's local augmented Lagrangian.

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "dald/lagrangian.hpp"

namespace dald {

enum class SolverKind { ProjectedGradient, AnalyticLinear };

struct ArmijoParams {
  double c = 1e-4;
  double shrink = 0.5;
  double initial_step = 1.0;
};

struct SolverSpec {
  SolverKind kind = SolverKind::ProjectedGradient;
  /// Exit when ||x - P(x - a0 g)||_inf <= tol_solver.
  double tol_solver = 1e-10;
  int max_iters = 100000;
  ArmijoParams armijo;
  /// Start each line search from the Barzilai-Borwein step instead of a0.
  bool spectral_step = true;

  void validate() const;
};

enum class SolveStatus { Converged, MaxIters, Stalled };

struct BlockSolution {
  std::vector<double> x;
  int iters_used = 0;
  double stationarity = 0.0;
  SolveStatus status = SolveStatus::Converged;
  double value = 0.0;
};

/// Smooth objective over a box, as consumed by the projected-gradient core.
class BoxObjective {
 public:
  virtual ~BoxObjective() = default;
  virtual std::size_t dim() const = 0;
  virtual std::span<const double> lower() const = 0;
  virtual std::span<const double> upper() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  /// Overwrites g; returns the value at x.
  virtual double gradient(std::span<const double> x, std::span<double> g) const = 0;
};

/// Wraps anything with the dim/lower/upper/value/gradient surface.
template <class F>
class BoxObjectiveRef final : public BoxObjective {
 public:
  explicit BoxObjectiveRef(const F& f) : f_(f) {}
  std::size_t dim() const override { return f_.dim(); }
  std::span<const double> lower() const override { return f_.lower(); }
  std::span<const double> upper() const override { return f_.upper(); }
  double value(std::span<const double> x) const override { return f_.value(x); }
  double gradient(std::span<const double> x, std::span<double> g) const override {
    return f_.gradient(x, g);
  }

 private:
  const F& f_;
};

/// Projected gradient with Armijo backtracking along the projection arc.
/// Every accepted step satisfies the sufficient-decrease condition, so the
/// returned value never exceeds the value at `start`.
BlockSolution minimize_projected_gradient(const BoxObjective& objective, std::span<const double> start,
                                          const SolverSpec& spec);

BlockSolution solve_block_projected_gradient(const DecomposedProblem& problem, BlockId i,
                                             std::span<const double> w_minus_i,
                                             const MultiplierState& state,
                                             std::span<const double> warm_start, const SolverSpec& spec);

/// Closed-form minimizer when block i only appears in affine objective terms
/// and affine equality constraints: solves sum_c 2 rho_c^2 a_c a_c^T x =
/// -(g + sum_c a_c (mu_c + 2 rho_c^2 b_c)), with phi_c = a_c^T x_i + b_c.
/// Throws NotApplicable if the structure check fails or the minimizer leaves
/// the box, SingularNormal if the normal matrix is singular.
BlockSolution solve_block_analytic_linear(const DecomposedProblem& problem, BlockId i,
                                          std::span<const double> w_minus_i,
                                          const MultiplierState& state, const SolverSpec& spec);

/// Dispatches on spec.kind.
BlockSolution solve_block(const DecomposedProblem& problem, BlockId i, std::span<const double> w_minus_i,
                          const MultiplierState& state, std::span<const double> warm_start,
                          const SolverSpec& spec);

/// Central differences (fn(x + h e_j) - fn(x - h e_j)) / 2h.
std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& fn,
                                               std::span<const double> x, double h);

std::string_view to_string(SolverKind kind);
std::string_view to_string(SolveStatus status);

}  // namespace dald
