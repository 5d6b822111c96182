#include "dald/solvers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace dald {

std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::ProjectedGradient: return "projected-gradient";
    case SolverKind::AnalyticLinear: return "analytic-linear";
  }
  return "unknown";
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIters: return "MaxIters";
    case SolveStatus::Stalled: return "Stalled";
  }
  return "unknown";
}

void SolverSpec::validate() const {
  if (!(tol_solver > 0.0)) throw Error(ErrorCode::InvalidConfig, "tol_solver must be > 0");
  if (max_iters < 1) throw Error(ErrorCode::InvalidConfig, "max_iters must be >= 1");
  if (!(armijo.c > 0.0 && armijo.c < 1.0)) throw Error(ErrorCode::InvalidConfig, "armijo c must lie in (0,1)");
  if (!(armijo.shrink > 0.0 && armijo.shrink < 1.0))
    throw Error(ErrorCode::InvalidConfig, "armijo shrink must lie in (0,1)");
  if (!(armijo.initial_step > 0.0)) throw Error(ErrorCode::InvalidConfig, "initial step must be > 0");
}

namespace {

constexpr double kMinStep = 1e-14;
constexpr double kMaxStep = 1e12;
constexpr int kMaxBacktracks = 60;
constexpr int kFlatIterLimit = 25;
// Value changes this small (relative) are treated as rounding noise.
constexpr double kRoundingBand = 16.0 * std::numeric_limits<double>::epsilon();

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

void check_finite(double f, std::span<const double> g) {
  if (!std::isfinite(f) || !all_finite(g))
    throw Error(ErrorCode::NonFiniteValue, "objective or gradient is not finite");
}

// ||x - P(x - a g)||_inf
double projected_step_norm(std::span<const double> x, std::span<const double> g, double a,
                           std::span<const double> lo, std::span<const double> hi) {
  double m = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double p = std::clamp(x[j] - a * g[j], lo[j], hi[j]);
    m = std::max(m, std::abs(x[j] - p));
  }
  return m;
}

}  // namespace

BlockSolution minimize_projected_gradient(const BoxObjective& objective, std::span<const double> start,
                                          const SolverSpec& spec) {
  spec.validate();
  const std::size_t n = objective.dim();
  if (start.size() != n) throw Error(ErrorCode::DimensionMismatch, "warm start size");
  const auto lo = objective.lower();
  const auto hi = objective.upper();
  const double a0 = spec.armijo.initial_step;

  std::vector<double> x(start.begin(), start.end());
  for (std::size_t j = 0; j < n; ++j) x[j] = std::clamp(x[j], lo[j], hi[j]);
  std::vector<double> g(n), xn(n), gn(n);
  double f = objective.gradient(x, g);
  check_finite(f, g);

  BlockSolution out;
  const std::vector<double> x_start = x;
  const double f_start = f;
  double f_best = f;
  double step = a0;
  int flat_iters = 0;
  int it = 0;
  out.stationarity = projected_step_norm(x, g, a0, lo, hi);
  double best_stationarity = out.stationarity;
  for (;; ++it) {
    if (out.stationarity <= spec.tol_solver) {
      out.status = SolveStatus::Converged;
      break;
    }
    if (it >= spec.max_iters) {
      out.status = SolveStatus::MaxIters;
      break;
    }
    double alpha = (spec.spectral_step && it > 0) ? step : a0;
    bool accepted = false;
    double fn = f;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      double gd = 0.0;
      bool moved = false;
      for (std::size_t j = 0; j < n; ++j) {
        xn[j] = std::clamp(x[j] - alpha * g[j], lo[j], hi[j]);
        const double d = xn[j] - x[j];
        moved = moved || d != 0.0;
        gd += g[j] * d;
      }
      if (!moved) break;
      fn = objective.gradient(xn, gn);
      check_finite(fn, gn);
      if (fn <= f + spec.armijo.c * gd) {
        accepted = true;
        break;
      }
      // Near a minimizer the decrease drops below the resolution of f. Keep
      // going on the projected gradient there, never drifting more than the
      // rounding band above the best value seen.
      if (fn <= f_best + kRoundingBand * (1.0 + std::abs(f_best)) &&
          projected_step_norm(xn, gn, a0, lo, hi) < out.stationarity) {
        accepted = true;
        break;
      }
      alpha *= spec.armijo.shrink;
      if (alpha < kMinStep) break;
    }
    if (!accepted) {
      out.status = SolveStatus::Stalled;
      break;
    }
    const double next_stationarity = projected_step_norm(xn, gn, a0, lo, hi);
    const bool progress = fn < f_best || next_stationarity < best_stationarity;
    flat_iters = progress ? 0 : flat_iters + 1;
    f_best = std::min(f_best, fn);
    best_stationarity = std::min(best_stationarity, next_stationarity);
    if (spec.spectral_step) {
      double ss = 0.0, sy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double s = xn[j] - x[j];
        ss += s * s;
        sy += s * (gn[j] - g[j]);
      }
      step = sy > 0.0 ? std::clamp(ss / sy, kMinStep, kMaxStep) : a0;
    }
    x.swap(xn);
    g.swap(gn);
    f = fn;
    out.stationarity = next_stationarity;
    if (flat_iters >= kFlatIterLimit) {
      ++it;
      out.status = out.stationarity <= spec.tol_solver ? SolveStatus::Converged : SolveStatus::Stalled;
      break;
    }
  }
  if (f > f_start) {
    // Only reachable through rounding-band steps from a start that was
    // already optimal to working precision.
    x = x_start;
    f = objective.gradient(x, g);
    out.stationarity = projected_step_norm(x, g, a0, lo, hi);
  }
  out.iters_used = it;
  out.value = f;
  out.x = std::move(x);
  return out;
}

BlockSolution solve_block_projected_gradient(const DecomposedProblem& problem, BlockId i,
                                             std::span<const double> w_minus_i,
                                             const MultiplierState& state,
                                             std::span<const double> warm_start, const SolverSpec& spec) {
  LocalAugmentedLagrangian al(problem, i, w_minus_i, state);
  return minimize_projected_gradient(BoxObjectiveRef(al), warm_start, spec);
}

BlockSolution solve_block_analytic_linear(const DecomposedProblem& problem, BlockId i,
                                          std::span<const double> w_minus_i,
                                          const MultiplierState& state, const SolverSpec& spec) {
  (void)spec;
  const auto& view = problem.view(i);
  const auto& blk = problem.block(i);
  if (w_minus_i.size() != view.coupling_refs.size())
    throw Error(ErrorCode::MissingCouplingValue, "block " + std::to_string(i));
  state.validate(problem.num_constraints());
  const auto n = static_cast<Eigen::Index>(blk.dim());

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t t = 0; t < view.terms.size(); ++t) {
    const auto& term = problem.terms()[view.terms[t]];
    if (!term.expr || !term.expr->is_affine())
      throw Error(ErrorCode::NotApplicable, "term '" + term.id + "' is not affine");
    const auto& slots = view.term_slots[t];
    for (std::size_t j = 0; j < term.expr->linear.size(); ++j)
      if (slots[j].local >= 0) rhs[slots[j].local] -= term.expr->linear[j];
  }
  Eigen::VectorXd a(n);
  for (std::size_t c = 0; c < view.constraints.size(); ++c) {
    const std::size_t idx = view.constraints[c];
    const auto& con = problem.constraints()[idx];
    if (con.kind != ConstraintKind::Equality || !con.expr || !con.expr->is_affine())
      throw Error(ErrorCode::NotApplicable, "constraint '" + con.id + "' is not an affine equality");
    const auto& slots = view.constraint_slots[c];
    a.setZero();
    double b = con.expr->constant;
    for (std::size_t j = 0; j < con.expr->linear.size(); ++j) {
      if (slots[j].local >= 0)
        a[slots[j].local] += con.expr->linear[j];
      else
        b += con.expr->linear[j] * w_minus_i[slots[j].coupling];
    }
    const double r2 = state.rho[idx] * state.rho[idx];
    normal.noalias() += 2.0 * r2 * a * a.transpose();
    rhs -= a * (state.mu[idx] + 2.0 * r2 * b);
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
  if (normal.isZero(0.0) || lu.rank() < n)
    throw Error(ErrorCode::SingularNormal, "normal matrix of block " + std::to_string(i) + " is singular");
  const Eigen::VectorXd x = lu.solve(rhs);

  BlockSolution out;
  out.x.assign(x.data(), x.data() + n);
  for (std::size_t j = 0; j < out.x.size(); ++j)
    if (!std::isfinite(out.x[j])) throw Error(ErrorCode::NonFiniteValue, "analytic solution");
    else if (out.x[j] < blk.lower[j] || out.x[j] > blk.upper[j])
      throw Error(ErrorCode::NotApplicable, "analytic minimizer of block " + std::to_string(i) +
                                                " leaves its box");
  out.iters_used = 1;
  out.stationarity = 0.0;
  out.status = SolveStatus::Converged;
  out.value = eval_local_al(problem, i, out.x, w_minus_i, state);
  return out;
}

BlockSolution solve_block(const DecomposedProblem& problem, BlockId i, std::span<const double> w_minus_i,
                          const MultiplierState& state, std::span<const double> warm_start,
                          const SolverSpec& spec) {
  switch (spec.kind) {
    case SolverKind::ProjectedGradient:
      return solve_block_projected_gradient(problem, i, w_minus_i, state, warm_start, spec);
    case SolverKind::AnalyticLinear:
      return solve_block_analytic_linear(problem, i, w_minus_i, state, spec);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown solver kind");
}

std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& fn,
                                               std::span<const double> x, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidConfig, "finite difference step must be > 0");
  std::vector<double> p(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    p[j] = x[j] + h;
    const double fp = fn(p);
    p[j] = x[j] - h;
    const double fm = fn(p);
    p[j] = x[j];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw Error(ErrorCode::NonFiniteValue, "function value at coordinate " + std::to_string(j));
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace dald
