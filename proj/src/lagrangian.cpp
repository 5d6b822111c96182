#include "dald/lagrangian.hpp"

#include <algorithm>
#include <cmath>

namespace dald {

MultiplierState MultiplierState::initial(std::size_t m, double rho0, double growth, double cap) {
  MultiplierState s;
  s.mu.assign(m, 0.0);
  s.rho.assign(m, rho0);
  s.penalty_growth = growth;
  s.rho_cap = cap;
  s.validate(m);
  return s;
}

void MultiplierState::validate(std::size_t m) const {
  if (mu.size() != m || rho.size() != m)
    throw Error(ErrorCode::DimensionMismatch, "multiplier state has " + std::to_string(mu.size()) +
                                                  " multipliers for " + std::to_string(m) + " constraints");
  for (double r : rho)
    if (!(r > 0.0)) throw Error(ErrorCode::NonpositivePenalty, "rho must be > 0");
  if (!(penalty_growth >= 1.0)) throw Error(ErrorCode::InvalidConfig, "penalty growth must be >= 1");
  if (!(rho_cap > 0.0)) throw Error(ErrorCode::NonpositivePenalty, "rho cap must be > 0");
}

SlackResult optimal_slack(double psi, double mu, double rho) {
  if (!(rho > 0.0)) throw Error(ErrorCode::NonpositivePenalty, "rho must be > 0");
  const double threshold = -mu / (2.0 * rho * rho);
  SlackResult r;
  r.slack_squared = std::max(0.0, threshold - psi);
  r.phi = std::max(psi, threshold);
  return r;
}

namespace {

// Contribution mu phi + rho^2 phi^2 and d/dpsi of it.
struct Penalty {
  double value;
  double slope;
};

inline Penalty penalty_of(ConstraintKind kind, double psi, double mu, double rho) {
  const double r2 = rho * rho;
  if (kind == ConstraintKind::Inequality) {
    const double threshold = -mu / (2.0 * r2);
    if (!(psi > threshold)) return {mu * threshold + r2 * threshold * threshold, 0.0};
  }
  return {mu * psi + r2 * psi * psi, mu + 2.0 * r2 * psi};
}

std::size_t max_arity(const DecomposedProblem& p) {
  std::size_t m = 0;
  for (const auto& t : p.terms()) m = std::max(m, t.vars.size());
  for (const auto& c : p.constraints()) m = std::max(m, c.vars.size());
  return m;
}

}  // namespace

double eval_objective(const DecomposedProblem& problem, const Point& x) {
  problem.check_point(x);
  double f = 0.0;
  std::vector<double> buf;
  for (const auto& t : problem.terms()) {
    buf.resize(t.vars.size());
    for (std::size_t j = 0; j < t.vars.size(); ++j) buf[j] = x[t.vars[j].block - 1][t.vars[j].index];
    f += t.eval(buf);
  }
  return f;
}

double eval_global_al(const DecomposedProblem& problem, const Point& x, const MultiplierState& state) {
  state.validate(problem.num_constraints());
  const auto flat = problem.flatten(x);
  return GlobalAugmentedLagrangian(problem, state).value(flat);
}

std::vector<double> grad_global_al(const DecomposedProblem& problem, const Point& x,
                                   const MultiplierState& state) {
  state.validate(problem.num_constraints());
  const auto flat = problem.flatten(x);
  std::vector<double> g(flat.size());
  GlobalAugmentedLagrangian(problem, state).gradient(flat, g);
  return g;
}

// ---------------------------------------------------------------------------

LocalAugmentedLagrangian::LocalAugmentedLagrangian(const DecomposedProblem& problem, BlockId i,
                                                   std::span<const double> w_minus_i,
                                                   const MultiplierState& state)
    : problem_(problem),
      block_(problem.block(i)),
      view_(problem.view(i)),
      id_(i),
      w_(w_minus_i),
      state_(state),
      buf_(max_arity(problem)),
      gbuf_(max_arity(problem)) {
  if (w_minus_i.size() != view_.coupling_refs.size())
    throw Error(ErrorCode::MissingCouplingValue,
                "block " + std::to_string(i) + " needs " + std::to_string(view_.coupling_refs.size()) +
                    " coupling values, got " + std::to_string(w_minus_i.size()));
  if (state.mu.size() != problem.num_constraints() || state.rho.size() != problem.num_constraints())
    throw Error(ErrorCode::DimensionMismatch, "multiplier state size");
}

void LocalAugmentedLagrangian::gather(std::span<const Slot> slots, std::span<const double> x_i) const {
  for (std::size_t j = 0; j < slots.size(); ++j)
    buf_[j] = slots[j].local >= 0 ? x_i[static_cast<std::size_t>(slots[j].local)] : w_[slots[j].coupling];
}

double LocalAugmentedLagrangian::value(std::span<const double> x_i) const {
  if (x_i.size() != dim()) throw Error(ErrorCode::DimensionMismatch, "local variable size");
  const auto& terms = problem_.terms();
  const auto& cons = problem_.constraints();
  double s = 0.0;
  for (std::size_t t = 0; t < view_.terms.size(); ++t) {
    const auto& slots = view_.term_slots[t];
    gather(slots, x_i);
    s += terms[view_.terms[t]].eval(std::span<const double>(buf_.data(), slots.size()));
  }
  for (std::size_t c = 0; c < view_.constraints.size(); ++c) {
    const std::size_t idx = view_.constraints[c];
    const auto& slots = view_.constraint_slots[c];
    gather(slots, x_i);
    const double psi = cons[idx].eval(std::span<const double>(buf_.data(), slots.size()));
    s += penalty_of(cons[idx].kind, psi, state_.mu[idx], state_.rho[idx]).value;
  }
  return s;
}

double LocalAugmentedLagrangian::gradient(std::span<const double> x_i, std::span<double> g) const {
  if (x_i.size() != dim() || g.size() != dim())
    throw Error(ErrorCode::DimensionMismatch, "local variable size");
  const auto& terms = problem_.terms();
  const auto& cons = problem_.constraints();
  std::fill(g.begin(), g.end(), 0.0);
  double s = 0.0;
  for (std::size_t t = 0; t < view_.terms.size(); ++t) {
    const auto& slots = view_.term_slots[t];
    gather(slots, x_i);
    std::span<const double> v(buf_.data(), slots.size());
    std::span<double> gv(gbuf_.data(), slots.size());
    const auto& term = terms[view_.terms[t]];
    s += term.eval(v);
    term.grad(v, gv);
    for (std::size_t j = 0; j < slots.size(); ++j)
      if (slots[j].local >= 0) g[static_cast<std::size_t>(slots[j].local)] += gv[j];
  }
  for (std::size_t c = 0; c < view_.constraints.size(); ++c) {
    const std::size_t idx = view_.constraints[c];
    const auto& slots = view_.constraint_slots[c];
    gather(slots, x_i);
    std::span<const double> v(buf_.data(), slots.size());
    std::span<double> gv(gbuf_.data(), slots.size());
    const auto& con = cons[idx];
    const double psi = con.eval(v);
    const Penalty pen = penalty_of(con.kind, psi, state_.mu[idx], state_.rho[idx]);
    s += pen.value;
    if (pen.slope == 0.0) continue;
    con.grad(v, gv);
    for (std::size_t j = 0; j < slots.size(); ++j)
      if (slots[j].local >= 0) g[static_cast<std::size_t>(slots[j].local)] += pen.slope * gv[j];
  }
  return s;
}

// ---------------------------------------------------------------------------

GlobalAugmentedLagrangian::GlobalAugmentedLagrangian(const DecomposedProblem& problem,
                                                     const MultiplierState& state)
    : problem_(problem), state_(state), buf_(max_arity(problem)), gbuf_(max_arity(problem)) {
  if (state.mu.size() != problem.num_constraints() || state.rho.size() != problem.num_constraints())
    throw Error(ErrorCode::DimensionMismatch, "multiplier state size");
  for (const auto& b : problem.blocks()) {
    lower_.insert(lower_.end(), b.lower.begin(), b.lower.end());
    upper_.insert(upper_.end(), b.upper.begin(), b.upper.end());
  }
}

void GlobalAugmentedLagrangian::gather(std::span<const VarRef> vars, std::span<const double> flat) const {
  for (std::size_t j = 0; j < vars.size(); ++j) buf_[j] = flat[problem_.flat_index(vars[j])];
}

double GlobalAugmentedLagrangian::value(std::span<const double> flat) const {
  if (flat.size() != dim()) throw Error(ErrorCode::DimensionMismatch, "flat vector length");
  double s = 0.0;
  for (const auto& t : problem_.terms()) {
    gather(t.vars, flat);
    s += t.eval(std::span<const double>(buf_.data(), t.vars.size()));
  }
  const auto& cons = problem_.constraints();
  for (std::size_t c = 0; c < cons.size(); ++c) {
    gather(cons[c].vars, flat);
    const double psi = cons[c].eval(std::span<const double>(buf_.data(), cons[c].vars.size()));
    s += penalty_of(cons[c].kind, psi, state_.mu[c], state_.rho[c]).value;
  }
  return s;
}

double GlobalAugmentedLagrangian::gradient(std::span<const double> flat, std::span<double> g) const {
  if (flat.size() != dim() || g.size() != dim())
    throw Error(ErrorCode::DimensionMismatch, "flat vector length");
  std::fill(g.begin(), g.end(), 0.0);
  double s = 0.0;
  for (const auto& t : problem_.terms()) {
    const std::size_t k = t.vars.size();
    gather(t.vars, flat);
    std::span<const double> v(buf_.data(), k);
    std::span<double> gv(gbuf_.data(), k);
    s += t.eval(v);
    t.grad(v, gv);
    for (std::size_t j = 0; j < k; ++j) g[problem_.flat_index(t.vars[j])] += gv[j];
  }
  const auto& cons = problem_.constraints();
  for (std::size_t c = 0; c < cons.size(); ++c) {
    const std::size_t k = cons[c].vars.size();
    gather(cons[c].vars, flat);
    std::span<const double> v(buf_.data(), k);
    std::span<double> gv(gbuf_.data(), k);
    const double psi = cons[c].eval(v);
    const Penalty pen = penalty_of(cons[c].kind, psi, state_.mu[c], state_.rho[c]);
    s += pen.value;
    if (pen.slope == 0.0) continue;
    cons[c].grad(v, gv);
    for (std::size_t j = 0; j < k; ++j) g[problem_.flat_index(cons[c].vars[j])] += pen.slope * gv[j];
  }
  return s;
}

// ---------------------------------------------------------------------------

double eval_local_al(const DecomposedProblem& problem, BlockId i, std::span<const double> x_i,
                     std::span<const double> w_minus_i, const MultiplierState& state) {
  return LocalAugmentedLagrangian(problem, i, w_minus_i, state).value(x_i);
}

std::vector<double> grad_local_al(const DecomposedProblem& problem, BlockId i,
                                  std::span<const double> x_i, std::span<const double> w_minus_i,
                                  const MultiplierState& state) {
  LocalAugmentedLagrangian al(problem, i, w_minus_i, state);
  std::vector<double> g(al.dim());
  al.gradient(x_i, g);
  return g;
}

MultiplierState update_multipliers(const MultiplierState& state, std::span<const double> primal) {
  if (primal.size() != state.mu.size())
    throw Error(ErrorCode::DimensionMismatch, "primal residual size");
  MultiplierState next = state;
  for (std::size_t c = 0; c < primal.size(); ++c)
    next.mu[c] = state.mu[c] + 2.0 * state.rho[c] * state.rho[c] * primal[c];
  return next;
}

MultiplierState update_penalty(const MultiplierState& state) {
  MultiplierState next = state;
  for (double& r : next.rho) r = std::min(state.penalty_growth * r, state.rho_cap);
  return next;
}

std::vector<double> primal_residual(const DecomposedProblem& problem, const Point& x,
                                    const MultiplierState& state) {
  problem.check_point(x);
  state.validate(problem.num_constraints());
  const auto& cons = problem.constraints();
  std::vector<double> c_vals(cons.size());
  std::vector<double> buf;
  for (std::size_t c = 0; c < cons.size(); ++c) {
    buf.resize(cons[c].vars.size());
    for (std::size_t j = 0; j < buf.size(); ++j)
      buf[j] = x[cons[c].vars[j].block - 1][cons[c].vars[j].index];
    c_vals[c] = effective_value(cons[c].kind, cons[c].eval(buf), state.mu[c], state.rho[c]);
  }
  return c_vals;
}

DualResidual dual_residual(const Point& x_prev, const Point& x_curr) {
  if (x_prev.size() != x_curr.size()) throw Error(ErrorCode::DimensionMismatch, "snapshot block count");
  DualResidual d;
  d.per_block.resize(x_curr.size());
  for (std::size_t b = 0; b < x_curr.size(); ++b) {
    if (x_prev[b].size() != x_curr[b].size())
      throw Error(ErrorCode::DimensionMismatch, "snapshot block " + std::to_string(b + 1));
    auto& db = d.per_block[b];
    db.resize(x_curr[b].size());
    for (std::size_t j = 0; j < db.size(); ++j) {
      db[j] = x_curr[b][j] - x_prev[b][j];
      d.inf_norm = std::max(d.inf_norm, std::abs(db[j]));
    }
  }
  return d;
}

Residuals compute_residuals(const DecomposedProblem& problem, const Point& x_prev, const Point& x_curr,
                            const MultiplierState& state) {
  Residuals r;
  r.primal = primal_residual(problem, x_curr, state);
  r.primal_inf_norm = inf_norm(r.primal);
  auto d = dual_residual(x_prev, x_curr);
  r.dual = std::move(d.per_block);
  r.dual_inf_norm = d.inf_norm;
  return r;
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double e : v) {
    if (std::isnan(e)) return e;
    m = std::max(m, std::abs(e));
  }
  return m;
}

double inf_norm(const Point& x) {
  double m = 0.0;
  for (const auto& b : x) {
    const double n = inf_norm(b);
    if (std::isnan(n)) return n;
    m = std::max(m, n);
  }
  return m;
}

}  // namespace dald
