#pragma once

// Random instance generators and brute-force oracles shared by the tests.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "dald/model.hpp"

namespace testing {

using namespace dald;

struct RandomProblemOptions {
  int min_blocks = 1;
  int max_blocks = 4;
  int max_dim = 3;
  int max_constraints = 4;
  bool inequalities = true;
  bool finite_boxes = true;
  /// Keep the objective strictly convex (diagonally dominant Hessian).
  bool convex = true;
  bool constraints = true;
  double bilinear_scale = 0.2;
};

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

/// Separable quadratics q/2 v^2 + b v per element, a few cross-block
/// bilinear terms and random linear constraints over random scopes.
inline DecomposedProblem random_problem(std::mt19937_64& rng, const RandomProblemOptions& o = {}) {
  const double inf = std::numeric_limits<double>::infinity();
  const int n = uniform_int(rng, o.min_blocks, o.max_blocks);
  std::vector<VariableBlock> blocks;
  std::vector<VarRef> all;
  for (int b = 1; b <= n; ++b) {
    VariableBlock blk;
    blk.id = b;
    const int d = uniform_int(rng, 1, o.max_dim);
    for (int j = 0; j < d; ++j) {
      if (o.finite_boxes) {
        const double lo = uniform(rng, -3.0, 0.0);
        blk.lower.push_back(lo);
        blk.upper.push_back(lo + uniform(rng, 1.0, 5.0));
      } else {
        blk.lower.push_back(-inf);
        blk.upper.push_back(inf);
      }
      all.push_back({b, static_cast<std::size_t>(j)});
    }
    blocks.push_back(std::move(blk));
  }
  std::vector<ObjectiveTerm> terms;
  for (const auto& r : all) {
    Expression e;
    e.linear = {uniform(rng, -2.0, 2.0)};
    e.products.push_back({0, 0, 0.5 * uniform(rng, 1.0, 2.0)});
    terms.push_back(make_term("q" + std::to_string(terms.size()), {r}, e));
  }
  if (n > 1) {
    const int pairs = uniform_int(rng, 0, n);
    for (int p = 0; p < pairs; ++p) {
      const VarRef a = all[uniform_int(rng, 0, static_cast<int>(all.size()) - 1)];
      VarRef b = all[uniform_int(rng, 0, static_cast<int>(all.size()) - 1)];
      if (a.block == b.block) continue;
      Expression e;
      const double s = o.convex ? o.bilinear_scale : 2.0;
      e.products.push_back({0, 1, uniform(rng, -s, s)});
      terms.push_back(make_term("b" + std::to_string(terms.size()), {a, b}, e));
    }
  }
  std::vector<Constraint> cons;
  if (o.constraints) {
    const int m = uniform_int(rng, 1, o.max_constraints);
    for (int c = 0; c < m; ++c) {
      std::vector<VarRef> vars;
      for (const auto& r : all)
        if (uniform(rng, 0.0, 1.0) < 0.5) vars.push_back(r);
      if (vars.empty()) vars.push_back(all[uniform_int(rng, 0, static_cast<int>(all.size()) - 1)]);
      Expression e;
      for (std::size_t j = 0; j < vars.size(); ++j) e.linear.push_back(uniform(rng, -2.0, 2.0));
      e.constant = uniform(rng, -1.0, 1.0);
      const bool ineq = o.inequalities && uniform(rng, 0.0, 1.0) < 0.4;
      cons.push_back(make_constraint("c" + std::to_string(c), ineq ? ConstraintKind::Inequality : ConstraintKind::Equality,
                                     std::move(vars), e));
    }
  }
  return build_problem(std::move(blocks), std::move(terms), std::move(cons));
}

inline Point random_point(std::mt19937_64& rng, const DecomposedProblem& p, double spread = 3.0) {
  Point x = p.zero_point();
  for (std::size_t b = 0; b < x.size(); ++b) {
    const auto& blk = p.blocks()[b];
    for (std::size_t j = 0; j < x[b].size(); ++j) {
      const double lo = std::isfinite(blk.lower[j]) ? blk.lower[j] : -spread;
      const double hi = std::isfinite(blk.upper[j]) ? blk.upper[j] : spread;
      x[b][j] = uniform(rng, lo, hi);
    }
  }
  return x;
}

/// Minimizer of 1/2 x'Hx + g'x over the box lo <= x <= hi by enumerating
/// every active-set pattern (each coordinate at its lower bound, upper bound
/// or free) and keeping the KKT point. Only for tiny dimensions.
inline std::vector<double> box_qp_enumerate(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                            const std::vector<double>& lo, const std::vector<double>& hi) {
  const int n = static_cast<int>(g.size());
  int patterns = 1;
  for (int j = 0; j < n; ++j) patterns *= 3;
  std::vector<double> best;
  double best_val = std::numeric_limits<double>::infinity();
  for (int code = 0; code < patterns; ++code) {
    std::vector<int> state(n);
    int c = code;
    for (int j = 0; j < n; ++j) {
      state[j] = c % 3;
      c /= 3;
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::vector<int> free;
    for (int j = 0; j < n; ++j) {
      if (state[j] == 0) x[j] = lo[j];
      else if (state[j] == 1) x[j] = hi[j];
      else free.push_back(j);
    }
    if (!free.empty()) {
      const int f = static_cast<int>(free.size());
      Eigen::MatrixXd Hf(f, f);
      Eigen::VectorXd rhs(f);
      for (int a = 0; a < f; ++a) {
        rhs[a] = -g[free[a]];
        for (int j = 0; j < n; ++j)
          if (state[j] != 2) rhs[a] -= H(free[a], j) * x[j];
        for (int b = 0; b < f; ++b) Hf(a, b) = H(free[a], free[b]);
      }
      const Eigen::VectorXd xf = Hf.ldlt().solve(rhs);
      for (int a = 0; a < f; ++a) x[free[a]] = xf[a];
    }
    bool feasible = true;
    for (int j = 0; j < n; ++j) feasible = feasible && x[j] >= lo[j] - 1e-12 && x[j] <= hi[j] + 1e-12;
    if (!feasible) continue;
    const double val = 0.5 * x.dot(H * x) + g.dot(x);
    if (val < best_val) {
      best_val = val;
      best.assign(x.data(), x.data() + n);
    }
  }
  return best;
}

}  // namespace testing

namespace testing {

/// Root block 1 coupled to leaves 2..n through one constraint each, leaves
/// uncoupled from one another: every leaf stage runs independently.
inline DecomposedProblem star_problem(int leaves, int leaf_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<VariableBlock> blocks;
  for (int b = 1; b <= leaves + 1; ++b) {
    VariableBlock blk;
    blk.id = b;
    const int d = b == 1 ? 1 : leaf_dim;
    blk.lower.assign(d, -inf);
    blk.upper.assign(d, inf);
    blocks.push_back(std::move(blk));
  }
  std::vector<ObjectiveTerm> terms;
  std::vector<Constraint> cons;
  {
    Expression e;
    e.products.push_back({0, 0, 1.0});
    terms.push_back(make_term("root", {{1, 0}}, e));
  }
  for (int b = 2; b <= leaves + 1; ++b) {
    std::vector<VarRef> vars;
    Expression f;
    for (int j = 0; j < leaf_dim; ++j) {
      vars.push_back({b, static_cast<std::size_t>(j)});
      f.linear.push_back(uniform(rng, -1, 1));
      f.products.push_back({static_cast<std::size_t>(j), static_cast<std::size_t>(j), uniform(rng, 0.5, 1.5)});
    }
    terms.push_back(make_term("leaf" + std::to_string(b), vars, f));
    Expression c;
    c.linear.assign(leaf_dim, 0.0);
    for (auto& a : c.linear) a = uniform(rng, -1, 1);
    c.linear.push_back(1.0);
    c.constant = uniform(rng, -1, 1);
    vars.push_back({1, 0});
    cons.push_back(make_constraint("link" + std::to_string(b), ConstraintKind::Equality, vars, c));
  }
  return build_problem(std::move(blocks), std::move(terms), std::move(cons));
}

}  // namespace testing
