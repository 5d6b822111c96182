#include <cmath>
#include <random>

#include "doctest.h"

#include "dald/driver.hpp"
#include "dald/problems.hpp"
#include "support.hpp"

using namespace dald;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VariableBlock free_block(BlockId id, std::size_t dim = 1) {
  VariableBlock b;
  b.id = id;
  b.lower.assign(dim, -kInf);
  b.upper.assign(dim, kInf);
  return b;
}

SweepPlan chain_plan(int n) { return es_sweep_plan(sequential_chain(n)); }

SweepPlan star_plan(int leaves) {
  std::vector<Edge> e;
  for (int b = 2; b <= leaves + 1; ++b) e.push_back({b, 1});
  return es_sweep_plan(make_network(leaves + 1, e));
}

DaldConfig counterexample_config(int vmax) {
  DaldConfig c;
  c.criterion = InnerCriterion::B4;
  c.v_max = vmax;
  c.eps_dual = 1e-5;
  c.max_cumulative_inner = 20000;
  return c;
}

// Convex QP on two scalar blocks: min (x1-1)^2 + (x2-2)^2 s.t. x1 + x2 = 1,
// whose KKT system gives x = (0, 1), lambda = 2.
DecomposedProblem two_var_qp() {
  Expression f1, f2, c;
  f1.linear = {-2.0};
  f1.products.push_back({0, 0, 1.0});
  f1.constant = 1.0;
  f2.linear = {-4.0};
  f2.products.push_back({0, 0, 1.0});
  f2.constant = 4.0;
  c.linear = {1.0, 1.0};
  c.constant = -1.0;
  return build_problem({free_block(1), free_block(2)},
                       {make_term("f1", {{1, 0}}, f1), make_term("f2", {{2, 0}}, f2)},
                       {make_constraint("c", ConstraintKind::Equality, {{1, 0}, {2, 0}}, c)});
}

testing::RandomProblemOptions convex_eq_options() {
  testing::RandomProblemOptions o;
  o.inequalities = false;
  o.max_constraints = 2;
  return o;
}

void check_trace_order(const RunTrace& t) {
  for (std::size_t r = 1; r < t.records.size(); ++r) {
    const auto& a = t.records[r - 1];
    const auto& b = t.records[r];
    CHECK(b.cumulative_inner > a.cumulative_inner);
    CHECK(((b.k == a.k && b.v == a.v + 1) || (b.k == a.k + 1 && b.v == 1)));
  }
}

}  // namespace

TEST_CASE("inner criteria") {
  DaldConfig c;
  c.v_max = 1;
  CHECK(inner_should_stop(InnerCriterion::B4, 1, 1, 100.0, c));
  CHECK(inner_should_stop(InnerCriterion::B4, 7, 1, 100.0, c));
  CHECK(inner_should_stop(InnerCriterion::B1, 1, 1, 0.0, c));
  CHECK_FALSE(inner_should_stop(InnerCriterion::B1, 1, 50, 1.0, c));
  CHECK(inner_should_stop(InnerCriterion::B1, 1, 1, c.eps_dual, c));

  c.v0 = 1;
  c.v_growth = 2.0;
  CHECK(c.v_max_at(3) == 4);
  CHECK_FALSE(inner_should_stop(InnerCriterion::B3, 3, 3, 1.0, c));
  CHECK(inner_should_stop(InnerCriterion::B3, 3, 4, 1.0, c));
  CHECK(inner_should_stop(InnerCriterion::B3, 3, 1, 1e-4, c));

  CHECK(c.eps_dual_at(1) == 0.1);
  CHECK(c.eps_dual_at(3) == doctest::Approx(0.025));
  CHECK(c.eps_dual_at(100) == c.eps_dual);
  CHECK(inner_should_stop(InnerCriterion::B2, 1, 1, 0.09, c));
  CHECK_FALSE(inner_should_stop(InnerCriterion::B2, 3, 1, 0.09, c));
}

TEST_CASE("outer criterion") {
  DaldConfig c;
  CHECK(outer_should_stop(0.0, 0.0, c));
  CHECK_FALSE(outer_should_stop(1e-4, 1.0, c));
  CHECK_FALSE(outer_should_stop(1.0, 1e-4, c));
  CHECK(outer_should_stop(1e-3, 1e-3, c));
}

TEST_CASE("config validation") {
  DaldConfig c;
  CHECK_NOTHROW(c.validate());
  c.eps_pri = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.criterion = InnerCriterion::B4;
  c.v_max = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.criterion = InnerCriterion::B2;
  c.eps_dual0 = 1e-5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.rho0 = -1;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("counterexample with a single sweep per outer step does not converge") {
  auto p = admm_counterexample();
  DaldConfig c = counterexample_config(1);
  c.max_cumulative_inner = 300;
  SolverSpec an;
  an.kind = SolverKind::AnalyticLinear;
  auto t = run_dald(p, chain_plan(3), an, c);
  CHECK(t.final.status != RunStatus::Converged);
  CHECK(t.final.cumulative_inner <= 300);
  for (const auto& r : t.records) CHECK(r.primal_inf > 1e-3);
}

TEST_CASE("counterexample diverges when given a long budget") {
  auto p = admm_counterexample();
  DaldConfig c = counterexample_config(1);
  c.max_cumulative_inner = 100000;
  c.divergence_norm = 1e4;
  SolverSpec an;
  an.kind = SolverKind::AnalyticLinear;
  auto t = run_dald(p, chain_plan(3), an, c);
  CHECK(t.final.status == RunStatus::Diverged);
}

TEST_CASE("counterexample converges with three sweeps per outer step") {
  auto p = admm_counterexample();
  SolverSpec an;
  an.kind = SolverKind::AnalyticLinear;
  auto t = run_dald(p, chain_plan(3), an, counterexample_config(3));
  REQUIRE(t.final.status == RunStatus::Converged);
  CHECK(inf_norm(t.final.x) <= 1e-3);
  check_trace_order(t);
  for (const auto& r : t.records) CHECK(r.v <= 3);
}

TEST_CASE("analytic and projected gradient solvers give the same run on the counterexample") {
  auto p = admm_counterexample();
  SolverSpec an;
  an.kind = SolverKind::AnalyticLinear;
  SolverSpec pg;
  for (int vmax : {3, 4}) {
    auto a = run_dald(p, chain_plan(3), an, counterexample_config(vmax));
    auto g = run_dald(p, chain_plan(3), pg, counterexample_config(vmax));
    CHECK(a.final.status == RunStatus::Converged);
    CHECK(g.final.status == a.final.status);
    CHECK(g.final.outer_iters == a.final.outer_iters);
    CHECK(g.final.cumulative_inner == a.final.cumulative_inner);
    for (int b = 0; b < 3; ++b) CHECK(std::abs(a.final.x[b][0] - g.final.x[b][0]) <= 1e-6);
  }
}

TEST_CASE("standard criterion converges on the counterexample") {
  auto p = admm_counterexample();
  DaldConfig c;
  c.eps_dual = 1e-5;
  c.max_cumulative_inner = 20000;
  SolverSpec an;
  an.kind = SolverKind::AnalyticLinear;
  auto t = run_dald(p, chain_plan(3), an, c);
  REQUIRE(t.final.status == RunStatus::Converged);
  CHECK(inf_norm(t.final.x) <= 1e-3);
}

TEST_CASE("ALM matches the KKT point of a small QP") {
  auto p = two_var_qp();
  DaldConfig c;
  c.eps_pri = 1e-10;
  c.eps_dual = 1e-10;
  auto t = run_alm(p, SolverSpec{}, c);
  REQUIRE(t.final.status == RunStatus::Converged);
  CHECK(std::abs(t.final.x[0][0] - 0.0) <= 1e-6);
  CHECK(std::abs(t.final.x[1][0] - 1.0) <= 1e-6);
  CHECK(std::abs(t.final.mu[0] - 2.0) <= 1e-6);
}

TEST_CASE("ALM stops after one outer step from an optimal feasible start") {
  Expression f, c;
  f.linear = {-2.0};
  f.products.push_back({0, 0, 1.0});
  c.linear = {1.0};
  c.constant = -1.0;
  auto p = build_problem({free_block(1)}, {make_term("f", {{1, 0}}, f)},
                         {make_constraint("c", ConstraintKind::Equality, {{1, 0}}, c)});
  DaldConfig cfg;
  cfg.initial = Point{{1.0}};
  auto t = run_alm(p, SolverSpec{}, cfg);
  CHECK(t.final.status == RunStatus::Converged);
  CHECK(t.final.outer_iters == 1);
  CHECK(t.final.mu[0] == 0.0);
}

TEST_CASE("ALM and DALD agree on shared convex QPs") {
  std::mt19937_64 rng(71);
  DaldConfig c;
  c.eps_pri = 1e-7;
  c.eps_dual = 1e-7;
  c.max_cumulative_inner = 200000;
  int compared = 0;
  for (int t = 0; t < 20; ++t) {
    auto p = testing::random_problem(rng, convex_eq_options());
    auto a = run_alm(p, SolverSpec{}, c);
    auto d = run_dald(p, chain_plan(static_cast<int>(p.num_blocks())), SolverSpec{}, c);
    if (a.final.status != RunStatus::Converged) continue;
    REQUIRE(d.final.status == RunStatus::Converged);
    for (std::size_t b = 0; b < p.num_blocks(); ++b)
      for (std::size_t j = 0; j < a.final.x[b].size(); ++j) CHECK(std::abs(a.final.x[b][j] - d.final.x[b][j]) <= 1e-4);
    ++compared;
  }
  CHECK(compared >= 15);
}

TEST_CASE("one block: DALD with B1 reproduces the ALM trace") {
  std::mt19937_64 rng(73);
  auto o = convex_eq_options();
  o.max_blocks = 1;
  DaldConfig c;
  c.eps_pri = c.eps_dual = 1e-6;
  for (int t = 0; t < 10; ++t) {
    auto p = testing::random_problem(rng, o);
    auto a = run_alm(p, SolverSpec{}, c);
    auto d = run_dald(p, chain_plan(1), SolverSpec{}, c);
    CHECK(a.records == d.records);
    CHECK(a.final.x == d.final.x);
    CHECK(a.final.mu == d.final.mu);
  }
}

TEST_CASE("BCD on a separable objective settles in one sweep") {
  std::vector<VariableBlock> blocks;
  std::vector<ObjectiveTerm> terms;
  for (int i = 1; i <= 4; ++i) {
    blocks.push_back(free_block(i));
    Expression e;
    e.linear = {-2.0 * i};
    e.products.push_back({0, 0, 1.0});
    e.constant = i * i;
    terms.push_back(make_term("f" + std::to_string(i), {{i, 0}}, e));
  }
  auto p = build_problem(blocks, terms, {});
  DaldConfig c;
  c.record_snapshots = true;
  auto t = run_bcd(p, chain_plan(4), SolverSpec{}, c);
  CHECK(t.final.status == RunStatus::Converged);
  REQUIRE(t.records.size() == 2);
  for (int i = 1; i <= 4; ++i) CHECK(std::abs((*t.records[0].snapshot)[i - 1][0] - i) <= 1e-9);
}

TEST_CASE("BCD reaches the minimizer of a coupled quadratic") {
  // x1^2 + x2^2 + x1 x2 - x1 - 2 x2: normal equations 2x1 + x2 = 1, x1 + 2x2 = 2.
  Expression f;
  f.linear = {-1.0, -2.0};
  f.products = {{0, 0, 1.0}, {1, 1, 1.0}, {0, 1, 1.0}};
  auto p = build_problem({free_block(1), free_block(2)}, {make_term("f", {{1, 0}, {2, 0}}, f)}, {});
  DaldConfig c;
  c.eps_dual = 1e-10;
  auto t = run_bcd(p, chain_plan(2), SolverSpec{}, c);
  REQUIRE(t.final.status == RunStatus::Converged);
  CHECK(std::abs(t.final.x[0][0] - 0.0) <= 1e-8);
  CHECK(std::abs(t.final.x[1][0] - 1.0) <= 1e-8);
}

TEST_CASE("BCD refuses constrained problems") {
  try {
    run_bcd(admm_counterexample(), chain_plan(3), SolverSpec{}, DaldConfig{});
    FAIL("expected ConstraintsPresent");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConstraintsPresent);
  }
}

TEST_CASE("unconstrained problems: DALD trace equals BCD trace") {
  std::mt19937_64 rng(79);
  testing::RandomProblemOptions o;
  o.constraints = false;
  o.bilinear_scale = 0.4;
  DaldConfig c;
  c.eps_dual = 1e-8;
  c.record_snapshots = true;
  for (int t = 0; t < 30; ++t) {
    auto p = testing::random_problem(rng, o);
    const auto plan = chain_plan(static_cast<int>(p.num_blocks()));
    auto d = run_dald(p, plan, SolverSpec{}, c);
    auto b = run_bcd(p, plan, SolverSpec{}, c);
    CHECK(d.records == b.records);
    CHECK(d.final.x == b.final.x);
    CHECK(d.final.status == b.final.status);
  }
}

TEST_CASE("runs are deterministic") {
  auto g = lnf_generate(4, 4, 3, 4);
  DaldConfig c;
  c.criterion = InnerCriterion::B4;
  c.v_max = 2;
  c.record_snapshots = true;
  auto plan = chain_plan(4);
  auto a = run_dald(g.problem, plan, SolverSpec{}, c);
  auto b = run_dald(g.problem, plan, SolverSpec{}, c);
  CHECK(a.records == b.records);
  CHECK(a.final.mu == b.final.mu);

  plan.mode = CoordinationMode::PartialCycle;
  plan.quota = 2;
  plan.seed = 5;
  c.max_cumulative_inner = 500;
  CHECK(run_dald(g.problem, plan, SolverSpec{}, c).records == run_dald(g.problem, plan, SolverSpec{}, c).records);
}

TEST_CASE("parallel stages reproduce the serial run bitwise") {
  auto p = testing::star_problem(6, 3, 83);
  const auto plan = star_plan(6);
  CHECK(validate_stage_coupling(p, plan).empty());
  DaldConfig c;
  c.eps_pri = c.eps_dual = 1e-8;
  c.record_snapshots = true;
  c.record_solve_values = true;
  auto s = run_dald(p, plan, SolverSpec{}, c);
  c.execution = ExecutionPolicy::Parallel;
  auto q = run_dald(p, plan, SolverSpec{}, c);
  CHECK(s.final.status == RunStatus::Converged);
  CHECK(s.records == q.records);
  CHECK(s.final.x == q.final.x);
}

TEST_CASE("coupled blocks in one stage run serially under the parallel policy") {
  auto p = toy_example();
  SweepPlan plan;
  plan.stages = {{1, 2, 3, 4}};
  plan.predecessors.assign(4, {});
  DaldConfig c;
  c.criterion = InnerCriterion::B4;
  c.v_max = 2;
  c.max_cumulative_inner = 50;
  c.record_snapshots = true;
  auto s = run_dald(p, plan, SolverSpec{}, c);
  c.execution = ExecutionPolicy::Parallel;
  auto q = run_dald(p, plan, SolverSpec{}, c);
  CHECK(s.records == q.records);
}

TEST_CASE("fresh values come from direct predecessors only") {
  // Edges 1 -> 3 and 2 -> 3 but no edge between 1 and 2: block 2 must read
  // block 1 from the previous sweep even though 1 was solved first.
  auto p = admm_counterexample();
  auto plan = es_sweep_plan(make_network(3, {{1, 3}, {2, 3}}));
  plan.stages = {{1}, {2}, {3}};
  DaldConfig c = counterexample_config(1);
  c.max_outer = 1;
  c.record_snapshots = true;
  SolverSpec an;
  an.kind = SolverKind::AnalyticLinear;
  auto t = run_dald(p, plan, an, c);
  const auto& x = *t.records[0].snapshot;
  MultiplierState s = MultiplierState::initial(3);
  const double x1 = solve_block(p, 1, std::vector<double>{1.0, 1.0}, s, std::vector<double>{1.0}, an).x[0];
  const double x2 = solve_block(p, 2, std::vector<double>{1.0, 1.0}, s, std::vector<double>{1.0}, an).x[0];
  const double x3 = solve_block(p, 3, std::vector<double>{x1, x2}, s, std::vector<double>{1.0}, an).x[0];
  CHECK(x[0][0] == x1);
  CHECK(x[1][0] == x2);
  CHECK(x[2][0] == x3);
}

TEST_CASE("partial cycle waits until every block has been solved") {
  // Started at the optimum, every solve returns the same point, so a plain
  // B1 run would stop after the first sweep.
  std::vector<VariableBlock> blocks;
  std::vector<ObjectiveTerm> terms;
  for (int i = 1; i <= 3; ++i) {
    blocks.push_back(free_block(i));
    Expression e;
    e.products.push_back({0, 0, 1.0});
    terms.push_back(make_term("f" + std::to_string(i), {{i, 0}}, e));
  }
  Expression c;
  c.linear = {1.0, 1.0, 1.0};
  auto p = build_problem(blocks, terms, {make_constraint("c", ConstraintKind::Equality, {{1, 0}, {2, 0}, {3, 0}}, c)});
  auto plan = chain_plan(3);
  DaldConfig cfg;
  auto full = run_dald(p, plan, SolverSpec{}, cfg);
  CHECK(full.records.size() == 1);
  plan.mode = CoordinationMode::PartialCycle;
  plan.quota = 1;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    plan.seed = seed;
    auto part = run_dald(p, plan, SolverSpec{}, cfg);
    CHECK(part.final.status == RunStatus::Converged);
    CHECK(part.records.size() == 3);
  }
}

TEST_CASE("greedy partial cycle converges on a coupled QP") {
  auto p = two_var_qp();
  auto plan = chain_plan(2);
  plan.mode = CoordinationMode::PartialCycle;
  plan.policy = SelectionPolicy::Greedy;
  DaldConfig c;
  c.eps_pri = c.eps_dual = 1e-6;
  c.max_cumulative_inner = 100000;
  auto t = run_dald(p, plan, SolverSpec{}, c);
  REQUIRE(t.final.status == RunStatus::Converged);
  CHECK(std::abs(t.final.x[0][0]) <= 1e-4);
  CHECK(std::abs(t.final.x[1][0] - 1.0) <= 1e-4);
}

TEST_CASE("selective repetition converges on a coupled QP") {
  auto p = two_var_qp();
  auto plan = chain_plan(2);
  plan.mode = CoordinationMode::SelectiveRepetitive;
  plan.repeats = {{2, 3}};
  DaldConfig c;
  c.eps_pri = c.eps_dual = 1e-6;
  auto t = run_dald(p, plan, SolverSpec{}, c);
  REQUIRE(t.final.status == RunStatus::Converged);
  CHECK(std::abs(t.final.x[1][0] - 1.0) <= 1e-4);
}

TEST_CASE("sweeps never increase the augmented Lagrangian") {
  std::mt19937_64 rng(89);
  DaldConfig c;
  c.record_solve_values = true;
  c.eps_pri = c.eps_dual = 1e-6;
  c.criterion = InnerCriterion::B4;
  c.v_max = 3;
  long checked = 0;
  for (int t = 0; t < 30; ++t) {
    auto p = testing::random_problem(rng);
    auto tr = run_dald(p, chain_plan(static_cast<int>(p.num_blocks())), SolverSpec{}, c);
    for (const auto& r : tr.records) {
      REQUIRE(r.solve_al_values.size() == p.num_blocks() + 1);
      for (std::size_t s = 1; s < r.solve_al_values.size(); ++s) {
        CHECK(r.solve_al_values[s] <= r.solve_al_values[s - 1] + 1e-9);
        ++checked;
      }
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("multiplier steps equal twice the squared penalty times the residual") {
  auto p = two_var_qp();
  DaldConfig c;
  c.eps_pri = c.eps_dual = 1e-12;
  c.record_snapshots = true;
  c.rho0 = 1.5;
  RunTrace prev;
  for (int k = 1; k <= 6; ++k) {
    c.max_outer = k;
    auto t = run_dald(p, chain_plan(2), SolverSpec{}, c);
    REQUIRE(t.final.status == RunStatus::MaxOuterReached);
    const std::vector<double> mu0 = k == 1 ? std::vector<double>{0.0} : prev.final.mu;
    const auto state = MultiplierState::initial(1, c.rho0);
    auto before = state;
    before.mu = mu0;
    const auto C = primal_residual(p, *t.records.back().snapshot, before);
    CHECK(t.final.mu[0] - mu0[0] == doctest::Approx(2 * 1.5 * 1.5 * C[0]).epsilon(1e-12));
    prev = t;
  }
}

TEST_CASE("B1 exit point is a fixed point of one more sweep") {
  auto p = two_var_qp();
  DaldConfig c;
  c.eps_pri = c.eps_dual = 1e-6;
  auto t = run_dald(p, chain_plan(2), SolverSpec{}, c);
  REQUIRE(t.final.status == RunStatus::Converged);
  auto s = MultiplierState::initial(1);
  s.mu = t.final.mu;
  Point x = t.final.x;
  const double x1 = solve_block(p, 1, coupling_variables(p, 1, x), s, x[0], SolverSpec{}).x[0];
  x[0][0] = x1;
  const double x2 = solve_block(p, 2, coupling_variables(p, 2, x), s, x[1], SolverSpec{}).x[0];
  CHECK(std::abs(x1 - t.final.x[0][0]) <= c.eps_dual);
  CHECK(std::abs(x2 - t.final.x[1][0]) <= c.eps_dual);
}

TEST_CASE("B2 and B3 converge on the counterexample") {
  auto p = admm_counterexample();
  SolverSpec an;
  an.kind = SolverKind::AnalyticLinear;
  for (auto crit : {InnerCriterion::B2, InnerCriterion::B3}) {
    DaldConfig c = counterexample_config(1);
    c.criterion = crit;
    c.eps_dual0 = 0.1;
    auto t = run_dald(p, chain_plan(3), an, c);
    CHECK(t.final.status == RunStatus::Converged);
    if (crit == InnerCriterion::B3)
      for (const auto& r : t.records) CHECK(r.v <= c.v_max_at(r.k));
  }
}

TEST_CASE("a solver error ends the run with SolverFailure") {
  auto p = toy_example();
  SolverSpec an;
  an.kind = SolverKind::AnalyticLinear;
  auto t = run_dald(p, chain_plan(4), an, DaldConfig{});
  CHECK(t.final.status == RunStatus::SolverFailure);
  CHECK(t.final.message.find("NotApplicable") != std::string::npos);
}

TEST_CASE("toy example runs stay inside the boxes") {
  auto p = toy_example();
  DaldConfig c;
  c.criterion = InnerCriterion::B4;
  c.v_max = 2;
  c.max_cumulative_inner = 2000;
  auto t = run_dald(p, chain_plan(4), SolverSpec{}, c);
  for (const auto& b : t.final.x)
    for (double v : b) {
      CHECK(v >= 1.0);
      CHECK(v <= 7.0);
    }
  check_trace_order(t);
}

TEST_CASE("plan and problem sizes must match") {
  CHECK_THROWS_AS(run_dald(admm_counterexample(), chain_plan(2), SolverSpec{}, DaldConfig{}), Error);
}
