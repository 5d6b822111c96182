#include "dald/io.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

namespace dald {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void parse_error(const std::string& m) { throw Error(ErrorCode::ParseError, m); }

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) parse_error(std::string("missing field '") + key + "'");
  return j.at(key);
}

double to_bound(const json& v, double missing) {
  if (v.is_null()) return missing;
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    parse_error("bad bound '" + s + "'");
  }
  if (!v.is_number()) parse_error("bound must be a number");
  return v.get<double>();
}

std::vector<double> bounds(const json& arr, double missing) {
  if (!arr.is_array()) parse_error("bounds must be arrays");
  std::vector<double> out;
  for (const auto& v : arr) out.push_back(to_bound(v, missing));
  return out;
}

json bound_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return a;
}

double number_or(const json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) return to_bound(v, fallback);
  if (!v.is_number()) parse_error(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    parse_error(std::string("field '") + key + "': " + e.what());
  }
}

std::vector<VarRef> vars_from(const json& j) {
  std::vector<VarRef> vars;
  for (const auto& v : field(j, "vars")) {
    if (!v.is_array() || v.size() != 2) parse_error("vars entries are [block, index] pairs");
    const int b = v[0].get<int>();
    const long long idx = v[1].get<long long>();
    if (idx < 0) parse_error("negative variable index");
    vars.push_back({b, static_cast<std::size_t>(idx)});
  }
  return vars;
}

Expression expression_from(const json& j) {
  Expression e;
  e.linear = get_or<std::vector<double>>(j, "linear", {});
  if (j.contains("products"))
    for (const auto& p : j.at("products")) {
      if (!p.is_array() || p.size() != 3) parse_error("products entries are [a, b, coeff]");
      e.products.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>(), p[2].get<double>()});
    }
  if (j.contains("exp"))
    for (const auto& p : j.at("exp")) {
      if (!p.is_array() || p.size() != 2) parse_error("exp entries are [a, coeff]");
      e.exponentials.push_back({p[0].get<std::size_t>(), p[1].get<double>()});
    }
  e.constant = number_or(j, "constant", 0.0);
  return e;
}

json expression_to(const Expression& e, const std::vector<VarRef>& vars) {
  json j;
  json v = json::array();
  for (const auto& r : vars) v.push_back({r.block, r.index});
  j["vars"] = v;
  j["linear"] = e.linear;
  json p = json::array();
  for (const auto& x : e.products) p.push_back({x.a, x.b, x.coeff});
  j["products"] = p;
  json ex = json::array();
  for (const auto& x : e.exponentials) ex.push_back({x.a, x.coeff});
  j["exp"] = ex;
  j["constant"] = e.constant;
  return j;
}

}  // namespace

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) parse_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    parse_error("'" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

DecomposedProblem problem_from_json(const json& j) {
  try {
    std::vector<VariableBlock> blocks;
    for (const auto& b : field(j, "blocks")) {
      VariableBlock blk;
      blk.id = field(b, "id").get<int>();
      blk.lower = bounds(field(b, "lower"), -kInf);
      blk.upper = bounds(field(b, "upper"), kInf);
      blk.labels = get_or<std::vector<std::string>>(b, "labels", {});
      blk.initial = get_or<std::vector<double>>(b, "initial", {});
      blocks.push_back(std::move(blk));
    }
    std::vector<ObjectiveTerm> terms;
    if (j.contains("terms"))
      for (const auto& t : j.at("terms"))
        terms.push_back(make_term(get_or<std::string>(t, "id", "term" + std::to_string(terms.size() + 1)),
                                  vars_from(t), expression_from(t)));
    std::vector<Constraint> cons;
    if (j.contains("constraints"))
      for (const auto& c : j.at("constraints")) {
        const auto kind = get_or<std::string>(c, "kind", "eq");
        if (kind != "eq" && kind != "ineq") parse_error("constraint kind must be eq or ineq");
        cons.push_back(make_constraint(get_or<std::string>(c, "id", "c" + std::to_string(cons.size() + 1)),
                                       kind == "eq" ? ConstraintKind::Equality : ConstraintKind::Inequality,
                                       vars_from(c), expression_from(c)));
      }
    return build_problem(std::move(blocks), std::move(terms), std::move(cons));
  } catch (const json::exception& e) {
    parse_error(std::string("problem JSON: ") + e.what());
  }
}

json problem_to_json(const DecomposedProblem& problem) {
  json j;
  json blocks = json::array();
  for (const auto& b : problem.blocks()) {
    json o{{"id", b.id}, {"lower", bound_array(b.lower)}, {"upper", bound_array(b.upper)}, {"labels", b.labels}};
    if (!b.initial.empty()) o["initial"] = b.initial;
    blocks.push_back(o);
  }
  j["blocks"] = blocks;
  json terms = json::array();
  for (const auto& t : problem.terms()) {
    if (!t.expr) throw Error(ErrorCode::InvalidConfig, "term '" + t.id + "' has no closed form");
    json o = expression_to(*t.expr, t.vars);
    o["id"] = t.id;
    terms.push_back(o);
  }
  j["terms"] = terms;
  json cons = json::array();
  for (const auto& c : problem.constraints()) {
    if (!c.expr) throw Error(ErrorCode::InvalidConfig, "constraint '" + c.id + "' has no closed form");
    json o = expression_to(*c.expr, c.vars);
    o["id"] = c.id;
    o["kind"] = c.kind == ConstraintKind::Equality ? "eq" : "ineq";
    cons.push_back(o);
  }
  j["constraints"] = cons;
  return j;
}

HierarchicalMatrix matrix_from_json(const json& j) {
  const json& a = j.is_object() ? field(j, "matrix") : j;
  if (!a.is_array()) parse_error("matrix must be a 2-D integer array");
  HierarchicalMatrix h;
  for (const auto& row : a) {
    if (!row.is_array()) parse_error("matrix rows must be arrays");
    std::vector<int> r;
    for (const auto& v : row) {
      if (!v.is_number_integer()) parse_error("matrix entries must be integers");
      r.push_back(v.get<int>());
    }
    h.a.push_back(std::move(r));
  }
  return h;
}

json matrix_to_json(const HierarchicalMatrix& h) { return json(h.a); }

HierarchicalNetwork network_from_json(const json& j) {
  if (j.is_array() || (j.is_object() && j.contains("matrix"))) return network_from_matrix(matrix_from_json(j));
  try {
    const int n = field(j, "nodes").get<int>();
    std::vector<Edge> edges;
    for (const auto& e : field(j, "edges")) {
      if (!e.is_array() || e.size() != 2) parse_error("edges are [child, parent] pairs");
      edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    return make_network(n, std::move(edges));
  } catch (const json::exception& e) {
    parse_error(std::string("network JSON: ") + e.what());
  }
}

json network_to_json(const HierarchicalNetwork& net) {
  json edges = json::array();
  for (const auto& [c, p] : net.edges()) edges.push_back({c, p});
  return json{{"nodes", net.num_nodes()}, {"edges", edges}};
}

namespace {

NodeRole role_from(const std::string& s) {
  if (s == "source") return NodeRole::Source;
  if (s == "sink") return NodeRole::Sink;
  if (s == "transshipment") return NodeRole::Transshipment;
  parse_error("unknown node role '" + s + "'");
}

}  // namespace

LnfInstance lnf_from_json(const json& j) {
  try {
    LnfInstance inst;
    inst.rows = field(j, "rows").get<int>();
    inst.cols = field(j, "cols").get<int>();
    inst.n_partitions = field(j, "n_partitions").get<int>();
    inst.seed = get_or<std::uint64_t>(j, "seed", 0);
    for (const auto& n : field(j, "nodes"))
      inst.nodes.push_back({field(n, "row").get<int>(), field(n, "col").get<int>(),
                            role_from(field(n, "role").get<std::string>()), field(n, "supply").get<double>(),
                            field(n, "part").get<int>()});
    for (const auto& a : field(j, "arcs"))
      inst.arcs.push_back({field(a, "tail").get<int>(), field(a, "head").get<int>(), number_or(a, "lower", 0.0),
                           number_or(a, "upper", kInf), field(a, "cost").get<int>()});
    return inst;
  } catch (const json::exception& e) {
    parse_error(std::string("LNF JSON: ") + e.what());
  }
}

json lnf_to_json(const LnfInstance& inst) {
  json nodes = json::array();
  for (const auto& n : inst.nodes)
    nodes.push_back({{"row", n.row}, {"col", n.col}, {"role", to_string(n.role)}, {"supply", n.supply},
                     {"part", n.part}});
  json arcs = json::array();
  for (const auto& a : inst.arcs)
    arcs.push_back({{"tail", a.tail}, {"head", a.head}, {"lower", a.lower}, {"upper", a.upper}, {"cost", a.cost}});
  return json{{"rows", inst.rows}, {"cols", inst.cols}, {"n_partitions", inst.n_partitions},
              {"seed", inst.seed}, {"nodes", nodes}, {"arcs", arcs}};
}

void write_lnf_dot(std::ostream& os, const LnfInstance& inst) {
  static const char* palette[] = {"#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462",
                                  "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f"};
  os << "digraph lnf {\n  node [style=filled, shape=circle];\n";
  for (std::size_t i = 0; i < inst.nodes.size(); ++i) {
    const auto& n = inst.nodes[i];
    const char* shape = n.role == NodeRole::Source ? "box" : n.role == NodeRole::Sink ? "doublecircle" : "circle";
    os << "  n" << i << " [label=\"" << i;
    if (n.supply != 0.0) os << "\\n" << n.supply;
    os << "\", shape=" << shape << ", fillcolor=\"" << palette[(n.part - 1) % 12] << "\", pos=\"" << n.col << ","
       << -n.row << "!\"];\n";
  }
  for (const auto& a : inst.arcs) os << "  n" << a.tail << " -> n" << a.head << " [label=\"" << a.cost << "\"];\n";
  os << "}\n";
}

SolverKind solver_kind_from_string(const std::string& s) {
  if (s == "projected-gradient" || s == "pg") return SolverKind::ProjectedGradient;
  if (s == "analytic-linear" || s == "analytic") return SolverKind::AnalyticLinear;
  throw Error(ErrorCode::InvalidConfig, "unknown solver '" + s + "'");
}

InnerCriterion criterion_from_string(const std::string& s) {
  if (s == "B1") return InnerCriterion::B1;
  if (s == "B2") return InnerCriterion::B2;
  if (s == "B3") return InnerCriterion::B3;
  if (s == "B4") return InnerCriterion::B4;
  throw Error(ErrorCode::InvalidConfig, "unknown criterion '" + s + "'");
}

CoordinationMode mode_from_string(const std::string& s) {
  if (s == "full-cycle") return CoordinationMode::FullCycle;
  if (s == "partial-cycle") return CoordinationMode::PartialCycle;
  if (s == "selective-repetitive") return CoordinationMode::SelectiveRepetitive;
  throw Error(ErrorCode::InvalidConfig, "unknown coordination mode '" + s + "'");
}

SelectionPolicy policy_from_string(const std::string& s) {
  if (s == "random") return SelectionPolicy::Random;
  if (s == "greedy") return SelectionPolicy::Greedy;
  throw Error(ErrorCode::InvalidConfig, "unknown selection policy '" + s + "'");
}

ExecutionPolicy execution_from_string(const std::string& s) {
  if (s == "serial") return ExecutionPolicy::Serial;
  if (s == "parallel") return ExecutionPolicy::Parallel;
  throw Error(ErrorCode::InvalidConfig, "unknown execution policy '" + s + "'");
}

json solver_to_json(const SolverSpec& s) {
  return json{{"kind", to_string(s.kind)},
              {"tol_solver", s.tol_solver},
              {"max_iters", s.max_iters},
              {"armijo_c", s.armijo.c},
              {"armijo_shrink", s.armijo.shrink},
              {"initial_step", s.armijo.initial_step},
              {"spectral_step", s.spectral_step}};
}

SolverSpec solver_from_json(const json& j, SolverSpec s) {
  if (j.contains("kind")) s.kind = solver_kind_from_string(j.at("kind").get<std::string>());
  s.tol_solver = number_or(j, "tol_solver", s.tol_solver);
  s.max_iters = get_or<int>(j, "max_iters", s.max_iters);
  s.armijo.c = number_or(j, "armijo_c", s.armijo.c);
  s.armijo.shrink = number_or(j, "armijo_shrink", s.armijo.shrink);
  s.armijo.initial_step = number_or(j, "initial_step", s.armijo.initial_step);
  s.spectral_step = get_or<bool>(j, "spectral_step", s.spectral_step);
  return s;
}

json config_to_json(const DaldConfig& c) {
  json j{{"eps_pri", c.eps_pri},
         {"eps_dual", c.eps_dual},
         {"criterion", to_string(c.criterion)},
         {"eps_dual0", c.eps_dual0},
         {"eps_dual_decay", c.eps_dual_decay},
         {"v0", c.v0},
         {"v_growth", c.v_growth},
         {"v_max", c.v_max},
         {"max_outer", c.max_outer},
         {"max_cumulative_inner", c.max_cumulative_inner},
         {"divergence_norm", c.divergence_norm},
         {"record_snapshots", c.record_snapshots},
         {"record_solve_values", c.record_solve_values},
         {"execution", to_string(c.execution)},
         {"rho0", c.rho0},
         {"penalty_growth", c.penalty_growth},
         {"rho_cap", std::isfinite(c.rho_cap) ? json(c.rho_cap) : json("inf")}};
  if (c.initial) j["initial"] = *c.initial;
  return j;
}

DaldConfig config_from_json(const json& j, DaldConfig c) {
  try {
    c.eps_pri = number_or(j, "eps_pri", c.eps_pri);
    c.eps_dual = number_or(j, "eps_dual", c.eps_dual);
    if (j.contains("criterion")) c.criterion = criterion_from_string(j.at("criterion").get<std::string>());
    c.eps_dual0 = number_or(j, "eps_dual0", c.eps_dual0);
    c.eps_dual_decay = number_or(j, "eps_dual_decay", c.eps_dual_decay);
    c.v0 = get_or<int>(j, "v0", c.v0);
    c.v_growth = number_or(j, "v_growth", c.v_growth);
    c.v_max = get_or<int>(j, "v_max", c.v_max);
    c.max_outer = get_or<int>(j, "max_outer", c.max_outer);
    c.max_cumulative_inner = get_or<long>(j, "max_cumulative_inner", c.max_cumulative_inner);
    c.divergence_norm = number_or(j, "divergence_norm", c.divergence_norm);
    c.record_snapshots = get_or<bool>(j, "record_snapshots", c.record_snapshots);
    c.record_solve_values = get_or<bool>(j, "record_solve_values", c.record_solve_values);
    if (j.contains("execution")) c.execution = execution_from_string(j.at("execution").get<std::string>());
    c.rho0 = number_or(j, "rho0", c.rho0);
    c.penalty_growth = number_or(j, "penalty_growth", c.penalty_growth);
    c.rho_cap = number_or(j, "rho_cap", c.rho_cap);
    if (j.contains("initial") && !j.at("initial").is_null()) c.initial = j.at("initial").get<Point>();
    return c;
  } catch (const json::exception& e) {
    parse_error(std::string("config JSON: ") + e.what());
  }
}

void write_trace_csv(std::ostream& os, const RunTrace& trace) {
  os << kTraceHeader << "\n";
  char buf[512];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof buf, "%d,%d,%ld,%.17g,%.17g,%.17g,%.17g\n", r.k, r.v, r.cumulative_inner, r.objective,
                  r.al_value, r.primal_inf, r.dual_inf);
    os << buf;
  }
}

json summary_to_json(const RunSummary& s) {
  return json{{"status", to_string(s.status)},
              {"message", s.message},
              {"x", s.x},
              {"mu", s.mu},
              {"rho", s.rho},
              {"outer_iters", s.outer_iters},
              {"cumulative_inner", s.cumulative_inner},
              {"objective", s.objective},
              {"al_value", s.al_value},
              {"primal_inf", s.primal_inf},
              {"dual_inf", s.dual_inf},
              {"solver_iters", s.solver_iters},
              {"inexact_solves", s.inexact_solves},
              {"wall_seconds", s.wall_seconds}};
}

}  // namespace dald
