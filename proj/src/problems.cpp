#include "dald/problems.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <random>

namespace dald {

std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Source: return "source";
    case NodeRole::Sink: return "sink";
    case NodeRole::Transshipment: return "transshipment";
  }
  return "unknown";
}

DecomposedProblem toy_example() {
  std::vector<VariableBlock> blocks;
  const char* names[4][2] = {{"v1", "v5"}, {"v2", "v7"}, {"v3", "v6"}, {"v4", "v8"}};
  for (int b = 1; b <= 4; ++b) blocks.push_back({b, {1.0, 1.0}, {7.0, 7.0}, {names[b - 1][0], names[b - 1][1]}, {}});
  const VarRef v1{1, 0}, v5{1, 1}, v2{2, 0}, v7{2, 1}, v3{3, 0}, v6{3, 1}, v4{4, 0}, v8{4, 1};

  auto linear = [](std::vector<double> c, double k = 0.0) {
    Expression e;
    e.linear = std::move(c);
    e.constant = k;
    return e;
  };
  std::vector<ObjectiveTerm> terms;
  terms.push_back(make_term("f1", {v1}, linear({5.0})));
  terms.push_back(make_term("f2", {v2}, linear({2.0})));
  terms.push_back(make_term("f3", {v3}, linear({1.0})));
  terms.push_back(make_term("f4", {v4}, linear({3.0})));
  Expression b57;
  b57.products.push_back({0, 1, 1.0});
  terms.push_back(make_term("v5v7", {v5, v7}, b57));
  terms.push_back(make_term("v6v8", {v6, v8}, b57));

  std::vector<Constraint> cons;
  Expression c1 = linear({1.0}, -7.0);
  c1.products.push_back({1, 2, 1.0});
  cons.push_back(make_constraint("c1", ConstraintKind::Equality, {v1, v5, v6}, c1));
  cons.push_back(make_constraint("c2", ConstraintKind::Equality, {v2, v5, v7}, linear({1.0, 1.0, 1.0}, -10.0)));
  Expression c3 = linear({}, -12.0);
  c3.products.push_back({0, 1, 1.0});
  c3.exponentials.push_back({2, 1.0});
  cons.push_back(make_constraint("c3", ConstraintKind::Equality, {v5, v6, v7}, c3));
  return build_problem(std::move(blocks), std::move(terms), std::move(cons));
}

const double kCounterexampleMatrix[3][3] = {{1, 1, 1}, {1, 1, 2}, {1, 2, 2}};

DecomposedProblem admm_counterexample() {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<VariableBlock> blocks;
  for (int b = 1; b <= 3; ++b) blocks.push_back({b, {-inf}, {inf}, {"x" + std::to_string(b)}, {1.0}});
  std::vector<Constraint> cons;
  for (int r = 0; r < 3; ++r) {
    Expression e;
    e.linear.assign(kCounterexampleMatrix[r], kCounterexampleMatrix[r] + 3);
    cons.push_back(
        make_constraint("row" + std::to_string(r + 1), ConstraintKind::Equality, {{1, 0}, {2, 0}, {3, 0}}, e));
  }
  return build_problem(std::move(blocks), {}, std::move(cons));
}

std::vector<BlockId> grid_partition(int rows, int cols, int n_partitions) {
  if (rows < 1 || cols < 1) throw Error(ErrorCode::BadPartition, "grid must have at least one node");
  if (n_partitions < 1) throw Error(ErrorCode::BadPartition, "need at least one partition");
  const int n = rows * cols;
  std::vector<BlockId> part(n);
  int best_pr = 0;
  for (int pr = 1; pr <= n_partitions; ++pr) {
    if (n_partitions % pr || rows % pr || cols % (n_partitions / pr)) continue;
    // Prefer the most square tiles.
    auto skew = [&](int r) { return std::abs(rows / r - cols / (n_partitions / r)); };
    if (best_pr == 0 || skew(pr) < skew(best_pr)) best_pr = pr;
  }
  if (best_pr > 0) {
    const int pc = n_partitions / best_pr;
    const int th = rows / best_pr, tw = cols / pc;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) part[r * cols + c] = (r / th) * pc + c / tw + 1;
    return part;
  }
  if (n % n_partitions)
    throw Error(ErrorCode::BadPartition, std::to_string(n) + " nodes cannot be split into " +
                                             std::to_string(n_partitions) + " equal parts");
  const int chunk = n / n_partitions;
  for (int i = 0; i < n; ++i) part[i] = i / chunk + 1;
  return part;
}

DecomposedProblem lnf_problem(const LnfInstance& inst) {
  const int n = static_cast<int>(inst.nodes.size());
  const int parts = inst.n_partitions;
  std::vector<VariableBlock> blocks(parts);
  for (int b = 0; b < parts; ++b) blocks[b].id = b + 1;
  std::vector<VarRef> where(inst.arcs.size());
  std::vector<Expression> cost(parts);
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
    const auto& arc = inst.arcs[a];
    if (arc.tail < 0 || arc.tail >= n || arc.head < 0 || arc.head >= n)
      throw Error(ErrorCode::DanglingBlockRef, "arc " + std::to_string(a) + " references an unknown node");
    const BlockId b = inst.nodes[arc.tail].part;
    if (b < 1 || b > parts) throw Error(ErrorCode::BadPartition, "node " + std::to_string(arc.tail) + " part");
    auto& blk = blocks[b - 1];
    where[a] = {b, blk.dim()};
    blk.lower.push_back(arc.lower);
    blk.upper.push_back(arc.upper);
    blk.labels.push_back("t" + std::to_string(arc.tail) + "_" + std::to_string(arc.head));
    cost[b - 1].linear.push_back(arc.cost);
  }
  for (const auto& blk : blocks)
    if (blk.dim() == 0) throw Error(ErrorCode::BadPartition, "part " + std::to_string(blk.id) + " owns no arcs");

  std::vector<ObjectiveTerm> terms;
  for (int b = 0; b < parts; ++b) {
    std::vector<VarRef> vars;
    for (std::size_t j = 0; j < blocks[b].dim(); ++j) vars.push_back({b + 1, j});
    terms.push_back(make_term("cost" + std::to_string(b + 1), std::move(vars), cost[b]));
  }

  std::vector<std::vector<std::size_t>> out(n), in(n);
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) {
    out[inst.arcs[a].tail].push_back(a);
    in[inst.arcs[a].head].push_back(a);
  }
  std::vector<Constraint> cons;
  for (int i = 0; i < n; ++i) {
    if (out[i].empty() && in[i].empty()) continue;
    std::vector<VarRef> vars;
    Expression e;
    for (std::size_t a : out[i]) {
      vars.push_back(where[a]);
      e.linear.push_back(1.0);
    }
    for (std::size_t a : in[i]) {
      vars.push_back(where[a]);
      e.linear.push_back(-1.0);
    }
    e.constant = -inst.nodes[i].supply;
    cons.push_back(make_constraint("balance" + std::to_string(i), ConstraintKind::Equality, std::move(vars), e));
  }
  return build_problem(std::move(blocks), std::move(terms), std::move(cons));
}

LnfGenerated lnf_generate(int rows, int cols, std::uint64_t seed, int n_partitions, const LnfOptions& opt) {
  if (!(opt.capacity > 0.0) || opt.min_cost > opt.max_cost || !(opt.mean_supply > 0.0) || opt.max_attempts < 1)
    throw Error(ErrorCode::InvalidConfig, "LNF generator options");
  LnfInstance inst;
  inst.rows = rows;
  inst.cols = cols;
  inst.seed = seed;
  inst.n_partitions = n_partitions;
  const auto part = grid_partition(rows, cols, n_partitions);
  const int n = rows * cols;
  inst.nodes.resize(n);
  for (int i = 0; i < n; ++i) {
    inst.nodes[i].row = i / cols;
    inst.nodes[i].col = i % cols;
    inst.nodes[i].part = part[i];
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cost_dist(opt.min_cost, opt.max_cost);
  for (int i = 0; i < n; ++i) {
    const int r = i / cols, c = i % cols;
    const int nbr[4][2] = {{r - 1, c}, {r, c - 1}, {r, c + 1}, {r + 1, c}};
    for (const auto& q : nbr) {
      if (q[0] < 0 || q[0] >= rows || q[1] < 0 || q[1] >= cols) continue;
      inst.arcs.push_back({i, q[0] * cols + q[1], 0.0, opt.capacity, cost_dist(rng)});
    }
  }

  const int band = std::max(1, static_cast<int>(cols * opt.band_fraction));
  std::vector<int> left, right;
  for (int i = 0; i < n; ++i) {
    if (i % cols < band)
      left.push_back(i);
    else if (i % cols >= cols - band)
      right.push_back(i);
  }
  if (right.empty())
    for (int i = n - 1; i >= 0 && right.size() < left.size() / 2; --i) {
      right.push_back(i);
      left.erase(std::remove(left.begin(), left.end(), i), left.end());
    }
  int k = std::max(1, static_cast<int>(std::lround(opt.terminal_fraction * n)));
  k = std::min({k, static_cast<int>(left.size()), static_cast<int>(right.size())});

  std::poisson_distribution<int> supply_dist(opt.mean_supply);
  auto draw = [&] {
    int s = 0;
    while (s == 0) s = supply_dist(rng);
    return s;
  };
  for (int attempt = 0; attempt < opt.max_attempts; ++attempt) {
    for (auto& node : inst.nodes) {
      node.role = NodeRole::Transshipment;
      node.supply = 0.0;
    }
    std::shuffle(left.begin(), left.end(), rng);
    std::shuffle(right.begin(), right.end(), rng);
    std::vector<int> sources(left.begin(), left.begin() + k);
    std::vector<int> sinks(right.begin(), right.begin() + k);
    std::sort(sources.begin(), sources.end());
    std::sort(sinks.begin(), sinks.end());
    double total = 0.0;
    for (int i : sources) {
      inst.nodes[i].role = NodeRole::Source;
      inst.nodes[i].supply = draw();
      total += inst.nodes[i].supply;
    }
    for (int i : sinks) {
      inst.nodes[i].role = NodeRole::Sink;
      inst.nodes[i].supply = -draw();
      total += inst.nodes[i].supply;
    }
    if (k > 0) {
      int big = sinks.front();
      for (int i : sinks)
        if (inst.nodes[i].supply < inst.nodes[big].supply) big = i;
      inst.nodes[big].supply -= total;
      if (inst.nodes[big].supply >= 0.0) continue;
    }
    try {
      lnf_oracle(inst);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Infeasible) continue;
      throw;
    }
    return {lnf_problem(inst), std::move(inst)};
  }
  throw Error(ErrorCode::InfeasibleBalance,
              "no balanced feasible supply found after " + std::to_string(opt.max_attempts) + " attempts");
}

FlowSolution min_cost_flow(int num_nodes, const std::vector<FlowArc>& arcs, const std::vector<long long>& supply) {
  if (static_cast<int>(supply.size()) != num_nodes) throw Error(ErrorCode::DimensionMismatch, "supply vector");
  long long balance = 0, required = 0;
  for (long long s : supply) {
    balance += s;
    if (s > 0) required += s;
  }
  if (balance != 0) throw Error(ErrorCode::Infeasible, "supplies do not sum to zero");

  // Residual graph; super source S and super sink T.
  const int S = num_nodes, T = num_nodes + 1, V = num_nodes + 2;
  struct E {
    int to;
    long long cap;
    long long cost;
  };
  std::vector<E> edges;
  std::vector<std::vector<int>> adj(V);
  auto add = [&](int u, int v, long long cap, long long cost) {
    adj[u].push_back(static_cast<int>(edges.size()));
    edges.push_back({v, cap, cost});
    adj[v].push_back(static_cast<int>(edges.size()));
    edges.push_back({u, 0, -cost});
  };
  for (const auto& a : arcs) {
    if (a.tail < 0 || a.tail >= num_nodes || a.head < 0 || a.head >= num_nodes)
      throw Error(ErrorCode::DanglingBlockRef, "flow arc endpoint");
    if (a.capacity < 0 || a.cost < 0) throw Error(ErrorCode::InvalidConfig, "flow arcs need capacity, cost >= 0");
    add(a.tail, a.head, a.capacity, a.cost);
  }
  for (int i = 0; i < num_nodes; ++i) {
    if (supply[i] > 0) add(S, i, supply[i], 0);
    if (supply[i] < 0) add(i, T, -supply[i], 0);
  }

  constexpr long long kInf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> pot(V, 0), dist(V);
  std::vector<int> via(V);
  long long sent = 0, cost = 0;
  while (sent < required) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(via.begin(), via.end(), -1);
    using Item = std::pair<long long, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[S] = 0;
    pq.push({0, S});
    while (!pq.empty()) {
      const auto [d, u] = pq.top();
      pq.pop();
      if (d != dist[u]) continue;
      for (int id : adj[u]) {
        const E& e = edges[id];
        if (e.cap <= 0) continue;
        const long long nd = d + e.cost + pot[u] - pot[e.to];
        if (nd < dist[e.to]) {
          dist[e.to] = nd;
          via[e.to] = id;
          pq.push({nd, e.to});
        }
      }
    }
    if (dist[T] >= kInf)
      throw Error(ErrorCode::Infeasible, "only " + std::to_string(sent) + " of " + std::to_string(required) +
                                             " units can be routed");
    for (int v = 0; v < V; ++v)
      if (dist[v] < kInf) pot[v] += dist[v];
    long long push = required - sent;
    for (int v = T; v != S; v = edges[via[v] ^ 1].to) push = std::min(push, edges[via[v]].cap);
    for (int v = T; v != S; v = edges[via[v] ^ 1].to) {
      edges[via[v]].cap -= push;
      edges[via[v] ^ 1].cap += push;
      cost += push * edges[via[v]].cost;
    }
    sent += push;
  }

  FlowSolution sol;
  sol.cost = static_cast<double>(cost);
  sol.flow.resize(arcs.size());
  for (std::size_t a = 0; a < arcs.size(); ++a) sol.flow[a] = static_cast<double>(edges[2 * a + 1].cap);
  return sol;
}

FlowSolution lnf_oracle(const LnfInstance& inst) {
  std::vector<FlowArc> arcs;
  arcs.reserve(inst.arcs.size());
  double fixed = 0.0;
  std::vector<long long> supply(inst.nodes.size());
  for (std::size_t i = 0; i < inst.nodes.size(); ++i) {
    const double s = inst.nodes[i].supply;
    if (s != std::round(s)) throw Error(ErrorCode::InvalidConfig, "oracle needs integer supplies");
    supply[i] = std::llround(s);
  }
  // Lower bounds are shifted out: x = l + y with 0 <= y <= u - l.
  for (const auto& a : inst.arcs) {
    if (a.lower != std::round(a.lower) || a.upper != std::round(a.upper) || a.upper < a.lower)
      throw Error(ErrorCode::InvalidConfig, "oracle needs integer arc bounds");
    const long long l = std::llround(a.lower);
    arcs.push_back({a.tail, a.head, std::llround(a.upper) - l, a.cost});
    supply[a.tail] -= l;
    supply[a.head] += l;
    fixed += static_cast<double>(l) * a.cost;
  }
  FlowSolution sol = min_cost_flow(static_cast<int>(inst.nodes.size()), arcs, supply);
  sol.cost += fixed;
  for (std::size_t a = 0; a < inst.arcs.size(); ++a) sol.flow[a] += inst.arcs[a].lower;
  return sol;
}

}  // namespace dald
