#include "dald/coordination.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace dald {

namespace {

std::string edge_str(const Edge& e) { return std::to_string(e.first) + "->" + std::to_string(e.second); }

}  // namespace

int HierarchicalNetwork::level_of(BlockId node) const {
  if (node < 1 || node > n_) throw Error(ErrorCode::UnknownBlock, "node " + std::to_string(node));
  return level_[node - 1];
}

const std::vector<BlockId>& HierarchicalNetwork::predecessors(BlockId node) const {
  if (node < 1 || node > n_) throw Error(ErrorCode::UnknownBlock, "node " + std::to_string(node));
  return preds_[node - 1];
}

HierarchicalNetwork make_network(int n, std::vector<Edge> edges) {
  if (n < 1) throw Error(ErrorCode::InvalidMatrix, "network needs at least one node");
  for (const auto& e : edges) {
    if (e.first < 1 || e.first > n || e.second < 1 || e.second > n)
      throw Error(ErrorCode::InvalidMatrix, "edge " + edge_str(e) + " references an unknown node");
    if (e.first == e.second) throw Error(ErrorCode::InvalidMatrix, "self loop at node " + std::to_string(e.first));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  HierarchicalNetwork net;
  net.n_ = n;
  net.preds_.assign(n, {});
  std::vector<std::vector<BlockId>> succ(n);
  std::vector<int> indeg(n, 0);
  for (const auto& [c, p] : edges) {
    net.preds_[p - 1].push_back(c);
    succ[c - 1].push_back(p);
    ++indeg[p - 1];
  }
  for (auto& p : net.preds_) std::sort(p.begin(), p.end());

  // Kahn's algorithm; the level is the longest chain of children below.
  net.level_.assign(n, 0);
  std::vector<BlockId> ready;
  for (int v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push_back(v + 1);
  int visited = 0;
  while (!ready.empty()) {
    const BlockId v = ready.back();
    ready.pop_back();
    ++visited;
    for (BlockId p : succ[v - 1]) {
      net.level_[p - 1] = std::max(net.level_[p - 1], net.level_[v - 1] + 1);
      if (--indeg[p - 1] == 0) ready.push_back(p);
    }
  }
  if (visited != n) throw Error(ErrorCode::CyclicPattern, "the edge pattern contains a cycle");

  std::vector<BlockId> roots;
  for (int v = 0; v < n; ++v)
    if (succ[v].empty()) roots.push_back(v + 1);
  if (roots.size() != 1) {
    std::string list;
    for (BlockId r : roots) list += (list.empty() ? "" : ",") + std::to_string(r);
    throw Error(ErrorCode::MultipleRoots, "nodes without a parent: " + list);
  }
  net.root_ = roots.front();
  net.edges_ = std::move(edges);
  return net;
}

HierarchicalNetwork sequential_chain(int n) {
  std::vector<Edge> edges;
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) edges.emplace_back(i, j);
  return make_network(n, std::move(edges));
}

HierarchicalMatrix matrix_from_network(const HierarchicalNetwork& net) {
  const int n = net.num_nodes();
  HierarchicalMatrix h;
  h.a.assign(n, std::vector<int>(n, 0));
  for (const auto& [c, p] : net.edges()) {
    h.a[c - 1][p - 1] = 1;
    ++h.a[c - 1][c - 1];
  }
  return h;
}

HierarchicalNetwork network_from_matrix(const HierarchicalMatrix& h) {
  const int n = h.size();
  if (n == 0) throw Error(ErrorCode::InvalidMatrix, "empty matrix");
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(h.a[i].size()) != n)
      throw Error(ErrorCode::InvalidMatrix, "row " + std::to_string(i + 1) + " has " +
                                                std::to_string(h.a[i].size()) + " entries, expected " +
                                                std::to_string(n));
    int degree = 0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const int v = h.a[i][j];
      if (v != 0 && v != 1)
        throw Error(ErrorCode::InvalidMatrix, "off-diagonal entry (" + std::to_string(i + 1) + "," +
                                                  std::to_string(j + 1) + ") = " + std::to_string(v));
      if (v == 1) {
        ++degree;
        edges.emplace_back(i + 1, j + 1);
      }
    }
    if (h.a[i][i] != degree)
      throw Error(ErrorCode::DiagonalMismatch, "a[" + std::to_string(i + 1) + "][" + std::to_string(i + 1) +
                                                   "] = " + std::to_string(h.a[i][i]) + " but row " +
                                                   std::to_string(i + 1) + " has " + std::to_string(degree) +
                                                   " off-diagonal ones");
  }
  return make_network(n, std::move(edges));
}

bool SweepPlan::is_predecessor(BlockId j, BlockId i) const {
  const auto& p = predecessors[i - 1];
  return std::binary_search(p.begin(), p.end(), j);
}

void SweepPlan::validate() const {
  const int n = num_blocks();
  if (n < 1) throw Error(ErrorCode::InvalidConfig, "plan has no blocks");
  std::vector<int> stage_of(n, -1);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (stages[s].empty()) throw Error(ErrorCode::InvalidConfig, "empty stage " + std::to_string(s + 1));
    for (BlockId b : stages[s]) {
      if (b < 1 || b > n) throw Error(ErrorCode::InvalidConfig, "plan lists unknown block " + std::to_string(b));
      if (stage_of[b - 1] >= 0)
        throw Error(ErrorCode::InvalidConfig, "block " + std::to_string(b) + " appears twice in the plan");
      stage_of[b - 1] = static_cast<int>(s);
    }
  }
  for (int b = 0; b < n; ++b) {
    if (stage_of[b] < 0) throw Error(ErrorCode::InvalidConfig, "block " + std::to_string(b + 1) + " is not planned");
    for (BlockId p : predecessors[b])
      if (stage_of[p - 1] >= stage_of[b])
        throw Error(ErrorCode::InvalidConfig, "predecessor " + std::to_string(p) + " of block " +
                                                  std::to_string(b + 1) + " is not in an earlier stage");
  }
  if (mode == CoordinationMode::PartialCycle && (quota < 1 || quota > n))
    throw Error(ErrorCode::InvalidConfig, "partial-cycle quota must lie in [1, n]");
  for (const auto& [b, r] : repeats) {
    if (b < 1 || b > n) throw Error(ErrorCode::InvalidConfig, "repeat for unknown block " + std::to_string(b));
    if (r < 1) throw Error(ErrorCode::InvalidConfig, "repeat count must be >= 1");
  }
}

SweepPlan es_sweep_plan(const HierarchicalNetwork& net) {
  SweepPlan plan;
  const int n = net.num_nodes();
  int depth = 0;
  for (int v = 1; v <= n; ++v) depth = std::max(depth, net.level_of(v) + 1);
  plan.stages.assign(depth, {});
  for (int v = 1; v <= n; ++v) plan.stages[net.level_of(v)].push_back(v);
  plan.predecessors.reserve(n);
  for (int v = 1; v <= n; ++v) plan.predecessors.push_back(net.predecessors(v));
  return plan;
}

namespace {

// Entry `pos` of the endless concatenation of per-epoch shuffles.
BlockId shuffled_entry(std::uint64_t seed, long pos, int n) {
  const long epoch = pos / n;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<BlockId> perm(n);
  std::iota(perm.begin(), perm.end(), 1);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm[pos % n];
}

std::set<BlockId> pick_partial(const SweepPlan& plan, long sweep_index, const std::vector<double>& last_dual) {
  const int n = plan.num_blocks();
  std::set<BlockId> chosen;
  if (plan.policy == SelectionPolicy::Greedy) {
    std::vector<BlockId> order(n);
    std::iota(order.begin(), order.end(), 1);
    auto key = [&](BlockId b) {
      return b - 1 < static_cast<int>(last_dual.size()) ? last_dual[b - 1]
                                                        : std::numeric_limits<double>::infinity();
    };
    std::stable_sort(order.begin(), order.end(), [&](BlockId a, BlockId b) { return key(a) > key(b); });
    chosen.insert(order.begin(), order.begin() + plan.quota);
    return chosen;
  }
  // An epoch boundary inside a sweep can repeat a block; the duplicate is
  // skipped rather than solved twice.
  const long first = sweep_index * plan.quota;
  for (long pos = first; pos < first + plan.quota; ++pos) chosen.insert(shuffled_entry(plan.seed, pos, n));
  return chosen;
}

}  // namespace

Stages select_blocks(const SweepPlan& plan, long sweep_index, const std::vector<double>& last_dual) {
  switch (plan.mode) {
    case CoordinationMode::FullCycle:
      return plan.stages;
    case CoordinationMode::PartialCycle: {
      const auto chosen = pick_partial(plan, sweep_index, last_dual);
      Stages out;
      for (const auto& stage : plan.stages) {
        std::vector<BlockId> s;
        for (BlockId b : stage)
          if (chosen.count(b)) s.push_back(b);
        if (!s.empty()) out.push_back(std::move(s));
      }
      return out;
    }
    case CoordinationMode::SelectiveRepetitive: {
      Stages out;
      for (const auto& stage : plan.stages) {
        std::vector<BlockId> s;
        for (BlockId b : stage) {
          auto it = plan.repeats.find(b);
          const int times = it == plan.repeats.end() ? 1 : it->second;
          s.insert(s.end(), times, b);
        }
        out.push_back(std::move(s));
      }
      return out;
    }
  }
  return plan.stages;
}

std::vector<std::string> validate_stage_coupling(const DecomposedProblem& problem, const SweepPlan& plan) {
  std::vector<std::string> warnings;
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& stage = plan.stages[s];
    for (std::size_t x = 0; x < stage.size(); ++x)
      for (std::size_t y = x + 1; y < stage.size(); ++y) {
        const BlockId a = std::min(stage[x], stage[y]);
        const BlockId b = std::max(stage[x], stage[y]);
        if (problem.coupled(a, b))
          warnings.push_back("stage " + std::to_string(s + 1) + ": blocks " + std::to_string(a) + " and " +
                             std::to_string(b) + " are coupled; they will be solved serially (" +
                             std::to_string(a) + " before " + std::to_string(b) + ")");
      }
  }
  return warnings;
}

bool stage_is_independent(const DecomposedProblem& problem, const std::vector<BlockId>& stage) {
  for (std::size_t x = 0; x < stage.size(); ++x)
    for (std::size_t y = x + 1; y < stage.size(); ++y)
      if (stage[x] == stage[y] || problem.coupled(stage[x], stage[y])) return false;
  return true;
}

std::string_view to_string(CoordinationMode mode) {
  switch (mode) {
    case CoordinationMode::FullCycle: return "full-cycle";
    case CoordinationMode::PartialCycle: return "partial-cycle";
    case CoordinationMode::SelectiveRepetitive: return "selective-repetitive";
  }
  return "unknown";
}

std::string_view to_string(SelectionPolicy policy) {
  return policy == SelectionPolicy::Random ? "random" : "greedy";
}

}  // namespace dald
