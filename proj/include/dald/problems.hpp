#pragma once

// Built-in problems: a small nonconvex model exercising the decomposition
// mechanics, a three-block linear system on which direct multi-block ADMM
// diverges, and random grid min-cost-flow instances with an exact oracle.

#include <cstdint>
#include <vector>

#include "dald/model.hpp"

namespace dald {

/// Eight scalars v1..v8 in [1,7] split as x1=(v1,v5), x2=(v2,v7),
/// x3=(v3,v6), x4=(v4,v8):
///   min 5v1 + 2v2 + v3 + 3v4 + v5 v7 + v6 v8
///   s.t. v1 + v5 v6 - 7 = 0,  v2 + v5 + v7 - 10 = 0,  v5 v6 + exp(v7) - 12 = 0.
DecomposedProblem toy_example();

/// min 0 s.t. A1 x1 + A2 x2 + A3 x3 = 0 with A = [[1,1,1],[1,1,2],[1,2,2]]
/// (columns A_i), three unbounded scalar blocks started at (1,1,1).
DecomposedProblem admm_counterexample();
extern const double kCounterexampleMatrix[3][3];

enum class NodeRole { Source, Sink, Transshipment };

struct LnfNode {
  int row = 0;
  int col = 0;
  NodeRole role = NodeRole::Transshipment;
  double supply = 0.0;
  BlockId part = 1;
};

struct LnfArc {
  int tail = 0;  // node index, row-major
  int head = 0;
  double lower = 0.0;
  double upper = 50.0;
  int cost = 1;
};

struct LnfInstance {
  int rows = 0;
  int cols = 0;
  int n_partitions = 1;
  std::uint64_t seed = 0;
  std::vector<LnfNode> nodes;
  std::vector<LnfArc> arcs;
};

struct LnfOptions {
  /// Sources (and, separately, sinks) as a fraction of all nodes.
  double terminal_fraction = 0.05;
  /// Width of the source (left) and sink (right) column bands.
  double band_fraction = 0.25;
  double mean_supply = 50.0;
  double capacity = 50.0;
  int min_cost = 1;
  int max_cost = 5;
  int max_attempts = 200;
};

struct LnfGenerated {
  DecomposedProblem problem;
  LnfInstance instance;
};

/// Grid with arcs in both directions between 4-neighbours. The grid is cut
/// into n_partitions equal rectangular tiles numbered row-major (row-major
/// strips of equal size if no tiling fits). Every arc variable belongs to the
/// tile of its tail node, every node balance to the tile of its node.
/// Throws BadPartition or InfeasibleBalance.
LnfGenerated lnf_generate(int rows, int cols, std::uint64_t seed, int n_partitions, const LnfOptions& options = {});

/// The decomposed model of an existing instance (e.g. one loaded from JSON).
DecomposedProblem lnf_problem(const LnfInstance& instance);

/// Tile assignment used by the generator; throws BadPartition.
std::vector<BlockId> grid_partition(int rows, int cols, int n_partitions);

struct FlowArc {
  int tail = 0;
  int head = 0;
  long long capacity = 0;
  long long cost = 0;
};

struct FlowSolution {
  double cost = 0.0;
  std::vector<double> flow;  // per arc
};

/// Exact min-cost flow on integer data (successive shortest paths with
/// potentials). Positive supply is injected, negative withdrawn; total
/// supply must be zero. Throws Infeasible if the demand cannot be routed.
FlowSolution min_cost_flow(int num_nodes, const std::vector<FlowArc>& arcs, const std::vector<long long>& supply);

FlowSolution lnf_oracle(const LnfInstance& instance);

std::string_view to_string(NodeRole role);

}  // namespace dald
