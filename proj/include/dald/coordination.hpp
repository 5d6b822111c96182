#pragma once

// Solving sequences for the block sweeps.
//
// A hierarchical network is a DAG over the blocks whose edges point from a
// child to its parent, i.e. along the direction information flows: a child
// is solved first and its fresh value is visible to the parent within the
// same sweep. The single root (the node without an outgoing edge) is solved
// last. The matrix form stores a[i][j] = 1 iff i -> j, with the out-degree on
// the diagonal.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dald/model.hpp"

namespace dald {

using Edge = std::pair<BlockId, BlockId>;  // (child, parent)

class HierarchicalNetwork {
 public:
  int num_nodes() const { return n_; }
  /// Sorted, unique.
  const std::vector<Edge>& edges() const { return edges_; }
  /// Length of the longest child chain below the node; leaves are level 0.
  int level_of(BlockId node) const;
  /// Direct children of the node, ascending.
  const std::vector<BlockId>& predecessors(BlockId node) const;
  BlockId root() const { return root_; }

  bool operator==(const HierarchicalNetwork& o) const { return n_ == o.n_ && edges_ == o.edges_; }

  friend HierarchicalNetwork make_network(int n, std::vector<Edge> edges);

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<int> level_;
  std::vector<std::vector<BlockId>> preds_;
  BlockId root_ = 0;
};

/// Throws InvalidMatrix (bad node ids, self loops), CyclicPattern or
/// MultipleRoots. Duplicate edges are merged.
HierarchicalNetwork make_network(int n, std::vector<Edge> edges);

/// Every earlier node feeds every later one: edges i -> j for all i < j.
HierarchicalNetwork sequential_chain(int n);

struct HierarchicalMatrix {
  std::vector<std::vector<int>> a;

  int size() const { return static_cast<int>(a.size()); }
  bool operator==(const HierarchicalMatrix&) const = default;
};

HierarchicalMatrix matrix_from_network(const HierarchicalNetwork& net);
/// Throws InvalidMatrix (not square, entries outside {0,1} off the diagonal),
/// DiagonalMismatch, CyclicPattern or MultipleRoots.
HierarchicalNetwork network_from_matrix(const HierarchicalMatrix& h);

enum class CoordinationMode { FullCycle, PartialCycle, SelectiveRepetitive };
enum class SelectionPolicy { Random, Greedy };

using Stages = std::vector<std::vector<BlockId>>;

struct SweepPlan {
  Stages stages;
  CoordinationMode mode = CoordinationMode::FullCycle;
  SelectionPolicy policy = SelectionPolicy::Random;
  std::uint64_t seed = 0;
  /// Blocks per sweep in partial-cycle mode.
  int quota = 1;
  /// Selective-repetitive: times a block is solved per sweep (default 1).
  std::map<BlockId, int> repeats;
  /// Direct predecessors per block (index id - 1).
  std::vector<std::vector<BlockId>> predecessors;

  int num_blocks() const { return static_cast<int>(predecessors.size()); }
  bool is_predecessor(BlockId j, BlockId i) const;
  /// Throws InvalidConfig for an inconsistent plan (blocks missing or
  /// repeated, predecessor in a later stage, bad quota or repeat count).
  void validate() const;
};

/// Earliest-start leveling: stage(v) = 1 + max stage of its children.
SweepPlan es_sweep_plan(const HierarchicalNetwork& net);

/// Blocks to solve in the given sweep, grouped by stage in plan order.
/// `last_dual` holds each block's most recent dual residual norm (+inf for a
/// block not solved yet) and is only read by the greedy policy.
///
/// Random partial-cycle selection walks a sequence of independent random
/// permutations of all blocks, `quota` entries per sweep, so every block is
/// picked exactly once per n/quota sweeps on average and the long-run
/// frequencies are equal.
Stages select_blocks(const SweepPlan& plan, long sweep_index, const std::vector<double>& last_dual);

/// One warning per coupled pair sharing a stage. Such pairs are solved one
/// after the other in ascending id order, never concurrently.
std::vector<std::string> validate_stage_coupling(const DecomposedProblem& problem, const SweepPlan& plan);

/// True when the stage's solves do not read each other's values.
bool stage_is_independent(const DecomposedProblem& problem, const std::vector<BlockId>& stage);

std::string_view to_string(CoordinationMode mode);
std::string_view to_string(SelectionPolicy policy);

}  // namespace dald
