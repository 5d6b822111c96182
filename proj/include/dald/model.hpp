#pragma once

// Block-decomposed constrained problems.
//
// A problem is a set of variable blocks x_1..x_n with box-shaped local sets,
// a list of smooth objective terms and a list of smooth constraints. Every
// term and constraint reads an explicit list of variables (block, element);
// the blocks it touches form its scope. From the scopes the problem derives
// the coupling sets R_i, the constraint assignment phi_i and the coupling
// variables x_{-i} of every block.

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dald/error.hpp"

namespace dald {

/// 1-based block identifier.
using BlockId = int;

/// One scalar variable: element `index` (0-based) of block `block`.
struct VarRef {
  BlockId block = 0;
  std::size_t index = 0;

  auto operator<=>(const VarRef&) const = default;
};

/// Values of every block, indexed by block position (id - 1).
using Point = std::vector<std::vector<double>>;

struct VariableBlock {
  BlockId id = 0;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::string> labels;
  /// Starting value x^{1,0}; empty means zeros projected into the box.
  std::vector<double> initial;

  std::size_t dim() const { return lower.size(); }
};

/// Closed-form smooth expression over a term's variable list:
///   sum_j linear[j] v_j + sum coeff v_a v_b + sum coeff exp(v_a) + constant.
/// Terms and constraints built from an expression keep it so that solvers and
/// serializers can inspect the structure.
struct Expression {
  struct Product {
    std::size_t a = 0;
    std::size_t b = 0;
    double coeff = 0.0;
  };
  struct Exponential {
    std::size_t a = 0;
    double coeff = 0.0;
  };

  std::vector<double> linear;
  std::vector<Product> products;
  std::vector<Exponential> exponentials;
  double constant = 0.0;

  double value(std::span<const double> v) const;
  /// Overwrites g (size = number of scoped variables) with the gradient.
  void gradient(std::span<const double> v, std::span<double> g) const;
  bool is_affine() const { return products.empty() && exponentials.empty(); }
};

using EvalFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<void(std::span<const double>, std::span<double>)>;

struct ObjectiveTerm {
  std::string id;
  std::vector<VarRef> vars;
  EvalFn eval;
  GradFn grad;
  std::optional<Expression> expr;
};

enum class ConstraintKind { Equality, Inequality };

/// Equality means value == 0, inequality means value <= 0.
struct Constraint {
  std::string id;
  ConstraintKind kind = ConstraintKind::Equality;
  std::vector<VarRef> vars;
  EvalFn eval;
  GradFn grad;
  std::optional<Expression> expr;
};

ObjectiveTerm make_term(std::string id, std::vector<VarRef> vars, Expression expr);
Constraint make_constraint(std::string id, ConstraintKind kind, std::vector<VarRef> vars,
                           Expression expr);

/// Where a scoped variable is read from when evaluating a block's local view:
/// `local >= 0` is an index into x_i, otherwise `coupling` indexes x_{-i}.
struct Slot {
  int local = -1;
  std::size_t coupling = 0;
};

/// Precomputed per-block evaluation layout.
struct BlockView {
  std::vector<std::size_t> terms;        // terms whose scope contains the block
  std::vector<std::size_t> constraints;  // phi_i, ascending constraint index
  std::vector<std::vector<Slot>> term_slots;
  std::vector<std::vector<Slot>> constraint_slots;
  std::vector<VarRef> coupling_refs;  // canonical x_{-i} layout
};

class DecomposedProblem {
 public:
  const std::vector<VariableBlock>& blocks() const { return blocks_; }
  const std::vector<ObjectiveTerm>& terms() const { return terms_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }

  std::size_t num_blocks() const { return blocks_.size(); }
  std::size_t num_constraints() const { return constraints_.size(); }
  std::size_t total_dim() const { return total_dim_; }

  const VariableBlock& block(BlockId i) const;
  /// R_i, ascending.
  const std::vector<BlockId>& coupling_map(BlockId i) const;
  /// phi_i as constraint indices, ascending.
  const std::vector<std::size_t>& constraint_assignment(BlockId i) const;
  const BlockView& view(BlockId i) const;
  bool coupled(BlockId a, BlockId b) const;

  /// Offset of block i inside the flattened vector (x_1, ..., x_n).
  std::size_t offset(BlockId i) const;
  std::size_t flat_index(VarRef r) const { return offset(r.block) + r.index; }

  Point initial_point() const;
  Point zero_point() const;
  std::vector<double> flatten(const Point& x) const;
  Point unflatten(std::span<const double> flat) const;
  /// Throws DimensionMismatch if x does not match the block layout.
  void check_point(const Point& x) const;

  friend DecomposedProblem build_problem(std::vector<VariableBlock> blocks,
                                         std::vector<ObjectiveTerm> terms,
                                         std::vector<Constraint> constraints);

 private:
  void check_block(BlockId i) const;

  std::vector<VariableBlock> blocks_;
  std::vector<ObjectiveTerm> terms_;
  std::vector<Constraint> constraints_;
  std::vector<std::vector<BlockId>> coupling_;
  std::vector<std::vector<std::size_t>> assignment_;
  std::vector<BlockView> views_;
  std::vector<std::size_t> offsets_;
  std::size_t total_dim_ = 0;
};

/// Validates the inputs and derives R_i, phi_i and the coupling layouts.
/// Blocks may be given in any order; ids must be exactly 1..n.
DecomposedProblem build_problem(std::vector<VariableBlock> blocks,
                                std::vector<ObjectiveTerm> terms,
                                std::vector<Constraint> constraints);

/// x_{-i}: the elements of coupled blocks read by a term or constraint that
/// block i shares, ordered by (block id, element index).
std::vector<double> coupling_variables(const DecomposedProblem& problem, BlockId i,
                                       const Point& x);

/// Sorted set of blocks a variable list touches.
std::vector<BlockId> scope_of(std::span<const VarRef> vars);

}  // namespace dald
