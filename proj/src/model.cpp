#include "dald/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dald {

double Expression::value(std::span<const double> v) const {
  double s = constant;
  for (std::size_t j = 0; j < linear.size(); ++j) s += linear[j] * v[j];
  for (const auto& p : products) s += p.coeff * v[p.a] * v[p.b];
  for (const auto& e : exponentials) s += e.coeff * std::exp(v[e.a]);
  return s;
}

void Expression::gradient(std::span<const double> v, std::span<double> g) const {
  std::fill(g.begin(), g.end(), 0.0);
  for (std::size_t j = 0; j < linear.size(); ++j) g[j] += linear[j];
  for (const auto& p : products) {
    g[p.a] += p.coeff * v[p.b];
    g[p.b] += p.coeff * v[p.a];
  }
  for (const auto& e : exponentials) g[e.a] += e.coeff * std::exp(v[e.a]);
}

namespace {

void check_expression(const Expression& e, std::size_t nvars, const std::string& id) {
  bool ok = e.linear.size() <= nvars;
  for (const auto& p : e.products) ok = ok && p.a < nvars && p.b < nvars;
  for (const auto& x : e.exponentials) ok = ok && x.a < nvars;
  if (!ok) throw Error(ErrorCode::DimensionMismatch, "expression '" + id + "' indexes past its variables");
}

}  // namespace

ObjectiveTerm make_term(std::string id, std::vector<VarRef> vars, Expression expr) {
  check_expression(expr, vars.size(), id);
  ObjectiveTerm t;
  t.id = std::move(id);
  t.vars = std::move(vars);
  t.eval = [expr](std::span<const double> v) { return expr.value(v); };
  t.grad = [expr](std::span<const double> v, std::span<double> g) { expr.gradient(v, g); };
  t.expr = std::move(expr);
  return t;
}

Constraint make_constraint(std::string id, ConstraintKind kind, std::vector<VarRef> vars,
                           Expression expr) {
  check_expression(expr, vars.size(), id);
  Constraint c;
  c.id = std::move(id);
  c.kind = kind;
  c.vars = std::move(vars);
  c.eval = [expr](std::span<const double> v) { return expr.value(v); };
  c.grad = [expr](std::span<const double> v, std::span<double> g) { expr.gradient(v, g); };
  c.expr = std::move(expr);
  return c;
}

std::vector<BlockId> scope_of(std::span<const VarRef> vars) {
  std::vector<BlockId> s;
  s.reserve(vars.size());
  for (const auto& r : vars) s.push_back(r.block);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

void DecomposedProblem::check_block(BlockId i) const {
  if (i < 1 || static_cast<std::size_t>(i) > blocks_.size())
    throw Error(ErrorCode::UnknownBlock, "block " + std::to_string(i));
}

const VariableBlock& DecomposedProblem::block(BlockId i) const {
  check_block(i);
  return blocks_[i - 1];
}

const std::vector<BlockId>& DecomposedProblem::coupling_map(BlockId i) const {
  check_block(i);
  return coupling_[i - 1];
}

const std::vector<std::size_t>& DecomposedProblem::constraint_assignment(BlockId i) const {
  check_block(i);
  return assignment_[i - 1];
}

const BlockView& DecomposedProblem::view(BlockId i) const {
  check_block(i);
  return views_[i - 1];
}

bool DecomposedProblem::coupled(BlockId a, BlockId b) const {
  const auto& r = coupling_map(a);
  return std::binary_search(r.begin(), r.end(), b);
}

std::size_t DecomposedProblem::offset(BlockId i) const {
  check_block(i);
  return offsets_[i - 1];
}

Point DecomposedProblem::zero_point() const {
  Point x;
  x.reserve(blocks_.size());
  for (const auto& b : blocks_) x.emplace_back(b.dim(), 0.0);
  return x;
}

Point DecomposedProblem::initial_point() const {
  Point x;
  x.reserve(blocks_.size());
  for (const auto& b : blocks_) {
    std::vector<double> v = b.initial.empty() ? std::vector<double>(b.dim(), 0.0) : b.initial;
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::clamp(v[j], b.lower[j], b.upper[j]);
    x.push_back(std::move(v));
  }
  return x;
}

void DecomposedProblem::check_point(const Point& x) const {
  if (x.size() != blocks_.size())
    throw Error(ErrorCode::DimensionMismatch, "point has " + std::to_string(x.size()) +
                                                  " blocks, expected " + std::to_string(blocks_.size()));
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    if (x[b].size() != blocks_[b].dim())
      throw Error(ErrorCode::DimensionMismatch, "block " + std::to_string(b + 1) + " has wrong dimension");
}

std::vector<double> DecomposedProblem::flatten(const Point& x) const {
  check_point(x);
  std::vector<double> flat;
  flat.reserve(total_dim_);
  for (const auto& xi : x) flat.insert(flat.end(), xi.begin(), xi.end());
  return flat;
}

Point DecomposedProblem::unflatten(std::span<const double> flat) const {
  if (flat.size() != total_dim_) throw Error(ErrorCode::DimensionMismatch, "flat vector length");
  Point x;
  x.reserve(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto first = flat.begin() + static_cast<std::ptrdiff_t>(offsets_[b]);
    x.emplace_back(first, first + static_cast<std::ptrdiff_t>(blocks_[b].dim()));
  }
  return x;
}

namespace {

template <class Item>
void check_item(const Item& item, const std::vector<VariableBlock>& blocks, const char* what) {
  if (item.vars.empty()) throw Error(ErrorCode::EmptyScope, std::string(what) + " '" + item.id + "'");
  if (!item.eval || !item.grad)
    throw Error(ErrorCode::InvalidConfig, std::string(what) + " '" + item.id + "' lacks eval/grad");
  for (const auto& r : item.vars) {
    if (r.block < 1 || static_cast<std::size_t>(r.block) > blocks.size())
      throw Error(ErrorCode::DanglingBlockRef, std::string(what) + " '" + item.id + "' reads block " +
                                                   std::to_string(r.block));
    if (r.index >= blocks[r.block - 1].dim())
      throw Error(ErrorCode::DanglingBlockRef, std::string(what) + " '" + item.id + "' reads element " +
                                                   std::to_string(r.index) + " of block " +
                                                   std::to_string(r.block));
  }
}

std::vector<Slot> make_slots(std::span<const VarRef> vars, BlockId i,
                             const std::vector<VarRef>& coupling_refs) {
  std::vector<Slot> slots;
  slots.reserve(vars.size());
  for (const auto& r : vars) {
    Slot s;
    if (r.block == i) {
      s.local = static_cast<int>(r.index);
    } else {
      auto it = std::lower_bound(coupling_refs.begin(), coupling_refs.end(), r);
      s.coupling = static_cast<std::size_t>(it - coupling_refs.begin());
    }
    slots.push_back(s);
  }
  return slots;
}

}  // namespace

DecomposedProblem build_problem(std::vector<VariableBlock> blocks, std::vector<ObjectiveTerm> terms,
                                std::vector<Constraint> constraints) {
  std::sort(blocks.begin(), blocks.end(),
            [](const VariableBlock& a, const VariableBlock& b) { return a.id < b.id; });
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b > 0 && blocks[b].id == blocks[b - 1].id)
      throw Error(ErrorCode::DuplicateBlockId, "block " + std::to_string(blocks[b].id));
    if (blocks[b].id != static_cast<BlockId>(b + 1))
      throw Error(ErrorCode::UnknownBlock, "block ids must be 1..n without gaps, found " +
                                               std::to_string(blocks[b].id));
    auto& blk = blocks[b];
    if (blk.lower.size() != blk.upper.size() || blk.lower.empty())
      throw Error(ErrorCode::DimensionMismatch, "block " + std::to_string(blk.id) + " bounds");
    for (std::size_t j = 0; j < blk.dim(); ++j)
      if (!(blk.lower[j] <= blk.upper[j]))
        throw Error(ErrorCode::InvalidBox, "block " + std::to_string(blk.id) + " element " +
                                               std::to_string(j));
    if (!blk.initial.empty() && blk.initial.size() != blk.dim())
      throw Error(ErrorCode::DimensionMismatch, "block " + std::to_string(blk.id) + " initial value");
    if (blk.labels.empty())
      for (std::size_t j = 0; j < blk.dim(); ++j)
        blk.labels.push_back("x" + std::to_string(blk.id) + "_" + std::to_string(j));
    if (blk.labels.size() != blk.dim())
      throw Error(ErrorCode::DimensionMismatch, "block " + std::to_string(blk.id) + " labels");
  }
  for (const auto& t : terms) check_item(t, blocks, "term");
  for (const auto& c : constraints) check_item(c, blocks, "constraint");

  DecomposedProblem p;
  const std::size_t n = blocks.size();
  p.blocks_ = std::move(blocks);
  p.terms_ = std::move(terms);
  p.constraints_ = std::move(constraints);
  p.offsets_.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    p.offsets_[b] = p.total_dim_;
    p.total_dim_ += p.blocks_[b].dim();
  }

  std::vector<std::set<BlockId>> coupled(n);
  std::vector<std::set<VarRef>> coupling_refs(n);
  p.views_.resize(n);
  p.assignment_.resize(n);

  auto visit = [&](std::span<const VarRef> vars, std::size_t index, bool is_constraint) {
    const auto scope = scope_of(vars);
    for (BlockId i : scope) {
      auto& view = p.views_[i - 1];
      (is_constraint ? view.constraints : view.terms).push_back(index);
      for (BlockId j : scope)
        if (j != i) coupled[i - 1].insert(j);
      for (const auto& r : vars)
        if (r.block != i) coupling_refs[i - 1].insert(r);
    }
  };
  for (std::size_t t = 0; t < p.terms_.size(); ++t) visit(p.terms_[t].vars, t, false);
  for (std::size_t c = 0; c < p.constraints_.size(); ++c) visit(p.constraints_[c].vars, c, true);

  p.coupling_.resize(n);
  for (std::size_t b = 0; b < n; ++b) {
    const BlockId i = static_cast<BlockId>(b + 1);
    p.coupling_[b].assign(coupled[b].begin(), coupled[b].end());
    auto& view = p.views_[b];
    view.coupling_refs.assign(coupling_refs[b].begin(), coupling_refs[b].end());
    p.assignment_[b] = view.constraints;
    for (std::size_t t : view.terms)
      view.term_slots.push_back(make_slots(p.terms_[t].vars, i, view.coupling_refs));
    for (std::size_t c : view.constraints)
      view.constraint_slots.push_back(make_slots(p.constraints_[c].vars, i, view.coupling_refs));
  }
  return p;
}

std::vector<double> coupling_variables(const DecomposedProblem& problem, BlockId i, const Point& x) {
  const auto& refs = problem.view(i).coupling_refs;
  problem.check_point(x);
  std::vector<double> w;
  w.reserve(refs.size());
  for (const auto& r : refs) w.push_back(x[r.block - 1][r.index]);
  return w;
}

}  // namespace dald
