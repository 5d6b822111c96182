#pragma once

// File formats: problems, hierarchical matrices and networks, LNF instances
// (JSON), traces (CSV), run summaries (JSON) and grid drawings (DOT).
//
// Problem JSON:
//   { "blocks": [ {"id": 1, "lower": [..], "upper": [..], "labels": [..], "initial": [..]} ],
//     "terms": [ {"id": "f", "vars": [[block, index], ..], "linear": [..],
//                 "products": [[a, b, coeff], ..], "exp": [[a, coeff], ..], "constant": 0} ],
//     "constraints": [ {.. as terms .., "kind": "eq" | "ineq"} ] }
// Indices a, b in products/exp refer to positions in "vars". Infinite bounds
// are written as null (or the strings "inf" / "-inf").

#include <iosfwd>
#include <string>

#include "json.hpp"

#include "dald/coordination.hpp"
#include "dald/driver.hpp"
#include "dald/problems.hpp"

namespace dald {

using nlohmann::json;

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

DecomposedProblem problem_from_json(const json& j);
/// Throws InvalidConfig for terms or constraints without an expression.
json problem_to_json(const DecomposedProblem& problem);

HierarchicalMatrix matrix_from_json(const json& j);
json matrix_to_json(const HierarchicalMatrix& h);
/// Accepts a 2-D array (matrix), {"matrix": [[..]]} or {"nodes": n, "edges": [[c, p], ..]}.
HierarchicalNetwork network_from_json(const json& j);
json network_to_json(const HierarchicalNetwork& net);

LnfInstance lnf_from_json(const json& j);
json lnf_to_json(const LnfInstance& inst);
void write_lnf_dot(std::ostream& os, const LnfInstance& inst);

json solver_to_json(const SolverSpec& s);
SolverSpec solver_from_json(const json& j, SolverSpec base = {});
json config_to_json(const DaldConfig& c);
DaldConfig config_from_json(const json& j, DaldConfig base = {});

SolverKind solver_kind_from_string(const std::string& s);
InnerCriterion criterion_from_string(const std::string& s);
CoordinationMode mode_from_string(const std::string& s);
SelectionPolicy policy_from_string(const std::string& s);
ExecutionPolicy execution_from_string(const std::string& s);

inline constexpr const char* kTraceHeader = "k,v,cum_inner,objective,al_value,primal_inf,dual_inf";
/// Doubles are printed with 17 significant digits so traces round-trip exactly.
void write_trace_csv(std::ostream& os, const RunTrace& trace);
json summary_to_json(const RunSummary& s);

}  // namespace dald
