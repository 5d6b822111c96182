#pragma once

// Command-line harness: run, sweep-vmax, gen-lnf, validate.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dald/io.hpp"

namespace dald {

struct ExperimentConfig {
  /// "counterexample", "toy", "lnf", or a path to a problem / LNF instance JSON file.
  std::string problem = "counterexample";
  int rows = 6;
  int cols = 6;
  int parts = 4;
  std::uint64_t seed = 1;
  /// Seeds for sweeps over generated instances; empty means {seed}.
  std::vector<std::uint64_t> seeds;
  /// "chain" or a path to a matrix / network JSON file.
  std::string plan = "chain";
  CoordinationMode mode = CoordinationMode::FullCycle;
  SelectionPolicy policy = SelectionPolicy::Random;
  int quota = 1;
  std::map<BlockId, int> repeats;
  std::uint64_t plan_seed = 0;
  /// "dald", "alm" or "bcd".
  std::string method = "dald";
  /// Projected gradient unless set; "auto" picks the closed form when every
  /// block qualifies.
  std::string solver_kind = "auto";
  SolverSpec solver;
  DaldConfig dald;
  std::string out = ".";

  json to_json() const;
  /// Accepts a config object or a summary.json carrying one under "config".
  static ExperimentConfig from_json(const json& j, ExperimentConfig base);
  static ExperimentConfig from_json(const json& j) { return from_json(j, ExperimentConfig{}); }
};

/// Returns the process exit code: 0 converged / success, 2 a run ended
/// without converging, 1 usage or input errors.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

/// Builds the problem and its generator instance (if any) named by the config.
struct LoadedProblem {
  DecomposedProblem problem;
  std::optional<LnfInstance> lnf;
};
LoadedProblem load_problem(const ExperimentConfig& cfg, std::uint64_t seed);
SweepPlan load_plan(const ExperimentConfig& cfg, int num_blocks);
/// Resolves "auto" against the problem structure.
SolverSpec resolve_solver(const ExperimentConfig& cfg, const DecomposedProblem& problem);

}  // namespace dald
