// Serial vs parallel stage execution on star-shaped problems, where every
// leaf sits in one independent stage feeding a single root.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include <benchmark/benchmark.h>

#include "../tests/support.hpp"
#include "dald/cli.hpp"
#include "dald/driver.hpp"

using namespace dald;

namespace {

SweepPlan star_plan(int leaves) {
  // Root is block 1; leaves 2..n+1 feed it.
  std::vector<Edge> edges;
  for (int b = 2; b <= leaves + 1; ++b) edges.push_back({b, 1});
  return es_sweep_plan(make_network(leaves + 1, edges));
}

void run_star(benchmark::State& state, ExecutionPolicy policy) {
  const int leaves = static_cast<int>(state.range(0));
  const int dim = static_cast<int>(state.range(1));
  const auto problem = testing::star_problem(leaves, dim, 17);
  const auto plan = star_plan(leaves);
  DaldConfig c;
  c.criterion = InnerCriterion::B4;
  c.v_max = 2;
  c.max_cumulative_inner = 40;
  c.execution = policy;
  long inner = 0;
  for (auto _ : state) {
    const auto t = run_dald(problem, plan, SolverSpec{}, c);
    inner = t.final.cumulative_inner;
    benchmark::DoNotOptimize(t.final.x);
  }
  state.counters["sweeps"] = static_cast<double>(inner);
}

void BM_StarSerial(benchmark::State& state) { run_star(state, ExecutionPolicy::Serial); }
void BM_StarParallel(benchmark::State& state) { run_star(state, ExecutionPolicy::Parallel); }

void run_cells(benchmark::State& state, bool parallel) {
  const auto dir = std::filesystem::temp_directory_path() / "dald_bench_cells";
  std::vector<std::string> args{"sweep-vmax", "--problem", "lnf", "--rows", "6", "--cols", "6", "--parts", "4",
                                "--seeds", "1,2", "--vmax-list", "1,2,4", "--out", dir.string()};
  if (parallel) args.push_back("--parallel-cells");
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  for (auto _ : state) benchmark::DoNotOptimize(run_cli(args));
  std::cout.rdbuf(old);
  std::filesystem::remove_all(dir);
}

void BM_CellsSerial(benchmark::State& state) { run_cells(state, false); }
void BM_CellsParallel(benchmark::State& state) { run_cells(state, true); }

}  // namespace

BENCHMARK(BM_StarSerial)->Args({8, 50})->Args({32, 50})->Args({32, 400})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StarParallel)->Args({8, 50})->Args({32, 50})->Args({32, 400})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CellsSerial)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(BM_CellsParallel)->Unit(benchmark::kMillisecond)->Iterations(1);

BENCHMARK_MAIN();
