#include <benchmark/benchmark.h>

#include <vector>

#include "parkedchain/consensus.hpp"
#include "parkedchain/kernels.hpp"
#include "parkedchain/reputation.hpp"

using namespace parkedchain;
using kernels::Exec;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "parallel" : "serial"); }

void BM_ReputationView(benchmark::State& state) {
  consensus::PopulationConfig cfg;
  cfg.population = 200;
  cfg.misbehaving = 40;
  cfg.slots = 10;
  const auto run = consensus::simulate_population(cfg, 1);
  const reputation::ViewParams vp;
  for (auto _ : state) {
    auto v = kernels::reputation_view(run.log, cfg.slots, run.arrival_hours, vp, exec_of(state));
    benchmark::DoNotOptimize(v.average);
  }
  label(state);
}

void BM_GridOracle(benchmark::State& state) {
  contract::ContractProblem p;
  p.theta = {0.3, 0.55, 0.8};
  p.beta = {0.3, 0.3, 0.4};
  std::vector<double> fg, pg;
  for (int i = 0; i < 30; ++i) fg.push_back(i * 1e8);
  for (int i = 0; i < 30; ++i) pg.push_back(i * 0.1);
  for (auto _ : state) {
    auto m = kernels::grid_oracle(p, fg, pg, exec_of(state));
    benchmark::DoNotOptimize(m.items.data());
  }
  label(state);
}

void BM_DetectionEnsemble(benchmark::State& state) {
  consensus::PopulationConfig cfg;
  for (auto _ : state) {
    auto r = kernels::detection_ensemble(cfg, 0.45, 1, 32, exec_of(state));
    benchmark::DoNotOptimize(r.data());
  }
  label(state);
}

void BM_CollusionEnsemble(benchmark::State& state) {
  consensus::CollusionConfig cfg;
  const std::vector<double> thr{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  for (auto _ : state) {
    auto r = kernels::collusion_ensemble(cfg, thr, 1, 32, exec_of(state));
    benchmark::DoNotOptimize(r.data());
  }
  label(state);
}

void BM_ModelCheck(benchmark::State& state) {
  const consensus::ConsensusConfig cfg{7, 2};
  const std::vector<consensus::ModelCheckCase> cases{{{0, 1}, true}, {{2, 5}, false}};
  for (auto _ : state) {
    auto r = kernels::model_check(cfg, cases, exec_of(state));
    benchmark::DoNotOptimize(r.views);
  }
  label(state);
}

}  // namespace

BENCHMARK(BM_ReputationView)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GridOracle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DetectionEnsemble)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CollusionEnsemble)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ModelCheck)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
