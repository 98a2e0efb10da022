#include <benchmark/benchmark.h>

#include "orion/engine.hpp"
#include "orion/policy.hpp"

namespace {

using namespace orion;

void BM_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int d = 128;
  Rng rng(1);
  DenseMatrix a(n, d), b(d, d);
  for (auto& v : a.data) v = rng.next_real(-1, 1);
  for (auto& v : b.data) v = rng.next_real(-1, 1);
  for (auto _ : state) {
    DenseMatrix c = matmul(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * n * d * d);
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(256);

EngineConfig bench_config(int agents) {
  EngineConfig cfg;
  cfg.map = {48, 48, 3, 0.2};
  cfg.discrepancies = {2, 1, 2, 0};
  cfg.graph.node_spacing = 3.0;
  cfg.sensor.r_fov = 6.0;
  cfg.n_agents = agents;
  cfg.step_cap = 64;
  return cfg;
}

void BM_engine_reset(benchmark::State& state) {
  std::uint64_t seed = 1;
  for (auto _ : state) {
    Engine eng(seed++, bench_config(3));
    benchmark::DoNotOptimize(eng.graph().size());
  }
}
BENCHMARK(BM_engine_reset);

void BM_engine_step(benchmark::State& state) {
  Engine eng(7, bench_config(3));
  for (auto _ : state) {
    if (eng.done()) {
      state.PauseTiming();
      eng = Engine(7, bench_config(3));
      state.ResumeTiming();
    }
    JointAction stay;
    for (const AgentState& a : eng.agents()) stay.next_node.push_back(a.node);
    // Move agent 0 along its first edge when possible, so sensing happens.
    const int idx = eng.graph().index_of(eng.agents()[0].node);
    if (idx >= 0 && !eng.graph().adjacency(idx).empty()) {
      stay.next_node[0] = eng.graph().nodes()[eng.graph().adjacency(idx)[0].first].id;
    }
    const StepOutcome out = eng.step(eng.resolve_conflicts(stay));
    benchmark::DoNotOptimize(out.rewards.data());
  }
}
BENCHMARK(BM_engine_step);

void BM_actor_forward(benchmark::State& state) {
  NetConfig net_cfg;
  net_cfg.d = static_cast<int>(state.range(0));
  net_cfg.heads = 4;
  net_cfg.encoder_layers = 2;
  ParameterStore params;
  Rng rng(3);
  PolicyNet::init(params, net_cfg, rng);
  PolicyNet net(net_cfg);
  Engine eng(5, bench_config(3));
  const AgentObservation obs = eng.observe_agent(0);
  PolicyMemory mem;
  for (auto _ : state) {
    const PolicyOutput out = act(net, params, obs, mem, nullptr, true);
    benchmark::DoNotOptimize(out.waypoint);
  }
}
BENCHMARK(BM_actor_forward)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
