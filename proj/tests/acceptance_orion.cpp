// Acceptance suite: every release criterion, one pass/fail line each.
// Exit code 0 only when all criteria hold.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <iomanip>

#include "orion/experiment.hpp"
#include "oracles.hpp"
#include "scenario.hpp"

using namespace orion;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", criterion, name,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

NetConfig small_net(int d = 16) {
  NetConfig n;
  n.d = d;
  n.heads = 2;
  n.encoder_layers = 2;
  return n;
}

// ---------------------------------------------------------------------------
// 1. Conflict invariant over 500 seeded episodes and four controllers.
// ---------------------------------------------------------------------------
void criterion_conflicts() {
  const double t0 = now_s();
  const NetConfig net_cfg = small_net(16);
  PolicyNet net(net_cfg);

  ParameterStore untrained;
  Rng rng(12345);
  PolicyNet::init(untrained, net_cfg, rng);

  // A briefly trained actor (a few dozen updates is enough to move the
  // parameters off their initialization).
  TrainManifest quick;
  quick.train.net = net_cfg;
  quick.train.batch_size = 16;
  quick.env.map = {20, 20, 2, 0.2};
  quick.env.discrepancies = {1, 1, 2, 0};
  quick.env.graph.node_spacing = 2.0;
  quick.env.sensor.r_fov = 4.0;
  quick.env.n_agents = 2;
  quick.env.step_cap = 48;
  quick.updates = 60;
  quick.warmup_transitions = 120;
  quick.eval_episodes = 0;
  const TrainResult trained = train_policy(quick, 5);

  const int teams[3] = {2, 3, 5};
  const MapParams maps[3] = {{24, 24, 2, 0.2}, {32, 32, 2, 0.25}, {48, 48, 3, 0.2}};

  long conflict_count = 0;
  int episodes = 0;
  int controller_kind = 0;
  for (int episode = 0; episode < 500; ++episode, ++controller_kind) {
    EngineConfig cfg;
    cfg.map = maps[episode % 3];
    cfg.discrepancies = {1, 1, 2, 0};
    cfg.graph.node_spacing = 2.0;
    cfg.sensor.r_fov = 4.0;
    cfg.n_agents = teams[(episode / 3) % 3];
    cfg.step_cap = 48;
    Engine engine(1000 + episode, cfg);

    std::unique_ptr<Controller> ctrl;
    switch (controller_kind % 4) {
      case 0:
        ctrl = std::make_unique<DualStageWrapper>(std::make_unique<GreedyDijkstraController>());
        break;
      case 1:
        ctrl = std::make_unique<PrioritizedReplanController>();
        break;
      case 2:
        ctrl = std::make_unique<ActorController>(net, untrained, false, 31 + episode);
        break;
      default:
        ctrl = std::make_unique<ActorController>(net, trained.params, false, 77 + episode);
        break;
    }
    ctrl->reset(engine);
    while (!engine.done()) {
      std::vector<int> before(cfg.n_agents);
      for (int i = 0; i < cfg.n_agents; ++i) before[i] = engine.agents()[i].node;
      const JointAction resolved =
          engine.resolve_conflicts(engine.apply_dual_stage_constraint(ctrl->propose(engine)));
      for (int i = 0; i < cfg.n_agents; ++i) {
        for (int j = i + 1; j < cfg.n_agents; ++j) {
          if (resolved.next_node[i] == resolved.next_node[j]) ++conflict_count;
          if (resolved.next_node[i] == before[j] && resolved.next_node[j] == before[i] &&
              before[i] != resolved.next_node[i]) {
            ++conflict_count;
          }
        }
      }
      const StepOutcome out = engine.step(resolved);
      ctrl->post_step(engine, out);
    }
    ++episodes;
  }
  const double dt = now_s() - t0;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%d episodes, %ld vertex/edge conflicts post-resolution, %.1f s", episodes,
                conflict_count, dt);
  report(1, "conflict invariant", conflict_count == 0 && episodes == 500 && dt <= 300.0, detail);
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness: layers and composite losses vs finite differences.
// ---------------------------------------------------------------------------
void criterion_gradients() {
  Rng rng(777);
  const int d = 8;
  double worst = 0.0;
  std::string worst_name;
  auto track = [&](const char* name, const FdResult& r) {
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = std::string(name) + "/" + r.worst_param;
    }
  };

  auto weighted_sum = [](const DenseMatrix& y) {
    double s = 0.0;
    for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * std::sin(0.7 * (i + 1));
    return s;
  };
  auto weighted_grad = [](const DenseMatrix& y) {
    DenseMatrix g(y.rows, y.cols);
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] = std::sin(0.7 * (i + 1));
    return g;
  };
  auto ring = [](int n) {
    std::vector<std::vector<int>> allowed(n);
    for (int i = 0; i < n; ++i) {
      allowed[i] = {(i + n - 1) % n, i, (i + 1) % n};
      std::sort(allowed[i].begin(), allowed[i].end());
    }
    return allowed;
  };
  DenseMatrix x(6, d);
  for (double& v : x.data) v = rng.next_gaussian();

  {  // linear
    ParameterStore p;
    Linear::init(p, "lin", d, 3, rng);
    Linear lin("lin");
    track("linear", fd_check(p, p.names(), [&](const ParameterStore& ps, ParameterStore* gs) {
      LinearCache c;
      const DenseMatrix y = lin.forward(ps, x, c);
      if (gs) lin.backward(ps, c, weighted_grad(y), *gs);
      return weighted_sum(y);
    }, 50, rng));
  }
  {  // layer norm
    ParameterStore p;
    LayerNorm::init(p, "ln", d);
    LayerNorm ln("ln");
    track("layernorm", fd_check(p, p.names(), [&](const ParameterStore& ps, ParameterStore* gs) {
      LayerNormCache c;
      const DenseMatrix y = ln.forward(ps, x, c);
      if (gs) ln.backward(ps, c, weighted_grad(y), *gs);
      return weighted_sum(y);
    }, 50, rng));
  }
  {  // masked self-attention
    ParameterStore p;
    MultiHeadAttention::init(p, "attn", d, rng);
    MultiHeadAttention attn("attn", d, 2);
    const auto allowed = ring(6);
    track("masked-attention",
          fd_check(p, p.names(), [&](const ParameterStore& ps, ParameterStore* gs) {
            AttentionCache c;
            const DenseMatrix y = attn.forward(ps, x, x, &allowed, c);
            if (gs) {
              DenseMatrix gkv = zeros_like(x);
              attn.backward(ps, c, weighted_grad(y), *gs, gkv);
            }
            return weighted_sum(y);
          }, 60, rng));
  }
  {  // cross-attention
    ParameterStore p;
    MultiHeadAttention::init(p, "ca", d, rng);
    MultiHeadAttention attn("ca", d, 4);
    DenseMatrix q(2, d);
    for (double& v : q.data) v = rng.next_gaussian();
    track("cross-attention",
          fd_check(p, p.names(), [&](const ParameterStore& ps, ParameterStore* gs) {
            AttentionCache c;
            const DenseMatrix y = attn.forward(ps, q, x, nullptr, c);
            if (gs) {
              DenseMatrix gkv = zeros_like(x);
              attn.backward(ps, c, weighted_grad(y), *gs, gkv);
            }
            return weighted_sum(y);
          }, 60, rng));
  }
  {  // mlp
    ParameterStore p;
    Mlp::init(p, "mlp", d, d, 1, rng);
    Mlp mlp("mlp");
    track("mlp", fd_check(p, p.names(), [&](const ParameterStore& ps, ParameterStore* gs) {
      MlpCache c;
      const DenseMatrix y = mlp.forward(ps, x, c);
      if (gs) mlp.backward(ps, c, weighted_grad(y), *gs);
      return weighted_sum(y);
    }, 50, rng));
  }
  {  // full encoder
    NetConfig cfg = small_net(d);
    ParameterStore p;
    Encoder::init(p, "enc", FeatureCol::Count, cfg, rng);
    Encoder enc("enc", cfg);
    DenseMatrix f(6, FeatureCol::Count);
    for (double& v : f.data) v = rng.next_gaussian();
    const auto allowed = ring(6);
    track("encoder", fd_check(p, p.names(), [&](const ParameterStore& ps, ParameterStore* gs) {
      EncoderCache c;
      const DenseMatrix y = enc.forward(ps, f, allowed, c);
      if (gs) enc.backward(ps, c, weighted_grad(y), *gs);
      return weighted_sum(y);
    }, 60, rng));
  }

  // Composite losses over a rollout batch.
  const NetConfig cfg = small_net(8);
  ParameterStore p;
  Rng net_rng(4242);
  PolicyNet::init(p, cfg, net_rng);
  CriticNet::init(p, cfg, net_rng);
  PolicyNet actor(cfg);
  CriticNet critic(cfg);
  ParameterStore target = p;

  ReplayBuffer buffer(256, 9);
  RolloutEnv env;
  env.cfg.map = {16, 16, 2, 0.2};
  env.cfg.discrepancies = {1, 0, 2, 0};
  env.cfg.graph.node_spacing = 2.0;
  env.cfg.sensor.r_fov = 4.0;
  env.cfg.n_agents = 2;
  env.cfg.step_cap = 24;
  Rng rr(3);
  collect_rollout(env, actor, critic, p, buffer, 10, rr);
  std::vector<const Transition*> batch;
  for (int i = 0; i < std::min(3, buffer.size()); ++i) batch.push_back(&buffer.at(i));

  TrainConfig tc;
  tc.net = cfg;
  track("termination-loss",
        fd_check(p, p.names_with_prefix("policy."), [&](const ParameterStore& ps, ParameterStore* gs) {
          return termination_loss(batch, actor, critic, ps, ps, gs);
        }, 55, rng));
  track("policy-loss",
        fd_check(p, p.names_with_prefix("policy."), [&](const ParameterStore& ps, ParameterStore* gs) {
          return policy_loss(batch, actor, critic, ps, ps, 0.07, gs);
        }, 55, rng));
  track("critic-td-loss",
        fd_check(p, p.names_with_prefix("critic."), [&](const ParameterStore& ps, ParameterStore* gs) {
          return critic_td_loss(batch, actor, critic, ps, ps, target, tc, gs);
        }, 55, rng));

  char detail[128];
  std::snprintf(detail, sizeof(detail), "max relative error %.3e (%s)", worst,
                worst_name.c_str());
  report(2, "gradient correctness", worst <= 1e-4, detail);
}

// ---------------------------------------------------------------------------
// 3. Oracle equivalences.
// ---------------------------------------------------------------------------
void criterion_oracles() {
  Rng rng(55);
  int mismatches = 0;

  // Dijkstra vs Bellman-Ford on 200 random graphs.
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.next_int(2, 30);
    std::vector<NavNode> nodes;
    for (int i = 0; i < n; ++i) {
      nodes.push_back({i, {rng.next_real(0, 10), rng.next_real(0, 10)}, {i, 0}});
    }
    NavGraph g(std::move(nodes), n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (rng.next_real() < 0.3) g.add_edge(i, j, rng.next_real(0.1, 4.0));
      }
    }
    const ShortestPaths sp = dijkstra(g, 0);
    const std::vector<double> bf = oracle::bellman_ford(g, 0);
    for (int i = 0; i < n; ++i) {
      const bool both_inf = !std::isfinite(sp.dist[i]) && !std::isfinite(bf[i]);
      if (!both_inf && std::abs(sp.dist[i] - bf[i]) > 1e-9) ++mismatches;
    }
  }

  // sense vs brute-force line of sight on 50 random 20x20 grids.
  for (int trial = 0; trial < 50; ++trial) {
    OccupancyGrid g(20, 20, 1.0, CellState::Free);
    for (auto& c : g.cells) {
      if (rng.next_real() < 0.22) c = CellState::Occupied;
    }
    Cell pos{rng.next_int(0, 19), rng.next_int(0, 19)};
    g.at(pos) = CellState::Free;
    const double r = rng.next_real(1.0, 8.0);
    const auto got_list = sense(g, pos, {r});
    const std::set<std::pair<Cell, CellState>> got(got_list.begin(), got_list.end());
    if (got != oracle::sense(g, pos, r)) ++mismatches;
  }

  // Prioritized replanning stays conflict-free over 100 random instances.
  for (int trial = 0; trial < 100; ++trial) {
    EngineConfig cfg;
    cfg.map = {20, 20, 2, 0.2};
    cfg.discrepancies = {1, 1, 2, 0};
    cfg.graph.node_spacing = 2.0;
    cfg.sensor.r_fov = 4.0;
    cfg.n_agents = 2 + trial % 3;
    cfg.step_cap = 64;
    Engine eng(3000 + trial, cfg);
    PrioritizedReplanController ctrl;
    ctrl.reset(eng);
    while (!eng.done()) {
      const JointAction prop = ctrl.propose(eng);
      for (size_t i = 0; i < eng.agents().size(); ++i) {
        for (size_t j = i + 1; j < eng.agents().size(); ++j) {
          if (prop.next_node[i] == prop.next_node[j]) ++mismatches;
          if (prop.next_node[i] == eng.agents()[j].node &&
              prop.next_node[j] == eng.agents()[i].node) {
            ++mismatches;
          }
        }
      }
      const StepOutcome out = eng.step(eng.resolve_conflicts(eng.apply_dual_stage_constraint(prop)));
      ctrl.post_step(eng, out);
    }
  }

  // Incremental frontiers match the rescan oracle through 50 episodes.
  for (int trial = 0; trial < 50; ++trial) {
    EngineConfig cfg;
    cfg.map = {20, 20, 2, 0.25};
    cfg.discrepancies = {1, 1, 2, 0};
    cfg.graph.node_spacing = 2.0;
    cfg.sensor.r_fov = 4.0;
    cfg.n_agents = 2;
    cfg.step_cap = 32;
    Engine eng(4000 + trial, cfg);
    GreedyDijkstraController ctrl;
    while (!eng.done()) {
      eng.step(eng.resolve_conflicts(eng.apply_dual_stage_constraint(ctrl.propose(eng))));
      if (eng.belief().prior_frontiers() != rescan_prior_frontiers(eng.belief())) ++mismatches;
      if (eng.belief().current_frontiers() != rescan_current_frontiers(eng.belief())) {
        ++mismatches;
      }
    }
  }

  report(3, "oracle equivalences", mismatches == 0,
         std::to_string(mismatches) + " mismatches across all four oracle families");
}

// ---------------------------------------------------------------------------
// 4. Masked option softmax semantics over 10,000 randomized draws.
// ---------------------------------------------------------------------------
void criterion_option_semantics() {
  const NetConfig cfg = small_net(8);
  ParameterStore p;
  Rng rng(99);
  PolicyNet::init(p, cfg, rng);
  PolicyNet net(cfg);

  int violations = 0;
  Rng draw(7);
  for (int trial = 0; trial < 10000; ++trial) {
    DenseMatrix s(1, cfg.d);
    for (int j = 0; j < cfg.d; ++j) s.at(0, j) = draw.next_real(-2.0, 2.0);
    const Option z_prev = draw.next_real() < 0.5 ? Option::Navigate : Option::Cooperate;
    const Stage stage = draw.next_real() < 0.5 ? Stage::PreArrival : Stage::PostArrival;
    const OptionSelection sel = select_option(net, p, s, z_prev, stage, &draw, false);

    if (std::abs(sel.probs[0] + sel.probs[1] - 1.0) > 1e-9) ++violations;
    if (stage == Stage::PostArrival) {
      if (sel.probs[0] != 0.0) ++violations;          // masked option keeps zero mass
      if (sel.z != Option::Cooperate) ++violations;   // Navigate never selected
    }
    // Shift invariance of the masked softmax.
    const FsmMask mask = fsm_mask(stage);
    const auto& row = mask.row(z_prev);
    const double c = draw.next_real(-40.0, 40.0);
    const auto base = masked_softmax({sel.scores[0], sel.scores[1]}, {row[0], row[1]});
    const auto shifted =
        masked_softmax({sel.scores[0] + c, sel.scores[1] + c}, {row[0], row[1]});
    for (int k = 0; k < 2; ++k) {
      if (std::abs(base[k] - shifted[k]) > 1e-9) ++violations;
    }
  }
  report(4, "option distribution semantics", violations == 0,
         std::to_string(violations) + " violations in 10000 draws");
}

// ---------------------------------------------------------------------------
// 5. TD fixed point on the hand-solvable two-state MDP.
// ---------------------------------------------------------------------------
AgentObservation mdp_obs(int node) {
  AgentObservation obs;
  obs.combined_features = DenseMatrix(2, FeatureCol::Count);
  for (int i = 0; i < 2; ++i) {
    obs.combined_features.at(i, FeatureCol::X) = i == 0 ? 0.25 : 0.75;
    obs.combined_features.at(i, FeatureCol::Y) = 0.5;
    obs.combined_features.at(i, FeatureCol::Occupancy) = i == node ? 1.0 : 0.0;
    obs.combined_features.at(i, FeatureCol::Verified) = 1.0;
  }
  obs.current_features = obs.combined_features;
  obs.attn_lists = {{0, 1}, {0, 1}};
  obs.node_ids = {0, 1};
  obs.neighbor_ids = {0, 1};
  obs.current_node_index = node;
  return obs;
}

CriticInput mdp_view(int node) {
  CriticInput in;
  const AgentObservation obs = mdp_obs(node);
  in.features = obs.combined_features;
  in.attn_lists = obs.attn_lists;
  in.agent_rows = {node};
  in.options = {Option::Navigate};
  in.candidate_rows = {{0, 1}};
  return in;
}

Transition mdp_transition(int node, int ai, double r, int nn) {
  Transition t;
  t.done = false;
  t.critic_view = mdp_view(node);
  t.next_critic_view = mdp_view(nn);
  AgentTransition at;
  at.obs = mdp_obs(node);
  at.z_prev = Option::Navigate;
  at.z = Option::Navigate;
  at.next_z = Option::Navigate;
  at.action_index = ai;
  at.reward = r;
  at.next_obs = mdp_obs(nn);
  t.agents.push_back(std::move(at));
  return t;
}

void criterion_td_fixed_point() {
  const double gamma = 0.9;
  const double alpha = 0.05;
  const double ln2 = std::log(2.0);
  const double S = (1.5 + 2.0 * alpha * ln2) / (1.0 - gamma);
  const double vA = 0.5 + 0.5 * gamma * S + alpha * ln2;
  const double vB = vA + 0.5;
  const double expect[4] = {gamma * vA, 1.0 + gamma * vB, gamma * vA, 2.0 + gamma * vB};

  int passed = 0;
  double worst = 0.0;
  for (std::uint64_t seed : {11ULL, 22ULL, 33ULL}) {
    const NetConfig cfg = small_net(8);
    ParameterStore p;
    Rng rng(seed);
    PolicyNet::init(p, cfg, rng);
    CriticNet::init(p, cfg, rng);
    PolicyNet actor(cfg);
    CriticNet critic(cfg);
    p.at("policy.ptr.wq").data.assign(p.at("policy.ptr.wq").data.size(), 0.0);
    p.at("policy.ptr.wk").data.assign(p.at("policy.ptr.wk").data.size(), 0.0);
    ParameterStore target;
    for (const std::string& name : p.names_with_prefix("critic.")) {
      const DenseMatrix& m = p.at(name);
      target.add(name, m.rows, m.cols) = m;
    }
    ReplayBuffer buffer(8, seed);
    buffer.push(mdp_transition(0, 0, 0.0, 0));
    buffer.push(mdp_transition(0, 1, 1.0, 1));
    buffer.push(mdp_transition(1, 0, 0.0, 0));
    buffer.push(mdp_transition(1, 1, 2.0, 1));

    TrainConfig tc;
    tc.net = cfg;
    tc.gamma = gamma;
    tc.alpha = alpha;
    tc.batch_size = 8;
    tc.lr_critic = 4e-3;
    tc.momentum = 0.9;
    tc.tau = 0.05;
    OptState opt;
    const auto names = p.names_with_prefix("critic.");
    for (int k = 0; k < 5000; ++k) {
      const auto batch = buffer.sample(tc.batch_size);
      ParameterStore grads;
      critic_td_loss(batch, actor, critic, p, p, target, tc, &grads);
      sgd_step(p, grads, names, tc.lr_critic, tc.momentum, opt);
      soft_update(target, p, tc.tau);
    }
    CriticTeamCache tA, tB;
    critic_encode(critic, p, mdp_view(0), tA);
    critic_encode(critic, p, mdp_view(1), tB);
    CriticHeadCache ha, hb;
    const auto qa = critic_q_values(critic, p, tA, 0, Option::Navigate, ha);
    const auto qb = critic_q_values(critic, p, tB, 0, Option::Navigate, hb);
    const double err = std::max({std::abs(qa[0] - expect[0]), std::abs(qa[1] - expect[1]),
                                 std::abs(qb[0] - expect[2]), std::abs(qb[1] - expect[3])});
    worst = std::max(worst, err);
    if (err <= 1e-2) ++passed;
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail), "%d/3 seeds within 1e-2 (worst error %.4f)", passed,
                worst);
  report(5, "TD fixed point", passed == 3, detail);
}

// ---------------------------------------------------------------------------
// 6. Toy learning signal.
// ---------------------------------------------------------------------------
void criterion_toy_learning() {
  const double t0 = now_s();
  TrainManifest m;
  m.train.net.d = 32;
  m.train.net.heads = 2;
  m.train.net.encoder_layers = 2;
  m.train.gamma = 0.95;
  m.train.alpha = 0.04;
  m.train.lambda_term = 0.5;
  m.train.tau = 0.015;
  m.train.lr_actor = 1e-3;
  m.train.lr_critic = 1.2e-3;
  m.train.momentum = 0.7;
  m.train.batch_size = 36;
  m.train.replay_capacity = 3000;
  m.train.lr_half_life = 800;
  m.train.grad_clip = 10.0;
  m.env.map = {20, 20, 3, 0.15};
  m.env.discrepancies = {1, 1, 2, 0};
  m.env.graph.node_spacing = 3.0;
  m.env.graph.r_b = 6.0;
  m.env.sensor.r_fov = 6.0;
  m.env.n_agents = 2;
  m.env.world_seed = 424242;  // the fixed toy scenario
  m.env.fixed_missions = true;
  m.env.step_cap = 128;
  m.env.kappa = 0.6;
  m.updates = 2000;
  m.warmup_transitions = 600;
  m.env_steps_per_update = 3;
  m.eval_episodes = 50;
  m.select_every = 100;
  m.select_episodes = 10;

  int seeds_passed = 0;
  std::ostringstream detail;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    const TrainResult r = train_policy(m, seed);
    const double bar = r.untrained_mean_return + 0.5 * std::abs(r.untrained_mean_return);
    const bool return_ok =
        r.untrained_mean_return == 0.0 ? r.trained_mean_return > 0.0
                                       : r.trained_mean_return >= bar;
    const bool ok = return_ok && r.trained_success >= 0.8;
    seeds_passed += ok ? 1 : 0;
    detail << "s" << seed << ":" << (ok ? "ok" : "no") << "(ret " << std::fixed
           << std::setprecision(1) << r.untrained_mean_return << "->" << r.trained_mean_return
           << ", succ " << std::setprecision(2) << r.trained_success << ") ";
  }
  const double dt = now_s() - t0;
  detail << std::setprecision(1) << dt << " s";
  report(6, "toy learning signal", seeds_passed >= 4 && dt <= 1800.0,
         std::to_string(seeds_passed) + "/5 seeds — " + detail.str());
}

// ---------------------------------------------------------------------------
// 7. Dual-stage directional check on the constructed assistance scenario.
// ---------------------------------------------------------------------------
void criterion_dual_stage() {
  int improved = 0;
  int decided = 0;
  double mean_gain = 0.0;
  const int trials = 20;
  for (int seed = 0; seed < trials; ++seed) {
    Engine with(scenario::assist_engine(seed, true));
    DualStageWrapper on(std::make_unique<GreedyDijkstraController>());
    const EpisodeMetrics m_on = run_episode(with, on).metrics;

    Engine without(scenario::assist_engine(seed, false));
    DualStageWrapper off(std::make_unique<GreedyDijkstraController>());
    const EpisodeMetrics m_off = run_episode(without, off).metrics;

    const double gain = m_off.max_dist - m_on.max_dist;
    mean_gain += gain / trials;
    if (gain > 1e-9) ++improved;
    if (std::abs(gain) > 1e-9) ++decided;
  }
  // One-sided sign test at p < 0.05: P(X >= improved | n = decided, p = 1/2).
  double tail = 0.0;
  for (int k = improved; k <= decided; ++k) {
    double log_term = 0.0;
    for (int i = 0; i < k; ++i) log_term += std::log2(static_cast<double>(decided - i) / (i + 1));
    tail += std::exp2(log_term - decided);
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%d/%d seeds improved, mean makespan gain %.2f m, sign-test p = %.5f", improved,
                trials, mean_gain, tail);
  report(7, "dual-stage directional check", mean_gain > 0.0 && tail < 0.05, detail);
}

// ---------------------------------------------------------------------------
// 8. Runtime targets at full benchmark scale.
// ---------------------------------------------------------------------------
void criterion_runtime() {
  ExperimentConfig cfg;
  cfg.map = {160, 150, 12, 0.15};
  cfg.discrepancies = {4, 2, 3, 0};
  cfg.graph.node_spacing = 10.0;
  cfg.graph.k_max = 8;
  cfg.graph.r_b = 16.0;
  cfg.sensor.r_fov = 12.0;
  cfg.net.d = 128;
  cfg.net.heads = 4;
  cfg.net.encoder_layers = 2;
  cfg.step_cap = 25;

  const auto rows = profile_runtime(cfg, 10, 3);
  double max_rebuild = 0.0, max_infer = 0.0;
  for (const auto& r : rows) {
    max_rebuild = std::max(max_rebuild, r.graph_update_s);
    max_infer = std::max(max_infer, r.inference_s);
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%zu steps at 160x150/10 agents/d=128: graph update max %.3f s (<=0.5), team "
                "inference max %.3f s (<=0.2)",
                rows.size(), max_rebuild, max_infer);
  report(8, "runtime targets", !rows.empty() && max_rebuild <= 0.5 && max_infer <= 0.2, detail);
}

// ---------------------------------------------------------------------------
// 9. Byte-identical reproducibility of run_experiment.
// ---------------------------------------------------------------------------
void criterion_reproducibility() {
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  const fs::path dir1 = fs::temp_directory_path() / "orion_accept_rep1";
  const fs::path dir2 = fs::temp_directory_path() / "orion_accept_rep2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  ExperimentConfig cfg;
  cfg.map = {20, 20, 2, 0.2};
  cfg.discrepancies = {1, 1, 2, 0};
  cfg.graph.node_spacing = 2.0;
  cfg.sensor.r_fov = 4.0;
  cfg.team_sizes = {2, 3};
  cfg.episodes_per_cell = 2;
  cfg.planners = {"greedy+dual", "prioritized", "orion-greedy"};
  cfg.net = small_net(16);
  cfg.seed_base = 2024;
  cfg.step_cap = 96;

  cfg.out_dir = dir1.string();
  run_experiment(cfg);
  cfg.out_dir = dir2.string();
  run_experiment(cfg);

  bool identical = slurp(dir1 / "results.csv") == slurp(dir2 / "results.csv");
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(dir1 / "logs")) {
    const fs::path other = dir2 / "logs" / entry.path().filename();
    identical &= fs::exists(other) && slurp(entry.path()) == slurp(other);
    ++compared;
  }
  report(9, "byte-identical reproducibility", identical && compared == 12,
         std::to_string(compared) + " episode logs plus results.csv compared byte-for-byte");
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

}  // namespace

int main(int argc, char** argv) {
  // Optional single-criterion selection for development: acceptance_orion 6
  int only = 0;
  if (argc > 1) only = std::atoi(argv[1]);

  using Fn = void (*)();
  const Fn criteria[] = {criterion_conflicts,      criterion_gradients,
                         criterion_oracles,        criterion_option_semantics,
                         criterion_td_fixed_point, criterion_toy_learning,
                         criterion_dual_stage,     criterion_runtime,
                         criterion_reproducibility};
  for (int i = 0; i < 9; ++i) {
    if (only && only != i + 1) continue;
    criteria[i]();
  }
  if (g_failures == 0) {
    std::printf("acceptance: all criteria passed\n");
  } else {
    std::printf("acceptance: %d criteria FAILED\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
