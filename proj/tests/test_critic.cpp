#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "orion/critic.hpp"
#include "orion/engine.hpp"
#include "orion/mazegen.hpp"

using namespace orion;

namespace {

NetConfig tiny_cfg() {
  NetConfig cfg;
  cfg.d = 8;
  cfg.heads = 2;
  cfg.encoder_layers = 1;
  return cfg;
}

CriticInput tiny_input(int n, int agents, Rng& rng) {
  CriticInput in;
  in.features = DenseMatrix(n, FeatureCol::Count);
  for (double& v : in.features.data) v = rng.next_real(-1, 1);
  in.attn_lists.resize(n);
  for (int i = 0; i < n; ++i) {
    in.attn_lists[i].push_back(i);
    if (i > 0) in.attn_lists[i].push_back(i - 1);
    if (i + 1 < n) in.attn_lists[i].push_back(i + 1);
    std::sort(in.attn_lists[i].begin(), in.attn_lists[i].end());
  }
  for (int a = 0; a < agents; ++a) {
    in.agent_rows.push_back(a);  // park agents on the first rows
    in.options.push_back(a % 2 == 0 ? Option::Navigate : Option::Cooperate);
    std::vector<int> cand = {a};
    if (a > 0) cand.push_back(a - 1);
    if (a + 1 < n) cand.push_back(a + 1);
    std::sort(cand.begin(), cand.end());
    in.candidate_rows.push_back(cand);
  }
  return in;
}

}  // namespace

TEST_CASE("privileged encoder: shape, determinism, single node") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(1);
  CriticNet::init(p, cfg, rng);
  CriticNet net(cfg);

  for (int n : {1, 3, 9, 17}) {
    CriticInput in = tiny_input(n, 1, rng);
    CriticTeamCache c1, c2;
    const DenseMatrix a = critic_encode(net, p, in, c1);
    const DenseMatrix b = critic_encode(net, p, in, c2);
    CHECK(a.rows == n);
    CHECK(a.cols == cfg.d);
    CHECK(a == b);
  }
}

TEST_CASE("option conditioning: zero table is pass-through, distinct otherwise") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(2);
  CriticNet::init(p, cfg, rng);
  CriticNet net(cfg);

  CriticInput in = tiny_input(5, 2, rng);
  CriticTeamCache team;
  const DenseMatrix H = critic_encode(net, p, in, team);

  // Zero embedding table: u rows equal the gathered H rows.
  ParameterStore pz = p;
  pz.at("critic.opt_embed").data.assign(pz.at("critic.opt_embed").data.size(), 0.0);
  CriticTeamCache teamz;
  critic_encode(net, pz, in, teamz);
  CriticHeadCache hz;
  critic_q_values(net, pz, teamz, 0, Option::Navigate, hz);
  for (int j = 0; j < cfg.d; ++j) {
    CHECK(hz.u.at(0, j) == doctest::Approx(teamz.H.at(in.agent_rows[0], j)).epsilon(1e-12));
  }

  // Distinct options with a nonzero table yield distinct conditioned rows.
  CriticHeadCache ha, hb;
  critic_q_values(net, p, team, 0, Option::Navigate, ha);
  critic_q_values(net, p, team, 0, Option::Cooperate, hb);
  double diff = 0.0;
  for (int j = 0; j < cfg.d; ++j) diff += std::abs(ha.h_i.at(0, j) - hb.h_i.at(0, j));
  CHECK(diff > 1e-9);
  (void)H;
}

TEST_CASE("single-agent team: refinement passes through, context is zero") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(3);
  CriticNet::init(p, cfg, rng);
  CriticNet net(cfg);

  CriticInput in = tiny_input(4, 1, rng);
  CriticTeamCache team;
  critic_encode(net, p, in, team);
  CriticHeadCache head;
  const auto q = critic_q_values(net, p, team, 0, Option::Navigate, head);
  CHECK(q.size() == in.candidate_rows[0].size());
  CHECK(head.h_ref == head.h_i);
  for (double v : head.c.data) CHECK(v == 0.0);
  CHECK(head.alpha.empty());
}

TEST_CASE("maac attention: softmax over teammates, hand computation at d=2") {
  NetConfig cfg = tiny_cfg();
  cfg.d = 2;
  cfg.heads = 1;
  ParameterStore p;
  Rng rng(4);
  CriticNet::init(p, cfg, rng);
  CriticNet net(cfg);

  // Two-agent team: the single teammate takes all attention.
  {
    DenseMatrix h(1, 2);
    h.at(0, 0) = 0.3;
    h.at(0, 1) = -0.2;
    DenseMatrix mates(1, 2);
    mates.at(0, 0) = 1.0;
    mates.at(0, 1) = 0.5;
    const MaacResult r = maac_attention(net, p, h, mates);
    REQUIRE(r.alpha.size() == 1);
    CHECK(r.alpha[0] == doctest::Approx(1.0));
  }

  // Equal keys: uniform attention.
  {
    DenseMatrix h(1, 2);
    h.at(0, 0) = 0.7;
    h.at(0, 1) = 0.1;
    DenseMatrix mates(2, 2);
    for (int j = 0; j < 2; ++j) {
      mates.at(0, j) = 0.25 * (j + 1);
      mates.at(1, j) = 0.25 * (j + 1);
    }
    const MaacResult r = maac_attention(net, p, h, mates);
    CHECK(r.alpha[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.alpha[1] == doctest::Approx(0.5).epsilon(1e-12));
  }

  // Hand computation with identity projections.
  {
    for (const char* w : {"critic.maac.wq", "critic.maac.wk", "critic.maac.wv"}) {
      DenseMatrix& m = p.at(w);
      m.data.assign(m.data.size(), 0.0);
      m.at(0, 0) = m.at(1, 1) = 1.0;
    }
    DenseMatrix h(1, 2);
    h.at(0, 0) = 1.0;
    h.at(0, 1) = 0.0;
    DenseMatrix mates(2, 2);
    mates.at(0, 0) = 1.0;  // score 1
    mates.at(0, 1) = 0.0;
    mates.at(1, 0) = 0.0;  // score 0
    mates.at(1, 1) = 2.0;
    const MaacResult r = maac_attention(net, p, h, mates);
    const double a0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
    CHECK(r.alpha[0] == doctest::Approx(a0).epsilon(1e-12));
    CHECK(r.context.at(0, 0) == doctest::Approx(a0 * 1.0).epsilon(1e-12));
    CHECK(r.context.at(0, 1) == doctest::Approx((1 - a0) * 2.0).epsilon(1e-12));
  }
}

TEST_CASE("maac: permuting teammates permutes alpha, context invariant") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(5);
  CriticNet::init(p, cfg, rng);
  CriticNet net(cfg);

  DenseMatrix h(1, cfg.d);
  for (double& v : h.data) v = rng.next_real(-1, 1);
  DenseMatrix mates(3, cfg.d);
  for (double& v : mates.data) v = rng.next_real(-1, 1);

  const MaacResult a = maac_attention(net, p, h, mates);
  DenseMatrix perm(3, cfg.d);
  const int order[3] = {2, 0, 1};
  for (int t = 0; t < 3; ++t) {
    for (int j = 0; j < cfg.d; ++j) perm.at(t, j) = mates.at(order[t], j);
  }
  const MaacResult b = maac_attention(net, p, h, perm);
  for (int t = 0; t < 3; ++t) CHECK(b.alpha[t] == doctest::Approx(a.alpha[order[t]]).epsilon(1e-12));
  for (int j = 0; j < cfg.d; ++j) {
    CHECK(b.context.at(0, j) == doctest::Approx(a.context.at(0, j)).epsilon(1e-9));
  }

  double sum = 0.0;
  for (double v : a.alpha) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("q_values: zero weights give the bias, option conditioning is live") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(6);
  CriticNet::init(p, cfg, rng);
  CriticNet net(cfg);

  CriticInput in = tiny_input(6, 2, rng);

  ParameterStore pz = p;
  for (const char* w : {"critic.fq.l1.w", "critic.fq.l1.b", "critic.fq.l2.w"}) {
    DenseMatrix& m = pz.at(w);
    m.data.assign(m.data.size(), 0.0);
  }
  pz.at("critic.fq.l2.b").at(0, 0) = 0.37;
  CriticTeamCache teamz;
  critic_encode(net, pz, in, teamz);
  CriticHeadCache hz;
  const auto qz = critic_q_values(net, pz, teamz, 0, Option::Navigate, hz);
  CHECK(qz.size() == in.candidate_rows[0].size());
  for (double v : qz) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));

  CriticTeamCache team;
  critic_encode(net, p, in, team);
  CriticHeadCache ha, hb;
  const auto q_nav = critic_q_values(net, p, team, 1, Option::Navigate, ha);
  const auto q_coop = critic_q_values(net, p, team, 1, Option::Cooperate, hb);
  double diff = 0.0;
  for (size_t j = 0; j < q_nav.size(); ++j) diff = std::max(diff, std::abs(q_nav[j] - q_coop[j]));
  CHECK(diff > 1e-9);
}

TEST_CASE("critic passes finite differences on every parameter group") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(7);
  CriticNet::init(p, cfg, rng);
  CriticNet net(cfg);

  CriticInput in = tiny_input(5, 3, rng);

  const auto loss = [&](const ParameterStore& params, ParameterStore* grads) {
    CriticTeamCache team;
    critic_encode(net, params, in, team);
    DenseMatrix gH(team.H.rows, team.H.cols);
    double L = 0.0;
    std::vector<CriticHeadCache> heads(2);
    std::vector<std::vector<double>> gq(2);
    for (int a = 0; a < 2; ++a) {
      const Option z = a == 0 ? Option::Navigate : Option::Cooperate;
      const auto q = critic_q_values(net, params, team, a, z, heads[a]);
      gq[a].assign(q.size(), 0.0);
      for (size_t j = 0; j < q.size(); ++j) {
        const double w = std::sin(0.8 * (j + 1) + a);
        L += w * q[j];
        gq[a][j] = w;
      }
    }
    if (grads) {
      for (int a = 0; a < 2; ++a) critic_head_backward(net, params, team, heads[a], gq[a], gH, *grads);
      critic_encode_backward(net, params, team, gH, *grads);
    }
    return L;
  };

  const std::vector<std::string> groups = {"critic.enc", "critic.ref", "critic.maac",
                                           "critic.fq", "critic.opt_embed"};
  for (const std::string& g : groups) {
    const std::vector<std::string> names = p.names_with_prefix(g);
    REQUIRE(!names.empty());
    const FdResult r = fd_check(p, names, loss, 50, rng);
    INFO("group ", g, " worst ", r.worst_param);
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("privileged view: fully verified belief equals the ground-truth view") {
  const OccupancyGrid gt = generate_maze_map(9, 16, 16, 1, 0.2);
  const OccupancyGrid prior = inject_discrepancies(gt, {1, 1, 2, 4}, {});
  REQUIRE(prior.cells != gt.cells);

  std::vector<Observation> all;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) all.push_back({{x, y}, gt.at({x, y})});
  }
  BeliefState verified(prior);
  verified.apply(all);
  REQUIRE(verified.fully_verified());
  BeliefState truth(gt);
  truth.apply(all);

  GraphConfig gcfg;
  gcfg.node_spacing = 2.0;
  SensorConfig sensor{4.0};
  const auto free_only = [](CellState s) { return s == CellState::Free; };
  const auto not_occupied = [](CellState s) { return s != CellState::Occupied; };
  const NavGraph graph =
      build_edges(sample_nodes(verified.combined(), gcfg, false), verified.combined(), gcfg,
                  free_only);
  const NavGraph plan =
      build_edges(sample_nodes(verified.current(), gcfg, true), verified.current(), gcfg,
                  not_occupied);

  std::vector<AgentState> team(2);
  team[0].id = 0;
  team[0].node = graph.nodes()[0].id;
  team[0].target = graph.nodes()[graph.size() - 1].id;
  team[1].id = 1;
  team[1].node = graph.nodes()[1].id;
  team[1].target = graph.nodes()[graph.size() - 2].id;

  const UtilityColumns u1 = compute_utilities(verified, graph, sensor);
  const UtilityColumns u2 = compute_utilities(truth, graph, sensor);
  const std::vector<Option> opts(2, Option::Navigate);
  const CriticInput a =
      privileged_input(gt, verified, graph, plan, team, sensor, {}, u1, opts);
  const CriticInput b = privileged_input(gt, truth, graph, plan, team, sensor, {}, u2, opts);

  for (int i = 0; i < a.features.rows; ++i) {
    CHECK(a.features.at(i, FeatureCol::Verified) == 1.0);
    CHECK(a.features.at(i, FeatureCol::PriorUtility) == 0.0);
  }
  CHECK(a.features == b.features);
}
