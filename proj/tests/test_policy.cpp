#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "orion/engine.hpp"
#include "orion/policy.hpp"

using namespace orion;

namespace {

NetConfig tiny_cfg() {
  NetConfig cfg;
  cfg.d = 8;
  cfg.heads = 2;
  cfg.encoder_layers = 1;
  return cfg;
}

AgentObservation tiny_obs(int n, Rng& rng, int cur = 0) {
  AgentObservation obs;
  obs.combined_features = DenseMatrix(n, FeatureCol::Count);
  for (double& v : obs.combined_features.data) v = rng.next_real(-1.0, 1.0);
  obs.current_features = obs.combined_features;
  for (int i = 0; i < n; ++i) obs.current_features.at(i, FeatureCol::PriorUtility) = 0.0;
  obs.attn_lists.resize(n);
  for (int i = 0; i < n; ++i) {
    obs.attn_lists[i].push_back(i);
    if (i > 0) obs.attn_lists[i].push_back(i - 1);
    if (i + 1 < n) obs.attn_lists[i].push_back(i + 1);
    std::sort(obs.attn_lists[i].begin(), obs.attn_lists[i].end());
  }
  for (int i = 0; i < n; ++i) obs.node_ids.push_back(i);
  obs.current_node_index = cur;
  obs.neighbor_ids.push_back(cur);
  if (cur > 0) obs.neighbor_ids.push_back(cur - 1);
  if (cur + 1 < n) obs.neighbor_ids.push_back(cur + 1);
  std::sort(obs.neighbor_ids.begin(), obs.neighbor_ids.end());
  return obs;
}

}  // namespace

TEST_CASE("fsm_mask: pre-arrival all ones, post-arrival forces cooperate") {
  const FsmMask pre = fsm_mask(Stage::PreArrival);
  CHECK(pre.m == std::array<std::array<int, 2>, 2>{{{1, 1}, {1, 1}}});
  const FsmMask post = fsm_mask(Stage::PostArrival);
  CHECK(post.m == std::array<std::array<int, 2>, 2>{{{0, 1}, {0, 1}}});
  for (const auto& row : post.m) CHECK(row[0] + row[1] >= 1);
}

TEST_CASE("encode: single node graph yields its fused feature as s") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(1);
  PolicyNet::init(p, cfg, rng);
  PolicyNet net(cfg);

  AgentObservation obs = tiny_obs(1, rng);
  EncodeCache cache;
  const DenseMatrix H = policy_encode(net, p, obs, cache);
  CHECK(H.rows == 1);
  CHECK(H.cols == cfg.d);
  const DenseMatrix s = take_row(H, 0);
  for (int j = 0; j < cfg.d; ++j) CHECK(s.at(0, j) == H.at(0, j));
}

TEST_CASE("encode: output shape [n x d] for n in 1..20 and deterministic") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(2);
  PolicyNet::init(p, cfg, rng);
  PolicyNet net(cfg);

  for (int n = 1; n <= 20; n += 4) {
    AgentObservation obs = tiny_obs(n, rng, n / 2);
    EncodeCache c1, c2;
    const DenseMatrix a = policy_encode(net, p, obs, c1);
    const DenseMatrix b = policy_encode(net, p, obs, c2);
    CHECK(a.rows == n);
    CHECK(a.cols == cfg.d);
    CHECK(a == b);
  }
}

TEST_CASE("termination head: zero weights give beta = 0.5, hand logit matches") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(3);
  PolicyNet::init(p, cfg, rng);
  PolicyNet net(cfg);

  // Zero the MLP and embeddings: logit 0 -> sigmoid 0.5.
  p.at("policy.term.l1.w").data.assign(p.at("policy.term.l1.w").data.size(), 0.0);
  p.at("policy.term.l1.b").data.assign(cfg.d, 0.0);
  p.at("policy.term.l2.w").data.assign(cfg.d, 0.0);
  p.at("policy.term.l2.b").data.assign(1, 0.0);

  DenseMatrix s(1, cfg.d);
  for (int j = 0; j < cfg.d; ++j) s.at(0, j) = 0.3 * j;
  TermCache tc;
  CHECK(termination_prob(net, p, s, Option::Navigate, tc) == doctest::Approx(0.5));

  // Bias route to a logit of exactly 2 -> sigmoid(2).
  p.at("policy.term.l2.b").at(0, 0) = 2.0;
  TermCache tc2;
  const double beta = termination_prob(net, p, s, Option::Navigate, tc2);
  CHECK(beta == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-12));
  CHECK(beta == doctest::Approx(0.8808).epsilon(1e-3));
}

TEST_CASE("termination head: distinct option embeddings give distinct beta") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(4);
  PolicyNet::init(p, cfg, rng);
  PolicyNet net(cfg);

  DenseMatrix s(1, cfg.d);
  for (int j = 0; j < cfg.d; ++j) s.at(0, j) = rng.next_real(-1, 1);
  TermCache ta, tb;
  const double b_nav = termination_prob(net, p, s, Option::Navigate, ta);
  const double b_coop = termination_prob(net, p, s, Option::Cooperate, tb);
  CHECK(b_nav != doctest::Approx(b_coop).epsilon(1e-12));
}

TEST_CASE("select_option: forced mask, FSM semantics over random draws") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(5);
  PolicyNet::init(p, cfg, rng);
  PolicyNet net(cfg);

  DenseMatrix s(1, cfg.d);
  for (int j = 0; j < cfg.d; ++j) s.at(0, j) = rng.next_real(-1, 1);

  // Post-arrival: z is always Cooperate regardless of previous option/draws.
  Rng draw(6);
  for (int trial = 0; trial < 200; ++trial) {
    const Option z_prev = trial % 2 == 0 ? Option::Navigate : Option::Cooperate;
    const OptionSelection sel =
        select_option(net, p, s, z_prev, Stage::PostArrival, &draw, false);
    CHECK(sel.z == Option::Cooperate);
    CHECK(sel.probs[0] == 0.0);
    CHECK(sel.probs[0] + sel.probs[1] == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Pre-arrival: both options reachable, distribution sums to one.
  int navigate_count = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const OptionSelection sel =
        select_option(net, p, s, Option::Navigate, Stage::PreArrival, &draw, false);
    CHECK(sel.probs[0] + sel.probs[1] == doctest::Approx(1.0).epsilon(1e-9));
    navigate_count += sel.z == Option::Navigate;
  }
  CHECK(navigate_count > 0);
}

TEST_CASE("waypoint decoder: single candidate and symmetric candidates") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(7);
  PolicyNet::init(p, cfg, rng);
  PolicyNet net(cfg);

  DenseMatrix H(3, cfg.d);
  for (double& v : H.data) v = rng.next_real(-1, 1);

  WaypointCache wc;
  const auto single = waypoint_policy(net, p, H, 0, Option::Navigate, {0}, wc);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == doctest::Approx(1.0));

  // Two candidates with identical rows -> exactly uniform.
  DenseMatrix Heq(3, cfg.d);
  for (int j = 0; j < cfg.d; ++j) {
    Heq.at(0, j) = rng.next_real(-1, 1);
    Heq.at(1, j) = 0.4 * j;
    Heq.at(2, j) = 0.4 * j;
  }
  WaypointCache wc2;
  const auto uniform = waypoint_policy(net, p, Heq, 0, Option::Navigate, {1, 2}, wc2);
  CHECK(uniform[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(uniform[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("waypoint decoder: option conditioning is live") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(8);
  PolicyNet::init(p, cfg, rng);
  PolicyNet net(cfg);

  DenseMatrix H(4, cfg.d);
  for (double& v : H.data) v = rng.next_real(-1, 1);
  WaypointCache a, b;
  const auto nav = waypoint_policy(net, p, H, 0, Option::Navigate, {0, 1, 2, 3}, a);
  const auto coop = waypoint_policy(net, p, H, 0, Option::Cooperate, {0, 1, 2, 3}, b);
  double max_diff = 0.0;
  for (size_t j = 0; j < nav.size(); ++j) max_diff = std::max(max_diff, std::abs(nav[j] - coop[j]));
  CHECK(max_diff > 1e-9);

  double sum = 0.0;
  for (double v : nav) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("act: deterministic greedy, waypoint within candidates, post-arrival cooperates") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(9);
  PolicyNet::init(p, cfg, rng);
  PolicyNet net(cfg);

  AgentObservation obs = tiny_obs(6, rng, 2);
  PolicyMemory mem;
  mem.z_prev = Option::Navigate;
  mem.stage = Stage::PreArrival;

  const PolicyOutput a = act(net, p, obs, mem, nullptr, true);
  const PolicyOutput b = act(net, p, obs, mem, nullptr, true);
  CHECK(a.waypoint == b.waypoint);
  CHECK(a.option == b.option);
  CHECK(std::find(obs.neighbor_ids.begin(), obs.neighbor_ids.end(), a.waypoint) !=
        obs.neighbor_ids.end());

  mem.stage = Stage::PostArrival;
  Rng draws(11);
  for (int k = 0; k < 50; ++k) {
    const PolicyOutput c = act(net, p, obs, mem, &draws, false);
    CHECK(c.option == Option::Cooperate);
  }

  // Stochastic path is reproducible under a fixed rng seed.
  Rng r1(42), r2(42);
  const PolicyOutput s1 = act(net, p, obs, mem, &r1, false);
  const PolicyOutput s2 = act(net, p, obs, mem, &r2, false);
  CHECK(s1.waypoint == s2.waypoint);
  CHECK(s1.terminated == s2.terminated);
}

TEST_CASE("full actor passes finite differences on every parameter group") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(10);
  PolicyNet::init(p, cfg, rng);
  PolicyNet net(cfg);

  AgentObservation obs = tiny_obs(5, rng, 1);
  const std::vector<int> nbr_rows = obs.neighbor_rows();

  const auto loss = [&](const ParameterStore& params, ParameterStore* grads) {
    EncodeCache enc;
    const DenseMatrix H = policy_encode(net, params, obs, enc);
    const DenseMatrix s = take_row(H, obs.current_node_index);
    TermCache tc;
    const double beta = termination_prob(net, params, s, Option::Navigate, tc);
    WaypointCache wc;
    const auto probs =
        waypoint_policy(net, params, H, obs.current_node_index, Option::Cooperate, nbr_rows, wc);
    double L = 0.7 * beta;
    for (size_t j = 0; j < probs.size(); ++j) L += std::sin(0.9 * (j + 1)) * probs[j];
    if (grads) {
      DenseMatrix gH(H.rows, H.cols);
      std::vector<double> gprobs(probs.size());
      for (size_t j = 0; j < probs.size(); ++j) gprobs[j] = std::sin(0.9 * (j + 1));
      waypoint_backward(net, params, wc, gprobs, gH, *grads);
      const DenseMatrix gs = termination_backward(net, params, tc, 0.7, *grads);
      for (int j = 0; j < H.cols; ++j) gH.at(obs.current_node_index, j) += gs.at(0, j);
      policy_encode_backward(net, params, enc, gH, *grads);
    }
    return L;
  };

  // Probe every parameter group separately so none hides behind the others.
  const std::vector<std::string> groups = {"policy.cur", "policy.cmb", "policy.fuse",
                                           "policy.term", "policy.dec", "policy.ptr",
                                           "policy.opt_embed"};
  for (const std::string& g : groups) {
    const std::vector<std::string> names = p.names_with_prefix(g);
    REQUIRE(!names.empty());
    const FdResult r = fd_check(p, names, loss, 40, rng);
    INFO("group ", g, " worst ", r.worst_param);
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("option distribution invariants over randomized draws") {
  const NetConfig cfg = tiny_cfg();
  ParameterStore p;
  Rng rng(12);
  PolicyNet::init(p, cfg, rng);
  PolicyNet net(cfg);

  Rng draw(13);
  for (int trial = 0; trial < 500; ++trial) {
    DenseMatrix s(1, cfg.d);
    for (int j = 0; j < cfg.d; ++j) s.at(0, j) = draw.next_real(-2, 2);
    const Option z_prev = draw.next_real() < 0.5 ? Option::Navigate : Option::Cooperate;
    const Stage stage = draw.next_real() < 0.5 ? Stage::PreArrival : Stage::PostArrival;
    const OptionSelection sel = select_option(net, p, s, z_prev, stage, &draw, false);
    CHECK(sel.probs[0] + sel.probs[1] == doctest::Approx(1.0).epsilon(1e-9));
    if (stage == Stage::PostArrival) {
      CHECK(sel.probs[0] == 0.0);
      CHECK(sel.z == Option::Cooperate);
    }
    CHECK(sel.beta > 0.0);
    CHECK(sel.beta < 1.0);
  }
}
