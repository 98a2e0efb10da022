#include "orion/critic.hpp"

#include <algorithm>
#include <cmath>

namespace orion {

CriticNet::CriticNet(const NetConfig& cfg_, const std::string& prefix)
    : cfg(cfg_),
      enc(prefix + ".enc", cfg_),
      ref(prefix + ".ref", cfg_.d, cfg_.heads),
      fq(prefix + ".fq", 0.01),
      opt_embed(prefix + ".opt_embed"),
      maac_wq(prefix + ".maac.wq"),
      maac_wk(prefix + ".maac.wk"),
      maac_wv(prefix + ".maac.wv"),
      prefix_(prefix) {
  cfg.validate();
}

void CriticNet::init(ParameterStore& store, const NetConfig& cfg, Rng& rng,
                     const std::string& prefix) {
  cfg.validate();
  Encoder::init(store, prefix + ".enc", FeatureCol::Count, cfg, rng);
  MultiHeadAttention::init(store, prefix + ".ref", cfg.d, rng);
  Mlp::init(store, prefix + ".fq", 4 * cfg.d, cfg.d, 1, rng);
  glorot_init(store.add(prefix + ".opt_embed", cfg.option_count, cfg.d), rng);
  glorot_init(store.add(prefix + ".maac.wq", cfg.d, cfg.d), rng);
  glorot_init(store.add(prefix + ".maac.wk", cfg.d, cfg.d), rng);
  glorot_init(store.add(prefix + ".maac.wv", cfg.d, cfg.d), rng);
}

CriticInput privileged_input(const OccupancyGrid& gt, const BeliefState& belief,
                             const NavGraph& graph, const NavGraph& plan_graph,
                             const std::vector<AgentState>& team, const SensorConfig& sensor,
                             const std::vector<Beacon>& beacons, const UtilityColumns& utilities,
                             const std::vector<Option>& options) {
  (void)sensor;
  const int n = graph.size();
  CriticInput in;
  in.features = DenseMatrix(n, FeatureCol::Count);

  // Union of every agent's guidepost paths.
  std::set<int> nav_union, coop_union;
  for (const AgentState& a : team) {
    if (!plan_graph.contains(a.node)) continue;
    const NavNode& t = graph.node_by_id(a.target);
    const std::set<int> nav = guidepost_nav(plan_graph, a.node, t.position, a.target, beacons);
    nav_union.insert(nav.begin(), nav.end());
    std::vector<Point> unverified;
    for (const AgentState& b : team) {
      const NavNode& bt = graph.node_by_id(b.target);
      if (!belief.verified(bt.cell)) unverified.push_back(bt.position);
    }
    const std::set<int> coop = guidepost_coop(plan_graph, a.node, unverified, nav, beacons);
    coop_union.insert(coop.begin(), coop.end());
  }

  const double extent_x = belief.width() * belief.resolution();
  const double extent_y = belief.height() * belief.resolution();
  for (int i = 0; i < n; ++i) {
    const NavNode& node = graph.nodes()[i];
    in.features.at(i, FeatureCol::X) = node.position.x / extent_x;
    in.features.at(i, FeatureCol::Y) = node.position.y / extent_y;
    in.features.at(i, FeatureCol::PriorUtility) = utilities.prior_utility[i];
    in.features.at(i, FeatureCol::Utility) = utilities.utility[i];
    bool visited = false;
    bool occupied = false;
    bool is_target = false;
    for (const AgentState& a : team) {
      visited |= a.visit_history.contains(node.id);
      occupied |= a.node == node.id;
      is_target |= a.target == node.id;
    }
    in.features.at(i, FeatureCol::Visited) = visited ? 1.0 : 0.0;
    // Privileged truth flag in place of the verified signal.
    in.features.at(i, FeatureCol::Verified) =
        belief.combined().at(node.cell) == gt.at(node.cell) ? 1.0 : 0.0;
    in.features.at(i, FeatureCol::Occupancy) = occupied ? 1.0 : 0.0;
    in.features.at(i, FeatureCol::Target) = is_target ? 1.0 : 0.0;
    in.features.at(i, FeatureCol::GuideNav) = nav_union.contains(node.id) ? 1.0 : 0.0;
    in.features.at(i, FeatureCol::GuideCoop) = coop_union.contains(node.id) ? 1.0 : 0.0;
  }

  in.attn_lists = attention_lists(graph);
  for (const AgentState& a : team) {
    const int row = graph.index_of(a.node);
    if (row < 0) throw InconsistentStateError("agent node missing from critic graph");
    in.agent_rows.push_back(row);
    std::vector<int> cand = {row};
    for (const auto& [j, w] : graph.adjacency(row)) cand.push_back(j);
    std::sort(cand.begin(), cand.end());
    in.candidate_rows.push_back(std::move(cand));
  }
  in.options = options;
  return in;
}

DenseMatrix critic_encode(const CriticNet& net, const ParameterStore& p, const CriticInput& input,
                          CriticTeamCache& cache) {
  cache.input = input;
  cache.H = net.enc.forward(p, input.features, input.attn_lists, cache.enc);
  return cache.H;
}

void critic_encode_backward(const CriticNet& net, const ParameterStore& p,
                            const CriticTeamCache& cache, const DenseMatrix& gH,
                            ParameterStore& grads) {
  net.enc.backward(p, cache.enc, gH, grads);
}

std::vector<double> critic_q_values(const CriticNet& net, const ParameterStore& p,
                                    const CriticTeamCache& team, int agent, Option z,
                                    CriticHeadCache& cache) {
  const CriticInput& in = team.input;
  const int N = static_cast<int>(in.agent_rows.size());
  const int d = net.cfg.d;
  const DenseMatrix& embed = p.at(net.opt_embed);

  cache.agent = agent;
  cache.z = z;
  cache.u = DenseMatrix(N, d);
  for (int j = 0; j < N; ++j) {
    const Option zj = (j == agent) ? z : in.options[j];
    for (int c = 0; c < d; ++c) {
      cache.u.at(j, c) = team.H.at(in.agent_rows[j], c) + embed.at(static_cast<int>(zj), c);
    }
  }
  cache.h_i = take_row(cache.u, agent);

  cache.teammates.clear();
  for (int j = 0; j < N; ++j) {
    if (j != agent) cache.teammates.push_back(j);
  }

  if (!cache.teammates.empty()) {
    cache.kv = take_rows(cache.u, cache.teammates);
    DenseMatrix refined = net.ref.forward(p, cache.h_i, cache.kv, nullptr, cache.ref);
    add_inplace(refined, cache.h_i);  // residual
    cache.h_ref = refined;
    cache.refined = true;

    // MAAC attention (paper form, unscaled dot products, softmax over j != i).
    cache.q = matmul(cache.h_i, p.at(net.maac_wq));
    cache.k = matmul(cache.kv, p.at(net.maac_wk));
    cache.v = matmul(cache.kv, p.at(net.maac_wv));
    const int T = static_cast<int>(cache.teammates.size());
    std::vector<double> scores(T);
    double mx = -1e300;
    for (int t = 0; t < T; ++t) {
      scores[t] = dot_rows(cache.q, 0, cache.k, t, 0, d);
      mx = std::max(mx, scores[t]);
    }
    double denom = 0.0;
    for (int t = 0; t < T; ++t) {
      scores[t] = std::exp(scores[t] - mx);
      denom += scores[t];
    }
    cache.alpha.assign(T, 0.0);
    cache.c = DenseMatrix(1, d);
    for (int t = 0; t < T; ++t) {
      cache.alpha[t] = scores[t] / denom;
      for (int u = 0; u < d; ++u) cache.c.at(0, u) += cache.alpha[t] * cache.v.at(t, u);
    }
  } else {
    cache.h_ref = cache.h_i;  // single agent: pass-through
    cache.refined = false;
    cache.c = DenseMatrix(1, d);  // empty attention -> zero context
  }

  const auto& candidates = in.candidate_rows[agent];
  std::vector<double> qvals;
  cache.ucat.resize(candidates.size());
  cache.fq.resize(candidates.size());
  for (size_t t = 0; t < candidates.size(); ++t) {
    const DenseMatrix cand = take_row(team.H, candidates[t]);
    cache.ucat[t] = concat_cols({&cache.h_i, &cache.h_ref, &cache.c, &cand});
    const DenseMatrix qv = net.fq.forward(p, cache.ucat[t], cache.fq[t]);
    qvals.push_back(qv.at(0, 0));
  }
  return qvals;
}

void critic_head_backward(const CriticNet& net, const ParameterStore& p,
                          const CriticTeamCache& team, const CriticHeadCache& cache,
                          const std::vector<double>& gq, DenseMatrix& gH, ParameterStore& grads) {
  const CriticInput& in = team.input;
  const int d = net.cfg.d;
  const auto& candidates = in.candidate_rows[cache.agent];

  DenseMatrix gh_i(1, d), gh_ref(1, d), gc(1, d);
  for (size_t t = 0; t < candidates.size(); ++t) {
    DenseMatrix gqv(1, 1);
    gqv.at(0, 0) = gq[t];
    const DenseMatrix gucat = net.fq.backward(p, cache.fq[t], gqv, grads);
    for (int u = 0; u < d; ++u) {
      gh_i.at(0, u) += gucat.at(0, u);
      gh_ref.at(0, u) += gucat.at(0, d + u);
      gc.at(0, u) += gucat.at(0, 2 * d + u);
      gH.at(candidates[t], u) += gucat.at(0, 3 * d + u);
    }
  }

  DenseMatrix gkv;  // gradients into teammate embedding rows
  const int T = static_cast<int>(cache.teammates.size());
  if (T > 0) gkv = DenseMatrix(T, d);

  if (T > 0) {
    // MAAC backward: c = sum_t alpha_t v_t, alpha = softmax(q . k_t).
    std::vector<double> galpha(T, 0.0);
    double inner = 0.0;
    DenseMatrix gv(T, d);
    for (int t = 0; t < T; ++t) {
      for (int u = 0; u < d; ++u) {
        galpha[t] += gc.at(0, u) * cache.v.at(t, u);
        gv.at(t, u) += cache.alpha[t] * gc.at(0, u);
      }
      inner += cache.alpha[t] * galpha[t];
    }
    DenseMatrix gqvec(1, d), gk(T, d);
    for (int t = 0; t < T; ++t) {
      const double gscore = cache.alpha[t] * (galpha[t] - inner);
      for (int u = 0; u < d; ++u) {
        gqvec.at(0, u) += gscore * cache.k.at(t, u);
        gk.at(t, u) += gscore * cache.q.at(0, u);
      }
    }
    grads.accumulate(net.maac_wq, matmul_transA(cache.h_i, gqvec));
    grads.accumulate(net.maac_wk, matmul_transA(cache.kv, gk));
    grads.accumulate(net.maac_wv, matmul_transA(cache.kv, gv));
    add_inplace(gh_i, matmul_transB(gqvec, p.at(net.maac_wq)));
    add_inplace(gkv, matmul_transB(gk, p.at(net.maac_wk)));
    add_inplace(gkv, matmul_transB(gv, p.at(net.maac_wv)));

    // Refinement backward: h_ref = h_i + CA(h_i over kv).
    add_inplace(gh_i, gh_ref);  // residual
    DenseMatrix gkv_attn(T, d);
    const DenseMatrix gq_attn = net.ref.backward(p, cache.ref, gh_ref, grads, gkv_attn);
    add_inplace(gh_i, gq_attn);
    add_inplace(gkv, gkv_attn);
  } else {
    add_inplace(gh_i, gh_ref);  // pass-through head
  }

  // Scatter u-row gradients into H rows and option embeddings.
  const DenseMatrix& embed_unused = p.at(net.opt_embed);
  (void)embed_unused;
  DenseMatrix gembed(net.cfg.option_count, d);
  auto scatter = [&](int agent_index, const double* grow) {
    const Option zj = (agent_index == cache.agent) ? cache.z : in.options[agent_index];
    for (int u = 0; u < d; ++u) {
      gH.at(in.agent_rows[agent_index], u) += grow[u];
      gembed.at(static_cast<int>(zj), u) += grow[u];
    }
  };
  scatter(cache.agent, gh_i.row(0));
  for (int t = 0; t < T; ++t) scatter(cache.teammates[t], gkv.row(t));
  grads.accumulate(net.opt_embed, gembed);
}

MaacResult maac_attention(const CriticNet& net, const ParameterStore& p, const DenseMatrix& h_i,
                          const DenseMatrix& teammate_embeddings) {
  MaacResult out;
  const int d = h_i.cols;
  out.context = DenseMatrix(1, d);
  const int T = teammate_embeddings.rows;
  if (T == 0) return out;  // single-agent team: zero context

  const DenseMatrix q = matmul(h_i, p.at(net.maac_wq));
  const DenseMatrix k = matmul(teammate_embeddings, p.at(net.maac_wk));
  const DenseMatrix v = matmul(teammate_embeddings, p.at(net.maac_wv));
  std::vector<double> scores(T);
  double mx = -1e300;
  for (int t = 0; t < T; ++t) {
    scores[t] = dot_rows(q, 0, k, t, 0, d);
    mx = std::max(mx, scores[t]);
  }
  double denom = 0.0;
  for (int t = 0; t < T; ++t) {
    scores[t] = std::exp(scores[t] - mx);
    denom += scores[t];
  }
  out.alpha.assign(T, 0.0);
  for (int t = 0; t < T; ++t) {
    out.alpha[t] = scores[t] / denom;
    for (int u = 0; u < d; ++u) out.context.at(0, u) += out.alpha[t] * v.at(t, u);
  }
  return out;
}

}  // namespace orion
