#include "orion/policy.hpp"

#include <algorithm>
#include <cmath>

namespace orion {

FsmMask fsm_mask(Stage stage) {
  if (stage == Stage::PreArrival) return {{{{1, 1}, {1, 1}}}};
  return {{{{0, 1}, {0, 1}}}};
}

PolicyNet::PolicyNet(const NetConfig& cfg_)
    : cfg(cfg_),
      cur_enc("policy.cur", cfg_),
      cmb_enc("policy.cmb", cfg_),
      fuse("policy.fuse", cfg_.d, cfg_.heads),
      term("policy.term"),
      dec("policy.dec", cfg_.d, cfg_.heads),
      opt_embed("policy.opt_embed"),
      ptr_q("policy.ptr.wq"),
      ptr_k("policy.ptr.wk") {
  cfg.validate();
}

void PolicyNet::init(ParameterStore& store, const NetConfig& cfg, Rng& rng) {
  cfg.validate();
  Encoder::init(store, "policy.cur", FeatureCol::Count, cfg, rng);
  Encoder::init(store, "policy.cmb", FeatureCol::Count, cfg, rng);
  MultiHeadAttention::init(store, "policy.fuse", cfg.d, rng);
  Mlp::init(store, "policy.term", cfg.d, cfg.d, 1, rng);
  // Fresh policies should hold an option for several steps rather than coin-
  // flip every decision; bias the termination logit low at initialization.
  store.at("policy.term.l2.b").at(0, 0) = -2.0;
  MultiHeadAttention::init(store, "policy.dec", cfg.d, rng);
  glorot_init(store.add("policy.opt_embed", cfg.option_count, cfg.d), rng);
  glorot_init(store.add("policy.ptr.wq", cfg.d, cfg.d), rng);
  glorot_init(store.add("policy.ptr.wk", cfg.d, cfg.d), rng);
}

DenseMatrix policy_encode(const PolicyNet& net, const ParameterStore& p,
                          const AgentObservation& obs, EncodeCache& cache,
                          const std::vector<int>* query_rows) {
  if (obs.current_features.rows != static_cast<int>(obs.attn_lists.size())) {
    throw DimensionError("observation mask rows do not match feature rows");
  }
  cache.n = obs.current_features.rows;
  cache.s_cur = net.cur_enc.forward(p, obs.current_features, obs.attn_lists, cache.cur);
  cache.s_cmb = net.cmb_enc.forward(p, obs.combined_features, obs.attn_lists, cache.cmb);

  if (query_rows) {
    cache.query_rows = *query_rows;
  } else {
    cache.query_rows.resize(cache.n);
    for (int i = 0; i < cache.n; ++i) cache.query_rows[i] = i;
  }
  const DenseMatrix queries = take_rows(cache.s_cur, cache.query_rows);
  DenseMatrix fused = net.fuse.forward(p, queries, cache.s_cmb, nullptr, cache.fuse);
  add_inplace(fused, queries);  // residual keeps the online pathway direct
  return fused;
}

void policy_encode_backward(const PolicyNet& net, const ParameterStore& p,
                            const EncodeCache& cache, const DenseMatrix& gH,
                            ParameterStore& grads) {
  DenseMatrix g_cmb(cache.s_cmb.rows, cache.s_cmb.cols);
  const DenseMatrix g_queries = net.fuse.backward(p, cache.fuse, gH, grads, g_cmb);
  DenseMatrix g_cur(cache.s_cur.rows, cache.s_cur.cols);
  for (size_t t = 0; t < cache.query_rows.size(); ++t) {
    const int row = cache.query_rows[t];
    for (int j = 0; j < g_cur.cols; ++j) {
      // attention query gradient plus the residual path
      g_cur.at(row, j) += g_queries.at(static_cast<int>(t), j) + gH.at(static_cast<int>(t), j);
    }
  }
  net.cur_enc.backward(p, cache.cur, g_cur, grads);
  net.cmb_enc.backward(p, cache.cmb, g_cmb, grads);
}

double termination_prob(const PolicyNet& net, const ParameterStore& p, const DenseMatrix& s,
                        Option z_prev, TermCache& cache) {
  const DenseMatrix& embed = p.at(net.opt_embed);
  DenseMatrix h = s;
  for (int j = 0; j < h.cols; ++j) h.at(0, j) += embed.at(static_cast<int>(z_prev), j);
  const DenseMatrix logit = net.term.forward(p, h, cache.mlp);
  cache.z = z_prev;
  cache.beta = sigmoid(logit.at(0, 0));
  // Clamp away from exact 0/1 so log-likelihoods stay finite.
  cache.beta = std::min(1.0 - 1e-12, std::max(1e-12, cache.beta));
  return cache.beta;
}

DenseMatrix termination_backward(const PolicyNet& net, const ParameterStore& p,
                                 const TermCache& cache, double gbeta, ParameterStore& grads) {
  DenseMatrix glogit(1, 1);
  glogit.at(0, 0) = gbeta * cache.beta * (1.0 - cache.beta);
  const DenseMatrix gh = net.term.backward(p, cache.mlp, glogit, grads);
  DenseMatrix gembed(kOptionCount, gh.cols);
  for (int j = 0; j < gh.cols; ++j) gembed.at(static_cast<int>(cache.z), j) = gh.at(0, j);
  grads.accumulate(net.opt_embed, gembed);
  return gh;  // gradient w.r.t. s (the embedding add is a fork)
}

OptionSelection select_option(const PolicyNet& net, const ParameterStore& p, const DenseMatrix& s,
                              Option z_prev, Stage stage, Rng* rng, bool greedy) {
  OptionSelection sel;
  TermCache tc;
  sel.beta = termination_prob(net, p, s, z_prev, tc);
  sel.terminated = greedy ? sel.beta > 0.5 : (rng ? rng->next_real() < sel.beta : false);

  const FsmMask mask = fsm_mask(stage);
  const auto& row = mask.row(z_prev);
  if (row[0] == 0 && row[1] == 0) throw InvalidFsmError("FSM mask row has no valid transition");

  for (int z = 0; z < kOptionCount; ++z) {
    TermCache tz;
    sel.scores[z] = termination_prob(net, p, s, static_cast<Option>(z), tz);
  }
  const std::vector<double> probs =
      masked_softmax({sel.scores[0], sel.scores[1]}, {row[0], row[1]});
  sel.probs = {probs[0], probs[1]};

  const bool may_continue = row[static_cast<int>(z_prev)] == 1;
  if (!sel.terminated && may_continue) {
    sel.z = z_prev;
    return sel;
  }
  sel.fsm_forced = !sel.terminated && !may_continue;

  if (greedy || !rng) {
    sel.z = sel.probs[0] >= sel.probs[1] ? Option::Navigate : Option::Cooperate;
  } else {
    sel.z = rng->next_real() < sel.probs[0] ? Option::Navigate : Option::Cooperate;
  }
  return sel;
}

std::vector<double> waypoint_policy(const PolicyNet& net, const ParameterStore& p,
                                    const DenseMatrix& H, int cur_row, Option z,
                                    const std::vector<int>& nbr_rows, WaypointCache& cache) {
  if (nbr_rows.empty()) throw InconsistentStateError("waypoint decoder needs candidates");
  for (int r : nbr_rows) {
    if (r < 0 || r >= H.rows) throw InconsistentStateError("neighbor row missing from H");
  }
  cache.z = z;
  cache.cur_row = cur_row;
  cache.nbr_rows = nbr_rows;

  const DenseMatrix& embed = p.at(net.opt_embed);
  cache.h_tilde = take_row(H, cur_row);
  for (int j = 0; j < cache.h_tilde.cols; ++j) {
    cache.h_tilde.at(0, j) += embed.at(static_cast<int>(z), j);
  }
  cache.nbr = take_rows(H, nbr_rows);
  DenseMatrix h_prime = net.dec.forward(p, cache.h_tilde, cache.nbr, nullptr, cache.dec);
  add_inplace(h_prime, cache.h_tilde);  // residual
  cache.h_prime = h_prime;

  cache.pq = matmul(h_prime, p.at(net.ptr_q));
  cache.pk = matmul(cache.nbr, p.at(net.ptr_k));
  const double scale = 1.0 / std::sqrt(static_cast<double>(H.cols));
  const int m = static_cast<int>(nbr_rows.size());
  cache.scores.assign(m, 0.0);
  std::vector<double> clipped(m);
  for (int j = 0; j < m; ++j) {
    cache.scores[j] = dot_rows(cache.pq, 0, cache.pk, j, 0, H.cols) * scale;
    clipped[j] = std::clamp(cache.scores[j], -kPointerClip, kPointerClip);
  }
  cache.probs = masked_softmax(clipped, std::vector<int>(m, 1));
  return cache.probs;
}

void waypoint_backward(const PolicyNet& net, const ParameterStore& p, const WaypointCache& cache,
                       const std::vector<double>& gprobs, DenseMatrix& gH, ParameterStore& grads) {
  const int m = static_cast<int>(cache.nbr_rows.size());
  const int d = cache.h_prime.cols;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<double> gclipped = masked_softmax_backward(cache.probs, gprobs);
  // Clip: zero gradient outside the window.
  for (int j = 0; j < m; ++j) {
    if (cache.scores[j] < -kPointerClip || cache.scores[j] > kPointerClip) gclipped[j] = 0.0;
  }

  DenseMatrix gpq(1, d), gpk(m, d);
  for (int j = 0; j < m; ++j) {
    const double gs = gclipped[j] * scale;
    for (int u = 0; u < d; ++u) {
      gpq.at(0, u) += gs * cache.pk.at(j, u);
      gpk.at(j, u) += gs * cache.pq.at(0, u);
    }
  }
  grads.accumulate(net.ptr_q, matmul_transA(cache.h_prime, gpq));
  grads.accumulate(net.ptr_k, matmul_transA(cache.nbr, gpk));
  DenseMatrix gh_prime = matmul_transB(gpq, p.at(net.ptr_q));
  DenseMatrix gnbr = matmul_transB(gpk, p.at(net.ptr_k));

  // Decoder cross-attention (+ residual into h_tilde).
  DenseMatrix gnbr_attn(m, d);
  DenseMatrix gh_tilde = net.dec.backward(p, cache.dec, gh_prime, grads, gnbr_attn);
  add_inplace(gh_tilde, gh_prime);  // residual
  add_inplace(gnbr, gnbr_attn);

  // h_tilde = H[cur] + e(z)
  DenseMatrix gembed(kOptionCount, d);
  for (int j = 0; j < d; ++j) gembed.at(static_cast<int>(cache.z), j) = gh_tilde.at(0, j);
  grads.accumulate(net.opt_embed, gembed);
  for (int j = 0; j < d; ++j) gH.at(cache.cur_row, j) += gh_tilde.at(0, j);
  for (int t = 0; t < m; ++t) {
    for (int j = 0; j < d; ++j) gH.at(cache.nbr_rows[t], j) += gnbr.at(t, j);
  }
}

PolicyOutput act(const PolicyNet& net, const ParameterStore& p, const AgentObservation& obs,
                 const PolicyMemory& memory, Rng* rng, bool greedy) {
  // Fused rows are only needed for the agent's node and its neighbors.
  const std::vector<int> query_rows = obs.neighbor_rows();
  int cur_local = -1;
  for (size_t t = 0; t < query_rows.size(); ++t) {
    if (query_rows[t] == obs.current_node_index) cur_local = static_cast<int>(t);
  }
  if (cur_local < 0) throw InconsistentStateError("current node missing from neighbor set");

  EncodeCache enc;
  const DenseMatrix H = policy_encode(net, p, obs, enc, &query_rows);
  const DenseMatrix s = take_row(H, cur_local);

  const OptionSelection sel =
      select_option(net, p, s, memory.z_prev, memory.stage, rng, greedy);

  std::vector<int> nbr_rows(query_rows.size());
  for (size_t t = 0; t < query_rows.size(); ++t) nbr_rows[t] = static_cast<int>(t);

  WaypointCache wc;
  const std::vector<double> probs =
      waypoint_policy(net, p, H, cur_local, sel.z, nbr_rows, wc);

  PolicyOutput out;
  out.state_feature = s;
  out.beta = sel.beta;
  out.option = sel.z;
  out.terminated = sel.terminated;
  out.waypoint_probs = probs;

  int choice = 0;
  if (greedy || !rng) {
    for (size_t j = 1; j < probs.size(); ++j) {
      if (probs[j] > probs[choice]) choice = static_cast<int>(j);
    }
  } else {
    const double u = rng->next_real();
    double acc = 0.0;
    choice = static_cast<int>(probs.size()) - 1;
    for (size_t j = 0; j < probs.size(); ++j) {
      acc += probs[j];
      if (u < acc) {
        choice = static_cast<int>(j);
        break;
      }
    }
  }
  out.waypoint = obs.neighbor_ids[choice];
  return out;
}

}  // namespace orion
