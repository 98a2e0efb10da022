#include "orion/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace orion {

void ReplayBuffer::push(Transition t) {
  if (static_cast<int>(storage_.size()) < capacity_) {
    storage_.push_back(std::move(t));
  } else {
    storage_[write_ % capacity_] = std::move(t);
  }
  ++write_;
}

std::vector<const Transition*> ReplayBuffer::sample(int batch) {
  if (storage_.empty()) throw ContractViolation("sampling from an empty replay buffer");
  std::vector<const Transition*> out;
  out.reserve(batch);
  for (int i = 0; i < batch; ++i) {
    out.push_back(&storage_[rng_.next_below(storage_.size())]);
  }
  return out;
}

double reward_fn(const RewardContext& ctx, const RewardConfig& cfg) {
  double r = -cfg.step_cost_scale * (ctx.edge_length / ctx.node_spacing);
  if (ctx.first_arrival) r += cfg.arrival_bonus;
  r += cfg.frontier_bonus *
       (static_cast<double>(ctx.frontier_cells_verified) / std::max(1, ctx.disk_cell_count));
  if (ctx.team_done) r += cfg.team_done_bonus;
  return r;
}

double termination_advantage(double q_z, double q_zbar) { return q_zbar - q_z; }

namespace {

int checked_action_candidate(const AgentTransition& at, const CriticInput& view, int agent) {
  const auto& cand = view.candidate_rows[agent];
  if (at.action_index < 0 || at.action_index >= static_cast<int>(cand.size()) ||
      cand.size() != at.obs.neighbor_ids.size()) {
    throw InconsistentStateError("transition action does not align with critic candidates");
  }
  return at.action_index;
}

// Actor encoding restricted to the rows the heads read. H rows align with
// obs.neighbor_ids; cur_local indexes the agent's own node within them.
struct LocalEncode {
  EncodeCache cache;
  DenseMatrix H;
  int cur_local = -1;
  std::vector<int> local_rows;
};

LocalEncode encode_local(const PolicyNet& actor, const ParameterStore& p,
                         const AgentObservation& obs) {
  LocalEncode out;
  const std::vector<int> query_rows = obs.neighbor_rows();
  out.H = policy_encode(actor, p, obs, out.cache, &query_rows);
  out.local_rows.resize(query_rows.size());
  for (size_t t = 0; t < query_rows.size(); ++t) {
    out.local_rows[t] = static_cast<int>(t);
    if (query_rows[t] == obs.current_node_index) out.cur_local = static_cast<int>(t);
  }
  if (out.cur_local < 0) throw InconsistentStateError("current node missing from neighbor set");
  return out;
}

}  // namespace

double termination_loss(const std::vector<const Transition*>& batch, const PolicyNet& actor,
                        const CriticNet& critic, const ParameterStore& actor_params,
                        const ParameterStore& critic_params, ParameterStore* actor_grads) {
  double loss = 0.0;
  int count = 0;
  for (const Transition* t : batch) count += static_cast<int>(t->agents.size());
  if (count == 0) return 0.0;

  for (const Transition* t : batch) {
    CriticTeamCache team;
    critic_encode(critic, critic_params, t->critic_view, team);
    for (size_t i = 0; i < t->agents.size(); ++i) {
      const AgentTransition& at = t->agents[i];
      const int ai = checked_action_candidate(at, t->critic_view, static_cast<int>(i));

      CriticHeadCache hz, hzbar;
      const double q_z =
          critic_q_values(critic, critic_params, team, static_cast<int>(i), at.z, hz)[ai];
      const double q_zbar = critic_q_values(critic, critic_params, team, static_cast<int>(i),
                                            other_option(at.z), hzbar)[ai];
      const double adv = termination_advantage(q_z, q_zbar);

      LocalEncode enc = encode_local(actor, actor_params, at.obs);
      const DenseMatrix s = take_row(enc.H, enc.cur_local);
      TermCache tc;
      const double beta = termination_prob(actor, actor_params, s, at.z_prev, tc);

      const double delta = at.terminated ? 1.0 : 0.0;
      const double loglik = delta * std::log(beta) + (1.0 - delta) * std::log(1.0 - beta);
      loss += -loglik * adv;

      if (actor_grads) {
        const double dbeta =
            -adv * (delta / beta - (1.0 - delta) / (1.0 - beta)) / count;
        const DenseMatrix gs = termination_backward(actor, actor_params, tc, dbeta, *actor_grads);
        DenseMatrix gH(enc.H.rows, enc.H.cols);
        for (int j = 0; j < enc.H.cols; ++j) gH.at(enc.cur_local, j) = gs.at(0, j);
        policy_encode_backward(actor, actor_params, enc.cache, gH, *actor_grads);
      }
    }
  }
  return loss / count;
}

double policy_loss(const std::vector<const Transition*>& batch, const PolicyNet& actor,
                   const CriticNet& critic, const ParameterStore& actor_params,
                   const ParameterStore& critic_params, double alpha,
                   ParameterStore* actor_grads) {
  double loss = 0.0;
  int count = 0;
  for (const Transition* t : batch) count += static_cast<int>(t->agents.size());
  if (count == 0) return 0.0;

  for (const Transition* t : batch) {
    CriticTeamCache team;
    critic_encode(critic, critic_params, t->critic_view, team);
    for (size_t i = 0; i < t->agents.size(); ++i) {
      const AgentTransition& at = t->agents[i];
      checked_action_candidate(at, t->critic_view, static_cast<int>(i));

      CriticHeadCache hc;
      const std::vector<double> q =
          critic_q_values(critic, critic_params, team, static_cast<int>(i), at.z, hc);

      LocalEncode enc = encode_local(actor, actor_params, at.obs);
      WaypointCache wc;
      const std::vector<double> probs = waypoint_policy(actor, actor_params, enc.H, enc.cur_local,
                                                        at.z, enc.local_rows, wc);

      double sample = 0.0;
      std::vector<double> gprobs(probs.size(), 0.0);
      for (size_t j = 0; j < probs.size(); ++j) {
        const double logp = std::log(std::max(1e-300, probs[j]));
        sample += probs[j] * (alpha * logp - q[j]);
        gprobs[j] = (alpha * logp + alpha - q[j]) / count;
      }
      loss += sample;

      if (actor_grads) {
        DenseMatrix gH(enc.H.rows, enc.H.cols);
        waypoint_backward(actor, actor_params, wc, gprobs, gH, *actor_grads);
        policy_encode_backward(actor, actor_params, enc.cache, gH, *actor_grads);
      }
    }
  }
  return loss / count;
}

double critic_td_loss(const std::vector<const Transition*>& batch, const PolicyNet& actor,
                      const CriticNet& critic, const ParameterStore& actor_params,
                      const ParameterStore& critic_params, const ParameterStore& target_params,
                      const TrainConfig& cfg, ParameterStore* critic_grads) {
  double loss = 0.0;
  int count = 0;
  for (const Transition* t : batch) count += static_cast<int>(t->agents.size());
  if (count == 0) return 0.0;

  for (const Transition* t : batch) {
    CriticTeamCache team;
    critic_encode(critic, critic_params, t->critic_view, team);
    DenseMatrix gH(team.H.rows, team.H.cols);

    CriticTeamCache target_team;
    const bool bootstrap = !t->done;
    if (bootstrap) {
      critic_encode(critic, target_params, t->next_critic_view, target_team);
    }

    for (size_t i = 0; i < t->agents.size(); ++i) {
      const AgentTransition& at = t->agents[i];
      const int ai = checked_action_candidate(at, t->critic_view, static_cast<int>(i));

      CriticHeadCache head;
      const std::vector<double> q =
          critic_q_values(critic, critic_params, team, static_cast<int>(i), at.z, head);
      const double q_sa = q[ai];

      double y = at.reward;
      if (bootstrap) {
        CriticHeadCache thead;
        const std::vector<double> qbar = critic_q_values(critic, target_params, target_team,
                                                         static_cast<int>(i), at.next_z, thead);
        LocalEncode enc = encode_local(actor, actor_params, at.next_obs);
        WaypointCache wc;
        const std::vector<double> probs = waypoint_policy(
            actor, actor_params, enc.H, enc.cur_local, at.next_z, enc.local_rows, wc);
        if (probs.size() != qbar.size()) {
          throw InconsistentStateError("next-state candidates do not align");
        }
        double soft = 0.0;
        for (size_t j = 0; j < probs.size(); ++j) {
          soft += probs[j] * (qbar[j] - cfg.alpha * std::log(std::max(1e-300, probs[j])));
        }
        y += cfg.gamma * soft;
      }

      const double diff = q_sa - y;
      loss += diff * diff;
      if (critic_grads) {
        std::vector<double> gq(q.size(), 0.0);
        gq[ai] = 2.0 * diff / count;
        critic_head_backward(critic, critic_params, team, head, gq, gH, *critic_grads);
      }
    }
    if (critic_grads) critic_encode_backward(critic, critic_params, team, gH, *critic_grads);
  }
  return loss / count;
}

namespace {

// One shared pass for the policy and termination losses: the per-sample actor
// encoding and critic evaluation feed both, which roughly halves the cost of
// an actor update.
void actor_losses_combined(const std::vector<const Transition*>& batch, const PolicyNet& actor,
                           const CriticNet& critic, const ParameterStore& params,
                           double alpha, double lambda_term, ParameterStore* grads,
                           double* policy_out, double* term_out) {
  double policy_sum = 0.0;
  double term_sum = 0.0;
  int count = 0;
  for (const Transition* t : batch) count += static_cast<int>(t->agents.size());
  if (count == 0) {
    *policy_out = 0.0;
    *term_out = 0.0;
    return;
  }

  for (const Transition* t : batch) {
    CriticTeamCache team;
    critic_encode(critic, params, t->critic_view, team);
    for (size_t i = 0; i < t->agents.size(); ++i) {
      const AgentTransition& at = t->agents[i];
      const int ai = checked_action_candidate(at, t->critic_view, static_cast<int>(i));

      CriticHeadCache hz, hzbar;
      const std::vector<double> q =
          critic_q_values(critic, params, team, static_cast<int>(i), at.z, hz);
      const double q_zbar = critic_q_values(critic, params, team, static_cast<int>(i),
                                            other_option(at.z), hzbar)[ai];
      const double adv = termination_advantage(q[ai], q_zbar);

      LocalEncode enc = encode_local(actor, params, at.obs);

      // Policy loss term.
      WaypointCache wc;
      const std::vector<double> probs = waypoint_policy(actor, params, enc.H, enc.cur_local,
                                                        at.z, enc.local_rows, wc);
      std::vector<double> gprobs(probs.size(), 0.0);
      for (size_t j = 0; j < probs.size(); ++j) {
        const double logp = std::log(std::max(1e-300, probs[j]));
        policy_sum += probs[j] * (alpha * logp - q[j]);
        gprobs[j] = (alpha * logp + alpha - q[j]) / count;
      }

      // Termination loss term.
      const DenseMatrix s = take_row(enc.H, enc.cur_local);
      TermCache tc;
      const double beta = termination_prob(actor, params, s, at.z_prev, tc);
      const double delta = at.terminated ? 1.0 : 0.0;
      term_sum += -(delta * std::log(beta) + (1.0 - delta) * std::log(1.0 - beta)) * adv;

      if (grads) {
        DenseMatrix gH(enc.H.rows, enc.H.cols);
        waypoint_backward(actor, params, wc, gprobs, gH, *grads);
        if (lambda_term != 0.0) {
          const double dbeta = -lambda_term * adv *
                               (delta / beta - (1.0 - delta) / (1.0 - beta)) / count;
          const DenseMatrix gs = termination_backward(actor, params, tc, dbeta, *grads);
          for (int j = 0; j < enc.H.cols; ++j) gH.at(enc.cur_local, j) += gs.at(0, j);
        }
        policy_encode_backward(actor, params, enc.cache, gH, *grads);
      }
    }
  }
  *policy_out = policy_sum / count;
  *term_out = term_sum / count;
}

}  // namespace

void sgd_step(ParameterStore& params, const ParameterStore& grads,
              const std::vector<std::string>& names, double lr, double momentum, OptState& state,
              double grad_clip) {
  double scale = 1.0;
  if (grad_clip > 0.0) {
    double norm2 = 0.0;
    for (const std::string& name : names) {
      if (!grads.contains(name)) continue;
      for (double v : grads.at(name).data) norm2 += v * v;
    }
    const double norm = std::sqrt(norm2);
    if (norm > grad_clip) scale = grad_clip / norm;
  }
  for (const std::string& name : names) {
    if (!grads.contains(name)) continue;
    const DenseMatrix& g = grads.at(name);
    if (!state.velocity.contains(name)) {
      state.velocity.add(name, g.rows, g.cols);
    }
    DenseMatrix& v = state.velocity.at(name);
    DenseMatrix& theta = params.at(name);
    for (size_t k = 0; k < g.data.size(); ++k) {
      v.data[k] = momentum * v.data[k] + scale * g.data[k];
      theta.data[k] -= lr * v.data[k];
    }
  }
}

void soft_update(ParameterStore& target, const ParameterStore& online, double tau) {
  for (auto& [name, t] : target.entries()) {
    const DenseMatrix& o = online.at(name);
    for (size_t k = 0; k < t.data.size(); ++k) {
      t.data[k] = (1.0 - tau) * t.data[k] + tau * o.data[k];
    }
  }
}

LossReport update_step(ReplayBuffer& buffer, const PolicyNet& actor, const CriticNet& critic,
                       ParameterStore& params, ParameterStore& target_params, OptState& opt,
                       const TrainConfig& cfg, int update_index) {
  const auto batch = buffer.sample(cfg.batch_size);
  LossReport report;
  const double decay =
      cfg.lr_half_life > 0
          ? std::exp2(-static_cast<double>(update_index) / cfg.lr_half_life)
          : 1.0;

  ParameterStore cgrads;
  report.critic_td = critic_td_loss(batch, actor, critic, params, params, target_params, cfg,
                                    &cgrads);
  sgd_step(params, cgrads, params.names_with_prefix(critic.prefix_ + "."),
           cfg.lr_critic * decay, cfg.momentum, opt, cfg.grad_clip);

  ParameterStore agrads;
  actor_losses_combined(batch, actor, critic, params, cfg.alpha, cfg.lambda_term, &agrads,
                        &report.policy, &report.termination);
  sgd_step(params, agrads, params.names_with_prefix(actor.prefix() + "."), cfg.lr_actor * decay,
           cfg.momentum, opt, cfg.grad_clip);

  soft_update(target_params, params, cfg.tau);

  if (!std::isfinite(report.critic_td) || !std::isfinite(report.policy) ||
      !std::isfinite(report.termination)) {
    throw NumericError("non-finite loss: critic=" + std::to_string(report.critic_td) +
                       " policy=" + std::to_string(report.policy) +
                       " termination=" + std::to_string(report.termination));
  }
  return report;
}

int collect_rollout(RolloutEnv& env, const PolicyNet& actor, const CriticNet& critic,
                    const ParameterStore& params, ReplayBuffer& buffer, int steps, Rng& rng) {
  (void)critic;
  int pushed = 0;
  for (int s = 0; s < steps; ++s) {
    if (!env.engine || env.engine->done()) {
      env.engine = std::make_unique<Engine>(env.episode_seed++, env.cfg);
      env.memories.assign(env.cfg.n_agents, PolicyMemory{});
      env.pending.reset();
      env.current_return = 0.0;
    }
    Engine& eng = *env.engine;
    const int n = eng.config().n_agents;

    std::vector<AgentObservation> obs(n);
    std::vector<PolicyOutput> outs(n);
    std::vector<Option> options(n);
    for (int i = 0; i < n; ++i) {
      obs[i] = eng.observe_agent(i);
      env.memories[i].stage = eng.agents()[i].stage;
      outs[i] = act(actor, params, obs[i], env.memories[i], &rng, /*greedy=*/false);
      options[i] = outs[i].option;
    }

    const CriticInput view =
        privileged_input(eng.ground_truth(), eng.belief(), eng.graph(), eng.plan_graph(),
                         eng.agents(), eng.config().sensor, eng.beacons(), eng.utilities(),
                         options);

    // The previous step's transition waited for this step's option choice.
    if (env.pending) {
      for (int i = 0; i < n; ++i) {
        env.pending->agents[i].next_obs = obs[i];
        env.pending->agents[i].next_z = options[i];
      }
      env.pending->next_critic_view = view;
      buffer.push(std::move(*env.pending));
      env.pending.reset();
      ++pushed;
    }

    JointAction proposal;
    std::vector<int> opt_codes(n), term_codes(n);
    for (int i = 0; i < n; ++i) {
      proposal.next_node.push_back(outs[i].waypoint);
      opt_codes[i] = static_cast<int>(outs[i].option);
      term_codes[i] = outs[i].terminated ? 1 : 0;
    }
    const JointAction constrained = eng.apply_dual_stage_constraint(proposal);
    const JointAction resolved = eng.resolve_conflicts(constrained);
    eng.annotate_step(opt_codes, term_codes);

    std::vector<Option> z_prev(n);
    std::vector<Stage> stages(n);
    for (int i = 0; i < n; ++i) {
      z_prev[i] = env.memories[i].z_prev;
      stages[i] = env.memories[i].stage;
    }
    const StepOutcome out = eng.step(resolved);

    Transition tr;
    tr.critic_view = view;
    tr.done = out.done;
    tr.agents.resize(n);
    for (int i = 0; i < n; ++i) {
      AgentTransition& at = tr.agents[i];
      at.obs = obs[i];
      at.z_prev = z_prev[i];
      at.stage = stages[i];
      at.terminated = outs[i].terminated;
      at.z = outs[i].option;
      at.reward = out.rewards[i];
      const auto it = std::find(obs[i].neighbor_ids.begin(), obs[i].neighbor_ids.end(),
                                out.resolved_moves[i]);
      if (it == obs[i].neighbor_ids.end()) {
        throw InconsistentStateError("executed move missing from neighbor set");
      }
      at.action_index = static_cast<int>(it - obs[i].neighbor_ids.begin());
      env.current_return += out.rewards[i];
      env.memories[i].z_prev = outs[i].option;
      env.memories[i].stage = eng.agents()[i].stage;
    }

    if (out.done) {
      buffer.push(std::move(tr));
      ++pushed;
      env.episode_return_history.push_back(env.current_return);
    } else if (eng.done()) {
      // Step-cap truncation: bootstrap with the carried options.
      for (int i = 0; i < n; ++i) {
        tr.agents[i].next_obs = eng.observe_agent(i);
        tr.agents[i].next_z = tr.agents[i].z;
      }
      tr.next_critic_view =
          privileged_input(eng.ground_truth(), eng.belief(), eng.graph(), eng.plan_graph(),
                           eng.agents(), eng.config().sensor, eng.beacons(), eng.utilities(),
                           options);
      buffer.push(std::move(tr));
      ++pushed;
      env.episode_return_history.push_back(env.current_return);
    } else {
      env.pending = std::make_unique<Transition>(std::move(tr));
    }
  }
  return pushed;
}

}  // namespace orion
