#pragma once

#include <memory>

#include "orion/critic.hpp"
#include "orion/engine.hpp"
#include "orion/policy.hpp"

namespace orion {

struct TrainConfig {
  NetConfig net;
  double gamma = 0.99;
  double alpha = 0.05;        // entropy coefficient, fixed
  double lambda_term = 0.5;   // termination-loss weight
  double tau = 0.005;         // soft target interpolation
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double momentum = 0.0;
  int lr_half_life = 0;  // updates per learning-rate halving; 0 disables decay
  double grad_clip = 0.0;  // global-norm clip per network, 0 disables
  int batch_size = 32;
  int replay_capacity = 2000;
  std::uint64_t seed = 0;
};

// One agent's slice of a joint transition.
struct AgentTransition {
  AgentObservation obs;
  Option z_prev = Option::Navigate;
  Stage stage = Stage::PreArrival;  // stage when the decision was made
  bool terminated = false;          // Bernoulli draw delta
  Option z = Option::Navigate;      // option active at this step
  int action_index = -1;            // into obs.neighbor_ids, the executed move
  double reward = 0.0;
  AgentObservation next_obs;
  Option next_z = Option::Navigate;  // option active at the next step
};

struct Transition {
  std::vector<AgentTransition> agents;
  CriticInput critic_view;       // options = active option per agent
  CriticInput next_critic_view;  // options = next active option per agent
  bool done = false;
};

// Seeded uniform ring buffer.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {}

  void push(Transition t);
  int size() const { return static_cast<int>(storage_.size()); }
  int capacity() const { return capacity_; }
  const Transition& at(int i) const { return storage_[i]; }
  std::vector<const Transition*> sample(int batch);

 private:
  int capacity_;
  Rng rng_;
  std::vector<Transition> storage_;
  size_t write_ = 0;
};

// ---------------------------------------------------------------------------
// Rewards (per-step shaping; the engine computes these during step()).
// ---------------------------------------------------------------------------

struct RewardContext {
  double edge_length = 0.0;
  double node_spacing = 1.0;
  bool first_arrival = false;
  int frontier_cells_verified = 0;  // attributed to this agent
  int disk_cell_count = 1;
  bool team_done = false;
};

double reward_fn(const RewardContext& ctx, const RewardConfig& cfg);

// ---------------------------------------------------------------------------
// Losses. Each returns the scalar loss and accumulates analytic gradients for
// the network it trains; every other network is treated as a constant.
// ---------------------------------------------------------------------------

double termination_advantage(double q_z, double q_zbar);

struct LossReport {
  double critic_td = 0.0;
  double policy = 0.0;
  double termination = 0.0;
};

// Eq-style termination loss: -mean over batch agents of
//   (delta log beta + (1-delta) log(1-beta)) * A_term,
// with A_term from the critic held constant.
double termination_loss(const std::vector<const Transition*>& batch, const PolicyNet& actor,
                        const CriticNet& critic, const ParameterStore& actor_params,
                        const ParameterStore& critic_params, ParameterStore* actor_grads);

// Entropy-regularized policy loss: mean over (s, z) of
//   sum_a pi(a|s,z) (alpha log pi(a|s,z) - Q(s,a,z)).
double policy_loss(const std::vector<const Transition*>& batch, const PolicyNet& actor,
                   const CriticNet& critic, const ParameterStore& actor_params,
                   const ParameterStore& critic_params, double alpha,
                   ParameterStore* actor_grads);

// TD regression against the soft target built from the target critic and the
// frozen actor at the next state.
double critic_td_loss(const std::vector<const Transition*>& batch, const PolicyNet& actor,
                      const CriticNet& critic, const ParameterStore& actor_params,
                      const ParameterStore& critic_params, const ParameterStore& target_params,
                      const TrainConfig& cfg, ParameterStore* critic_grads);

// ---------------------------------------------------------------------------
// Optimizer and the combined update.
// ---------------------------------------------------------------------------

struct OptState {
  ParameterStore velocity;
};

// v <- momentum v + g ; theta <- theta - lr v, over the named subset. A
// nonzero clip rescales the gradient subset to that global norm first.
void sgd_step(ParameterStore& params, const ParameterStore& grads,
              const std::vector<std::string>& names, double lr, double momentum, OptState& state,
              double grad_clip = 0.0);

void soft_update(ParameterStore& target, const ParameterStore& online, double tau);

// `update_index` drives the optional learning-rate schedule.
LossReport update_step(ReplayBuffer& buffer, const PolicyNet& actor, const CriticNet& critic,
                       ParameterStore& params, ParameterStore& target_params, OptState& opt,
                       const TrainConfig& cfg, int update_index = 0);

// ---------------------------------------------------------------------------
// Rollout collection with the stochastic actor.
// ---------------------------------------------------------------------------

struct RolloutEnv {
  EngineConfig cfg;
  std::uint64_t episode_seed = 1;  // advances per episode
  std::unique_ptr<Engine> engine;
  std::vector<PolicyMemory> memories;
  std::unique_ptr<Transition> pending;  // waits for the next step's option
  std::vector<double> episode_return_history;
  double current_return = 0.0;
};

// Advances `steps` environment steps, pushing completed transitions. Returns
// the number of transitions pushed.
int collect_rollout(RolloutEnv& env, const PolicyNet& actor, const CriticNet& critic,
                    const ParameterStore& params, ReplayBuffer& buffer, int steps, Rng& rng);

}  // namespace orion
