#pragma once

#include "orion/agent.hpp"
#include "orion/features.hpp"
#include "orion/layers.hpp"

namespace orion {

// Team-level input for the centralized critic. Features live on the same
// lattice node set the actors see; the verified column is replaced by the
// privileged truth flag (belief matches ground truth).
struct CriticInput {
  DenseMatrix features;  // [n x 10]
  std::vector<std::vector<int>> attn_lists;
  std::vector<int> agent_rows;                   // per agent: row of its node
  std::vector<Option> options;                   // per agent: active option
  std::vector<std::vector<int>> candidate_rows;  // per agent: waypoint candidates (self included)
};

struct CriticNet {
  NetConfig cfg;
  Encoder enc;
  MultiHeadAttention ref;  // option-aware refinement over teammates
  Mlp fq;                  // [h_i, h~_i, c_i, h_cand] -> scalar
  std::string opt_embed;
  std::string maac_wq, maac_wk, maac_wv;

  explicit CriticNet(const NetConfig& cfg, const std::string& prefix = "critic");
  static void init(ParameterStore& store, const NetConfig& cfg, Rng& rng,
                   const std::string& prefix = "critic");
  std::string prefix_;
};

// Builds the privileged team view from the live episode state.
CriticInput privileged_input(const OccupancyGrid& gt, const BeliefState& belief,
                             const NavGraph& graph, const NavGraph& plan_graph,
                             const std::vector<AgentState>& team, const SensorConfig& sensor,
                             const std::vector<Beacon>& beacons, const UtilityColumns& utilities,
                             const std::vector<Option>& options);

struct CriticTeamCache {
  EncoderCache enc;
  DenseMatrix H;
  CriticInput input;
};

// Unified privileged encoding shared by every per-agent head.
DenseMatrix critic_encode(const CriticNet& net, const ParameterStore& p, const CriticInput& input,
                          CriticTeamCache& cache);
void critic_encode_backward(const CriticNet& net, const ParameterStore& p,
                            const CriticTeamCache& cache, const DenseMatrix& gH,
                            ParameterStore& grads);

struct CriticHeadCache {
  int agent = -1;
  Option z = Option::Navigate;
  DenseMatrix u;        // [N x d] team embeddings (agent row conditioned on z)
  DenseMatrix h_i;      // [1 x d]
  bool refined = false;
  DenseMatrix kv;       // teammate embedding rows (refinement input)
  std::vector<int> teammates;  // agent indices in kv/k/v row order
  AttentionCache ref;
  DenseMatrix h_ref;    // refined h~_i
  DenseMatrix q, k, v;  // MAAC projections
  std::vector<double> alpha;  // over teammates
  DenseMatrix c;        // attention context [1 x d]
  std::vector<DenseMatrix> ucat;  // per candidate
  std::vector<MlpCache> fq;
};

// Per-agent option-state action values over that agent's candidates. The
// conditioning option z overrides input.options[agent] (counterfactual
// evaluation for the termination advantage).
std::vector<double> critic_q_values(const CriticNet& net, const ParameterStore& p,
                                    const CriticTeamCache& team, int agent, Option z,
                                    CriticHeadCache& cache);
// Accumulates dL/dH into gH plus parameter gradients for the head.
void critic_head_backward(const CriticNet& net, const ParameterStore& p,
                          const CriticTeamCache& team, const CriticHeadCache& cache,
                          const std::vector<double>& gq, DenseMatrix& gH, ParameterStore& grads);

// MAAC attention exposed for direct testing: weights over teammates j != i
// and the context vector.
struct MaacResult {
  std::vector<double> alpha;
  DenseMatrix context;
};
MaacResult maac_attention(const CriticNet& net, const ParameterStore& p, const DenseMatrix& h_i,
                          const DenseMatrix& teammate_embeddings);

}  // namespace orion
