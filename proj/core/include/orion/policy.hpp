#pragma once

#include <array>
#include <cstdint>

#include "orion/agent.hpp"
#include "orion/features.hpp"
#include "orion/layers.hpp"

namespace orion {

// Admissible option transitions per stage, indexed [from][to]. Pre-arrival
// permits everything; post-arrival suppresses transitions into Navigate.
struct FsmMask {
  std::array<std::array<int, 2>, 2> m;
  const std::array<int, 2>& row(Option z) const { return m[static_cast<int>(z)]; }
};

FsmMask fsm_mask(Stage stage);

struct PolicyNet {
  NetConfig cfg;
  Encoder cur_enc;  // updated encoder over the online view
  Encoder cmb_enc;  // combined encoder over the belief view
  MultiHeadAttention fuse;
  Mlp term;
  MultiHeadAttention dec;
  std::string opt_embed;  // [K x d]
  std::string ptr_q, ptr_k;

  explicit PolicyNet(const NetConfig& cfg);
  // Creates every "policy.*" parameter in the store.
  static void init(ParameterStore& store, const NetConfig& cfg, Rng& rng);
  std::string prefix() const { return "policy"; }
};

// ---------------------------------------------------------------------------
// encode: dual encoders fused by cross-attention. Every row of the updated
// encoding queries the combined encoding; with a residual this yields the
// per-node fused matrix H, and the robot state feature s is the agent's row.
// ---------------------------------------------------------------------------

struct EncodeCache {
  EncoderCache cur, cmb;
  AttentionCache fuse;
  DenseMatrix s_cur, s_cmb;
  std::vector<int> query_rows;  // H row t corresponds to node row query_rows[t]
  int n = 0;
};

// With query_rows null the fused matrix H covers every node; a row subset
// restricts the fusion queries to the rows the decoders will read (the
// agent's node and its neighbors), which is what execution uses.
DenseMatrix policy_encode(const PolicyNet& net, const ParameterStore& p,
                          const AgentObservation& obs, EncodeCache& cache,
                          const std::vector<int>* query_rows = nullptr);
void policy_encode_backward(const PolicyNet& net, const ParameterStore& p,
                            const EncodeCache& cache, const DenseMatrix& gH,
                            ParameterStore& grads);

// ---------------------------------------------------------------------------
// Termination head: beta = sigmoid(MLP(s + e(z))).
// ---------------------------------------------------------------------------

struct TermCache {
  MlpCache mlp;
  double beta = 0.0;
  Option z = Option::Navigate;
};

double termination_prob(const PolicyNet& net, const ParameterStore& p, const DenseMatrix& s,
                        Option z_prev, TermCache& cache);
// Returns gradient w.r.t. s; accumulates MLP and embedding gradients.
DenseMatrix termination_backward(const PolicyNet& net, const ParameterStore& p,
                                 const TermCache& cache, double gbeta, ParameterStore& grads);

// ---------------------------------------------------------------------------
// Option selection: Bernoulli(beta) termination, then the FSM-masked softmax
// over per-option termination-head scores. Ties break to the lower index.
// ---------------------------------------------------------------------------

struct OptionSelection {
  Option z = Option::Navigate;
  bool terminated = false;   // the Bernoulli draw
  bool fsm_forced = false;   // continuation vetoed by the mask
  double beta = 0.0;         // termination probability of z_prev
  std::array<double, 2> scores{};  // per-option head scores
  std::array<double, 2> probs{};   // masked softmax distribution
};

OptionSelection select_option(const PolicyNet& net, const ParameterStore& p, const DenseMatrix& s,
                              Option z_prev, Stage stage, Rng* rng, bool greedy);

// ---------------------------------------------------------------------------
// Waypoint decoder: option-conditioned query over neighbor rows of H, then a
// pointer layer with logit clipping.
// ---------------------------------------------------------------------------

struct WaypointCache {
  Option z = Option::Navigate;
  int cur_row = -1;
  std::vector<int> nbr_rows;
  DenseMatrix h_tilde;
  DenseMatrix nbr;  // neighbor rows of H
  AttentionCache dec;
  DenseMatrix h_prime;
  LinearCache unused;
  DenseMatrix pq;  // pointer query projection [1 x d]
  DenseMatrix pk;  // pointer key projections [m x d]
  std::vector<double> scores;       // pre-clip
  std::vector<double> probs;
};

std::vector<double> waypoint_policy(const PolicyNet& net, const ParameterStore& p,
                                    const DenseMatrix& H, int cur_row, Option z,
                                    const std::vector<int>& nbr_rows, WaypointCache& cache);
// Accumulates into gH (same shape as H) and grads.
void waypoint_backward(const PolicyNet& net, const ParameterStore& p, const WaypointCache& cache,
                       const std::vector<double>& gprobs, DenseMatrix& gH, ParameterStore& grads);

// ---------------------------------------------------------------------------
// Full actor step.
// ---------------------------------------------------------------------------

struct PolicyMemory {
  Option z_prev = Option::Navigate;
  Stage stage = Stage::PreArrival;
};

struct PolicyOutput {
  DenseMatrix state_feature;  // s, [1 x d]
  double beta = 0.0;
  Option option = Option::Navigate;
  bool terminated = false;
  std::vector<double> waypoint_probs;  // aligned with neighbor_ids
  int waypoint = -1;                   // chosen node id
};

PolicyOutput act(const PolicyNet& net, const ParameterStore& p, const AgentObservation& obs,
                 const PolicyMemory& memory, Rng* rng, bool greedy);

constexpr double kPointerClip = 10.0;

}  // namespace orion
