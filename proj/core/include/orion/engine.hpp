#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "orion/features.hpp"
#include "orion/mazegen.hpp"

namespace orion {

struct RewardConfig {
  double step_cost_scale = 0.1;
  double arrival_bonus = 20.0;
  double team_done_bonus = 10.0;
  double frontier_bonus = 0.2;
};

struct MapParams {
  int width = 32;
  int height = 32;
  int corridor_width = 2;
  double obstacle_density = 0.25;
};

struct EngineConfig {
  MapParams map;
  DiscrepancyConfig discrepancies;
  GraphConfig graph;
  SensorConfig sensor;
  RewardConfig reward;
  int n_agents = 2;
  int step_cap = 128;
  double kappa = 1.0;              // dual-stage return-budget factor
  bool dual_stage_enabled = true;  // ablation hook: gate forced false when off
  // Nonzero: the maze and discrepancies come from this seed while starts and
  // targets still follow the episode seed (a fixed world, varying missions).
  std::uint64_t world_seed = 0;
  // With a world seed set, also pin starts/targets to it (one fixed mission).
  bool fixed_missions = false;
};

struct JointAction {
  std::vector<int> next_node;  // node id per agent: a graph neighbor or the current node
};

struct BlockedMove {
  int agent_id;
  std::string reason;
};

struct StepOutcome {
  std::vector<int> resolved_moves;
  std::vector<BlockedMove> conflicts_blocked;
  std::vector<double> rewards;
  bool done = false;
  int new_observation_count = 0;  // cells first verified this step
  bool combined_changed = false;
  bool current_changed = false;
};

struct EpisodeMetrics {
  double max_dist = 0.0;
  double avg_dist = 0.0;
  double min_dist = 0.0;
  int steps = 0;
  bool success = false;
};

struct StepRecord {
  int step = 0;
  std::vector<int> nodes;
  std::vector<int> options;
  std::vector<int> terminations;
  std::vector<double> rewards;
  int observed_cells = 0;
};

struct EpisodeLog {
  std::uint64_t seed = 0;
  int n_agents = 0;
  int width = 0;
  int height = 0;
  std::vector<int> start_nodes;
  std::vector<int> target_nodes;
  std::vector<StepRecord> records;
  EpisodeMetrics metrics;
  bool finished = false;

  std::string to_jsonl() const;
  static EpisodeLog from_jsonl(const std::string& text);
};

EpisodeMetrics compute_metrics(const EpisodeLog& log);

// Synchronous conflict-checked multi-agent stepper over the shared belief.
// Agents act on the combined graph; the ground truth arbitrates traversal,
// so a believed-free edge that is actually blocked demotes the move to a
// stay and reveals the obstructing cells (contact sensing).
class Engine {
 public:
  Engine(std::uint64_t seed, const EngineConfig& cfg);
  // Scenario constructor: caller-supplied world and start/target cells (which
  // must be Free lattice cells in both maps). map/discrepancy configs in cfg
  // are ignored.
  Engine(OccupancyGrid gt, const OccupancyGrid& prior, const std::vector<Cell>& starts,
         const std::vector<Cell>& targets, const EngineConfig& cfg, std::uint64_t log_seed = 0);

  const EngineConfig& config() const { return cfg_; }
  const OccupancyGrid& ground_truth() const { return gt_; }
  const BeliefState& belief() const { return belief_; }
  const NavGraph& graph() const { return graph_; }
  const NavGraph& plan_graph() const { return plan_graph_; }
  const std::vector<Beacon>& beacons() const { return beacons_; }
  const UtilityColumns& utilities() const { return utilities_; }
  const std::vector<AgentState>& agents() const { return agents_; }
  int step_count() const { return step_count_; }
  bool done() const { return done_; }
  std::uint64_t seed() const { return seed_; }

  AgentObservation observe_agent(int agent_index) const;

  // Demotes conflicting moves to stays by agent-id priority until no vertex
  // conflict and no edge swap remains.
  JointAction resolve_conflicts(const JointAction& proposal) const;

  // Forces post-arrival agents sitting on their target to stay unless the
  // dual-stage gate admits a departure. Applied by every controller.
  JointAction apply_dual_stage_constraint(const JointAction& proposal) const;

  StepOutcome step(const JointAction& resolved);

  // True when the agent may leave its reached target to assist: a teammate is
  // still en route, uncertainty remains, and the frontier round trip fits
  // within kappa times the slowest teammate's remaining lower-bound distance.
  bool dual_stage_gate(int agent_index) const;

  // Nodes whose sensing footprint covers at least one uncertain obstacle cell
  // that borders a prior frontier; visiting one verifies that uncertainty.
  std::vector<int> frontier_view_nodes() const;

  double last_rebuild_seconds() const { return last_rebuild_seconds_; }

  EpisodeLog& log() { return log_; }
  const EpisodeLog& log() const { return log_; }
  // Stamp policy decisions into the log record of the step about to execute.
  void annotate_step(const std::vector<int>& options, const std::vector<int>& terminations);

  void finalize_log();

 private:
  void init_from_world(const OccupancyGrid& prior, const std::vector<Cell>& starts,
                       const std::vector<Cell>& targets);
  void rebuild_graphs(bool combined_changed, bool current_changed);
  bool edge_blocked_in_truth(int from_id, int to_id, std::vector<Cell>* blockers) const;

  EngineConfig cfg_;
  std::uint64_t seed_ = 0;
  OccupancyGrid gt_;
  BeliefState belief_;
  NavGraph graph_;       // combined graph: the act/planning belief
  NavGraph plan_graph_;  // current map, unknown included
  std::vector<Beacon> beacons_;
  UtilityColumns utilities_;
  std::vector<AgentState> agents_;
  int step_count_ = 0;
  bool done_ = false;
  EpisodeLog log_;
  double last_rebuild_seconds_ = 0.0;
  std::vector<int> pending_options_;
  std::vector<int> pending_terminations_;
};

}  // namespace orion
