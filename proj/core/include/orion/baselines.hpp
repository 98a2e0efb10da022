#pragma once

#include <map>
#include <memory>

#include "orion/engine.hpp"
#include "orion/policy.hpp"

namespace orion {

// A controller proposes joint moves for the live engine; the runner applies
// the dual-stage constraint and conflict resolution uniformly.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset(const Engine& engine) { (void)engine; }
  virtual JointAction propose(Engine& engine) = 0;
  virtual void post_step(const Engine& engine, const StepOutcome& outcome) {
    (void)engine;
    (void)outcome;
  }
};

// Runs one episode to completion (or step cap); returns the finished log.
EpisodeLog run_episode(Engine& engine, Controller& controller);

// ---------------------------------------------------------------------------
// Independent shortest-path follower on the combined graph.
// ---------------------------------------------------------------------------

class GreedyDijkstraController : public Controller {
 public:
  JointAction propose(Engine& engine) override;
};

// ---------------------------------------------------------------------------
// Dual-stage wrapper: pre-arrival agents follow the base controller;
// post-arrival agents gate-check, explore toward uncertainty, and return.
// ---------------------------------------------------------------------------

class DualStageWrapper : public Controller {
 public:
  explicit DualStageWrapper(std::unique_ptr<Controller> base) : base_(std::move(base)) {}
  void reset(const Engine& engine) override { base_->reset(engine); }
  JointAction propose(Engine& engine) override;
  void post_step(const Engine& engine, const StepOutcome& outcome) override {
    base_->post_step(engine, outcome);
  }

 private:
  std::unique_ptr<Controller> base_;
};

// ---------------------------------------------------------------------------
// Prioritized space-time A* with a reservation table, replanning from scratch
// whenever the combined map changes (or execution deviates from plan).
// ---------------------------------------------------------------------------

struct ReservationTable {
  std::map<std::pair<int, int>, int> vertex;                 // (node id, t) -> agent
  std::map<std::tuple<int, int, int>, int> edge;             // (from, to, t) -> agent
  bool vertex_free(int node, int t, int agent) const;
  bool edge_free(int from, int to, int t, int agent) const;
  void reserve_path(const std::vector<int>& path, int agent, int horizon);
};

class PrioritizedReplanController : public Controller {
 public:
  explicit PrioritizedReplanController(bool optimistic = false, int horizon = 0)
      : optimistic_(optimistic), horizon_(horizon) {}

  void reset(const Engine& engine) override;
  JointAction propose(Engine& engine) override;
  void post_step(const Engine& engine, const StepOutcome& outcome) override;

  int replan_count() const { return replan_count_; }
  const std::vector<std::vector<int>>& paths() const { return paths_; }

 private:
  void plan(const Engine& engine);

  bool optimistic_ = false;
  int horizon_ = 0;  // 0: derived from graph size and step cap
  std::vector<std::vector<int>> paths_;  // node ids, index 0 = current position
  int step_in_plan_ = 0;
  bool need_replan_ = true;
  int replan_count_ = 0;
};

// Single-agent space-time A* against a reservation table. Exposed for tests.
// Returns the node-id path starting at `start` (one entry per timestep, wait
// steps included); empty when no path within the horizon exists.
std::vector<int> space_time_astar(const NavGraph& graph, int start_id, int goal_id,
                                  const ReservationTable& table, int agent_id, int horizon);

// ---------------------------------------------------------------------------
// The learned actor as a controller, with the ablation toggles.
// ---------------------------------------------------------------------------

struct AblationFlags {
  bool without_option = false;      // option pinned to Navigate, no termination head
  bool without_dual_stage = false;  // handled via EngineConfig.dual_stage_enabled
};

class ActorController : public Controller {
 public:
  ActorController(const PolicyNet& net, const ParameterStore& params, bool greedy,
                  std::uint64_t sample_seed = 0, AblationFlags flags = {});

  void reset(const Engine& engine) override;
  JointAction propose(Engine& engine) override;
  void post_step(const Engine& engine, const StepOutcome& outcome) override;

 private:
  const PolicyNet& net_;
  const ParameterStore& params_;
  bool greedy_;
  Rng rng_;
  AblationFlags flags_;
  std::vector<PolicyMemory> memories_;
  std::vector<Option> last_options_;
};

}  // namespace orion
