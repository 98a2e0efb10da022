#include "orion/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace orion {

EpisodeLog run_episode(Engine& engine, Controller& controller) {
  controller.reset(engine);
  while (!engine.done()) {
    const JointAction proposal = controller.propose(engine);
    const JointAction constrained = engine.apply_dual_stage_constraint(proposal);
    const JointAction resolved = engine.resolve_conflicts(constrained);
    const StepOutcome outcome = engine.step(resolved);
    controller.post_step(engine, outcome);
  }
  return engine.log();
}

namespace {

// Next hop from `from` toward `target` along deterministic Dijkstra parents;
// stays put when unreachable.
int next_hop(const NavGraph& g, int from_id, int target_id) {
  const int from = g.index_of(from_id);
  const int target = g.index_of(target_id);
  if (from < 0 || target < 0 || from == target) return from_id;
  const ShortestPaths sp = dijkstra(g, from_id);
  const std::vector<int> path = sp.path_ids(g, target);
  if (path.size() < 2) return from_id;
  return path[1];
}

}  // namespace

JointAction GreedyDijkstraController::propose(Engine& engine) {
  JointAction act;
  for (const AgentState& a : engine.agents()) {
    act.next_node.push_back(next_hop(engine.graph(), a.node, a.target));
  }
  return act;
}

JointAction DualStageWrapper::propose(Engine& engine) {
  JointAction act = base_->propose(engine);
  const NavGraph& g = engine.graph();
  for (size_t i = 0; i < engine.agents().size(); ++i) {
    const AgentState& a = engine.agents()[i];
    if (a.stage != Stage::PostArrival) continue;

    const bool assist = engine.config().dual_stage_enabled &&
                        engine.dual_stage_gate(static_cast<int>(i));
    if (assist) {
      // Head for the nearest node whose visit verifies uncertain cells.
      const ShortestPaths sp = dijkstra(g, a.node);
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int id : engine.frontier_view_nodes()) {
        const int k = g.index_of(id);
        if (k >= 0 && sp.dist[k] < best_d) {
          best_d = sp.dist[k];
          best = k;
        }
      }
      if (best >= 0 && std::isfinite(best_d)) {
        act.next_node[i] = next_hop(g, a.node, g.nodes()[best].id);
        continue;
      }
    }
    // Otherwise return to (or hold) the target.
    act.next_node[i] = next_hop(g, a.node, a.target);
  }
  return act;
}

// ---------------------------------------------------------------------------
// Reservation table and space-time A*
// ---------------------------------------------------------------------------

bool ReservationTable::vertex_free(int node, int t, int agent) const {
  const auto it = vertex.find({node, t});
  return it == vertex.end() || it->second == agent;
}

bool ReservationTable::edge_free(int from, int to, int t, int agent) const {
  // A swap uses the reversed directed edge at the same timestep.
  const auto it = edge.find({to, from, t});
  return it == edge.end() || it->second == agent;
}

void ReservationTable::reserve_path(const std::vector<int>& path, int agent, int horizon) {
  for (size_t t = 0; t < path.size(); ++t) {
    vertex[{path[t], static_cast<int>(t)}] = agent;
    if (t + 1 < path.size()) {
      edge[{path[t], path[t + 1], static_cast<int>(t)}] = agent;
    }
  }
  // The agent parks at its final node.
  for (int t = static_cast<int>(path.size()); t <= horizon; ++t) {
    vertex[{path.back(), t}] = agent;
  }
}

std::vector<int> space_time_astar(const NavGraph& graph, int start_id, int goal_id,
                                  const ReservationTable& table, int agent_id, int horizon) {
  const int start = graph.index_of(start_id);
  const int goal = graph.index_of(goal_id);
  if (start < 0 || goal < 0) return {};

  // Unit-cost hop distances to the goal (admissible heuristic for unit
  // timesteps).
  const int n = graph.size();
  std::vector<int> hops(n, std::numeric_limits<int>::max());
  {
    std::queue<int> q;
    hops[goal] = 0;
    q.push(goal);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (const auto& [v, w] : graph.adjacency(u)) {
        if (hops[v] == std::numeric_limits<int>::max()) {
          hops[v] = hops[u] + 1;
          q.push(v);
        }
      }
    }
  }
  if (hops[start] == std::numeric_limits<int>::max()) return {};

  // The agent parks at its goal, so the arrival time must postdate every
  // other agent's transit reservation on that node.
  int goal_blocked_until = -1;
  const int goal_node_id = graph.nodes()[goal].id;
  for (auto it = table.vertex.lower_bound({goal_node_id, 0});
       it != table.vertex.end() && it->first.first == goal_node_id; ++it) {
    if (it->second != agent_id) goal_blocked_until = std::max(goal_blocked_until, it->first.second);
  }

  struct Node {
    int f, g, index;
    bool operator>(const Node& o) const {
      if (f != o.f) return f > o.f;
      if (g != o.g) return g < o.g;  // deeper first on f-ties
      return index > o.index;
    }
  };
  // state key: t * n + node index
  std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
  std::map<std::pair<int, int>, std::pair<int, int>> parent;  // (t,idx) -> (t-1, idx)
  std::set<std::pair<int, int>> closed;

  auto node_id = [&](int idx) { return graph.nodes()[idx].id; };
  open.push({hops[start], 0, start});
  parent[{0, start}] = {-1, -1};

  while (!open.empty()) {
    const Node cur = open.top();
    open.pop();
    const int t = cur.g;
    if (closed.contains({t, cur.index})) continue;
    closed.insert({t, cur.index});

    if (cur.index == goal && t > goal_blocked_until) {
      std::vector<int> path;
      std::pair<int, int> key = {t, cur.index};
      while (key.first >= 0) {
        path.push_back(node_id(key.second));
        key = parent.at(key);
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    if (t >= horizon) continue;

    // Wait or move.
    std::vector<std::pair<int, int>> succ;  // (next index, hop estimate)
    succ.push_back({cur.index, hops[cur.index]});
    for (const auto& [v, w] : graph.adjacency(cur.index)) succ.push_back({v, hops[v]});
    std::sort(succ.begin(), succ.end(),
              [&](const auto& a, const auto& b) { return node_id(a.first) < node_id(b.first); });

    for (const auto& [v, h] : succ) {
      if (h == std::numeric_limits<int>::max()) continue;
      if (closed.contains({t + 1, v})) continue;
      if (!table.vertex_free(node_id(v), t + 1, agent_id)) continue;
      if (v != cur.index && !table.edge_free(node_id(cur.index), node_id(v), t, agent_id)) {
        continue;
      }
      const std::pair<int, int> key = {t + 1, v};
      if (parent.contains(key)) continue;
      parent[key] = {t, cur.index};
      open.push({t + 1 + h, t + 1, v});
    }
  }
  return {};
}

void PrioritizedReplanController::reset(const Engine& engine) {
  paths_.clear();
  step_in_plan_ = 0;
  need_replan_ = true;
  replan_count_ = 0;
  (void)engine;
}

void PrioritizedReplanController::plan(const Engine& engine) {
  const NavGraph& primary = optimistic_ ? engine.plan_graph() : engine.graph();
  const NavGraph& fallback = engine.plan_graph();
  const int horizon =
      horizon_ > 0 ? horizon_ : std::max(4 * primary.size() + 16, engine.config().step_cap + 1);
  const int n = static_cast<int>(engine.agents().size());

  // Agents that cannot reach their goal park somewhere (in place, or at the
  // boundary of verified space after a truncated optimistic route). Earlier
  // agents must plan around that parking, so whenever a new agent parks we
  // pin its path and restart the priority sweep (at most n restarts).
  std::map<int, std::vector<int>> pinned;
  while (true) {
    ReservationTable table;
    paths_.assign(n, {});
    for (const auto& [i, path] : pinned) {
      paths_[i] = path;
      table.reserve_path(path, i, horizon);
    }
    int newly_pinned = -1;
    std::vector<int> pinned_path;
    for (int i = 0; i < n; ++i) {
      if (pinned.contains(i)) continue;
      const AgentState& a = engine.agents()[i];
      std::vector<int> path = space_time_astar(primary, a.node, a.target, table, i, horizon);
      if (path.empty() && !optimistic_) {
        // No route on the believed-safe graph: plan through unknown space,
        // truncated at the first not-yet-believed edge; the agent advances to
        // the uncertainty boundary and parks until sensing settles the map.
        path = space_time_astar(fallback, a.node, a.target, table, i, horizon);
        for (size_t k = 0; k + 1 < path.size(); ++k) {
          if (path[k] != path[k + 1] && !engine.graph().has_edge_ids(path[k], path[k + 1])) {
            path.resize(k + 1);
            break;
          }
        }
        // Parking must postdate every reservation others hold on the spot;
        // back off along the route until that holds.
        auto parkable = [&table, i](int node, int t_arrive) {
          for (auto it = table.vertex.lower_bound({node, t_arrive});
               it != table.vertex.end() && it->first.first == node; ++it) {
            if (it->second != i) return false;
          }
          return true;
        };
        while (path.size() > 1 &&
               !parkable(path.back(), static_cast<int>(path.size()) - 1)) {
          path.pop_back();
        }
      }
      if (path.empty()) path = {a.node};
      if (path.back() != a.target) {
        // Parks off-goal: restart with this path pinned.
        newly_pinned = i;
        pinned_path = std::move(path);
        break;
      }
      table.reserve_path(path, i, horizon);
      paths_[i] = std::move(path);
    }
    if (newly_pinned < 0) break;
    pinned[newly_pinned] = std::move(pinned_path);
  }
  step_in_plan_ = 0;
  need_replan_ = false;
  ++replan_count_;
}

JointAction PrioritizedReplanController::propose(Engine& engine) {
  if (need_replan_) plan(engine);
  JointAction act;
  for (size_t i = 0; i < paths_.size(); ++i) {
    const auto& path = paths_[i];
    const int idx = std::min<int>(step_in_plan_ + 1, static_cast<int>(path.size()) - 1);
    int dest = path[idx];
    // In optimistic mode a planned edge may not exist on the combined graph
    // yet; hold position until sensing settles it.
    const AgentState& a = engine.agents()[i];
    if (dest != a.node && !engine.graph().has_edge_ids(a.node, dest)) dest = a.node;
    act.next_node.push_back(dest);
  }
  return act;
}

void PrioritizedReplanController::post_step(const Engine& engine, const StepOutcome& outcome) {
  ++step_in_plan_;
  if (outcome.combined_changed) need_replan_ = true;
  if (optimistic_ && outcome.current_changed) need_replan_ = true;
  // Deviation from plan (conflict demotion or blocked edge) forces a replan.
  for (size_t i = 0; i < paths_.size(); ++i) {
    const auto& path = paths_[i];
    const int idx = std::min<int>(step_in_plan_, static_cast<int>(path.size()) - 1);
    if (engine.agents()[i].node != path[idx]) need_replan_ = true;
  }
}

// ---------------------------------------------------------------------------
// ActorController
// ---------------------------------------------------------------------------

ActorController::ActorController(const PolicyNet& net, const ParameterStore& params, bool greedy,
                                 std::uint64_t sample_seed, AblationFlags flags)
    : net_(net), params_(params), greedy_(greedy), rng_(sample_seed ? sample_seed : 1),
      flags_(flags) {}

void ActorController::reset(const Engine& engine) {
  memories_.assign(engine.agents().size(), PolicyMemory{});
  last_options_.assign(engine.agents().size(), Option::Navigate);
}

JointAction ActorController::propose(Engine& engine) {
  const int n = static_cast<int>(engine.agents().size());
  if (static_cast<int>(memories_.size()) != n) reset(engine);

  JointAction act;
  std::vector<int> opt_codes(n, 0), term_codes(n, 0);
  for (int i = 0; i < n; ++i) {
    memories_[i].stage = engine.agents()[i].stage;
    const AgentObservation obs = engine.observe_agent(i);

    if (flags_.without_option) {
      // Option machinery bypassed: always Navigate, no termination head.
      EncodeCache enc;
      const DenseMatrix H = policy_encode(net_, params_, obs, enc);
      WaypointCache wc;
      const std::vector<double> probs = waypoint_policy(
          net_, params_, H, obs.current_node_index, Option::Navigate, obs.neighbor_rows(), wc);
      int choice = 0;
      if (greedy_) {
        for (size_t j = 1; j < probs.size(); ++j) {
          if (probs[j] > probs[choice]) choice = static_cast<int>(j);
        }
      } else {
        const double u = rng_.next_real();
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
      act.next_node.push_back(obs.neighbor_ids[choice]);
      last_options_[i] = Option::Navigate;
      continue;
    }

    const PolicyOutput out =
        orion::act(net_, params_, obs, memories_[i], greedy_ ? nullptr : &rng_, greedy_);
    act.next_node.push_back(out.waypoint);
    opt_codes[i] = static_cast<int>(out.option);
    term_codes[i] = out.terminated ? 1 : 0;
    last_options_[i] = out.option;
  }
  engine.annotate_step(opt_codes, term_codes);
  return act;
}

void ActorController::post_step(const Engine& engine, const StepOutcome& outcome) {
  (void)outcome;
  for (size_t i = 0; i < memories_.size(); ++i) {
    memories_[i].z_prev = last_options_[i];
    memories_[i].stage = engine.agents()[i].stage;
  }
}

}  // namespace orion
