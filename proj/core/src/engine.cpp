#include "orion/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <chrono>

#include <json.hpp>

namespace orion {

namespace {

const auto traversable_combined = [](CellState s) { return s == CellState::Free; };
const auto traversable_plan = [](CellState s) { return s != CellState::Occupied; };

}  // namespace

namespace {

// Connected components of a nav graph, by node list index.
std::vector<int> graph_components(const NavGraph& g) {
  std::vector<int> comp(g.size(), -1);
  int id = 0;
  std::vector<int> stack;
  for (int s = 0; s < g.size(); ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = id;
    stack.push_back(s);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& [v, w] : g.adjacency(u)) {
        if (comp[v] < 0) {
          comp[v] = id;
          stack.push_back(v);
        }
      }
    }
    ++id;
  }
  return comp;
}

}  // namespace

Engine::Engine(std::uint64_t seed, const EngineConfig& cfg) : cfg_(cfg), seed_(seed) {
  if (cfg.n_agents < 1) throw SetupError("need at least one agent");

  Rng rng(seed);
  Rng world_rng(cfg.world_seed ? cfg.world_seed : seed);
  gt_ = generate_maze_map(world_rng.fork(1).next_u64(), cfg.map.width, cfg.map.height,
                          cfg.map.corridor_width, cfg.map.obstacle_density);

  // Starts and targets live in the largest connected component of the
  // ground-truth nav graph (map connectivity does not imply graph
  // connectivity at coarse lattice pitch). After discrepancy injection every
  // start-target pair must also be connected on the prior graph, otherwise
  // the episode would be unsolvable for belief-bound planners; retry the
  // injection with derived seeds until that holds.
  const NavGraph gt_graph = build_edges(sample_nodes(gt_, cfg.graph, false), gt_, cfg.graph,
                                        [](CellState s) { return s == CellState::Free; });
  const std::vector<int> comp = graph_components(gt_graph);
  std::vector<int> comp_sizes;
  for (int c : comp) {
    if (c >= static_cast<int>(comp_sizes.size())) comp_sizes.resize(c + 1, 0);
    ++comp_sizes[c];
  }
  int main_comp = 0;
  for (size_t c = 1; c < comp_sizes.size(); ++c) {
    if (comp_sizes[c] > comp_sizes[main_comp]) main_comp = static_cast<int>(c);
  }
  std::vector<NavNode> pool;
  for (int i = 0; i < gt_graph.size(); ++i) {
    if (comp[i] == main_comp) pool.push_back(gt_graph.nodes()[i]);
  }
  if (static_cast<int>(pool.size()) < 2 * cfg.n_agents) {
    throw SetupError("not enough connected free lattice nodes for starts and targets");
  }

  const int max_attempts = 20;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<NavNode> shuffled = pool;
    Rng pick = (cfg.fixed_missions && cfg.world_seed) ? world_rng.fork(2 + attempt)
                                                      : rng.fork(2 + attempt);
    for (size_t i = shuffled.size(); i > 1; --i) {
      std::swap(shuffled[i - 1], shuffled[pick.next_below(i)]);
    }
    std::vector<Cell> starts, targets;
    std::set<Cell> protected_cells;
    for (int i = 0; i < cfg.n_agents; ++i) {
      starts.push_back(shuffled[2 * i].cell);
      targets.push_back(shuffled[2 * i + 1].cell);
      protected_cells.insert(shuffled[2 * i].cell);
      protected_cells.insert(shuffled[2 * i + 1].cell);
    }

    DiscrepancyConfig dc = cfg.discrepancies;
    dc.seed = world_rng.fork(100 + attempt).next_u64();
    OccupancyGrid prior;
    try {
      prior = inject_discrepancies(gt_, dc, protected_cells);
    } catch (const PlacementError&) {
      if (attempt + 1 == max_attempts) throw;
      continue;
    }

    const NavGraph prior_graph =
        build_edges(sample_nodes(prior, cfg.graph, false), prior, cfg.graph,
                    [](CellState s) { return s == CellState::Free; });
    const std::vector<int> pcomp = graph_components(prior_graph);
    const Lattice lat = make_lattice(gt_, cfg_.graph);
    bool solvable = true;
    for (int i = 0; i < cfg.n_agents && solvable; ++i) {
      const int a = prior_graph.index_of(lat.id_of_cell(starts[i]));
      const int b = prior_graph.index_of(lat.id_of_cell(targets[i]));
      solvable = a >= 0 && b >= 0 && pcomp[a] == pcomp[b];
    }
    if (!solvable) {
      if (attempt + 1 == max_attempts) {
        throw SetupError("could not build a solvable episode for seed " + std::to_string(seed));
      }
      continue;
    }
    init_from_world(prior, starts, targets);
    return;
  }
  throw SetupError("could not build a solvable episode for seed " + std::to_string(seed));
}

Engine::Engine(OccupancyGrid gt, const OccupancyGrid& prior, const std::vector<Cell>& starts,
               const std::vector<Cell>& targets, const EngineConfig& cfg, std::uint64_t log_seed)
    : cfg_(cfg), seed_(log_seed), gt_(std::move(gt)) {
  if (starts.empty() || starts.size() != targets.size()) {
    throw SetupError("starts and targets must be non-empty and match");
  }
  cfg_.n_agents = static_cast<int>(starts.size());
  cfg_.map.width = gt_.width;
  cfg_.map.height = gt_.height;
  init_from_world(prior, starts, targets);
}

void Engine::init_from_world(const OccupancyGrid& prior, const std::vector<Cell>& starts,
                             const std::vector<Cell>& targets) {
  const Lattice lat = make_lattice(gt_, cfg_.graph);
  agents_.resize(cfg_.n_agents);
  std::set<Cell> seen;
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const int sid = lat.id_of_cell(starts[i]);
    const int tid = lat.id_of_cell(targets[i]);
    if (sid < 0 || tid < 0) throw SetupError("start/target not on the sampling lattice");
    if (gt_.at(starts[i]) != CellState::Free || gt_.at(targets[i]) != CellState::Free ||
        prior.at(starts[i]) != CellState::Free || prior.at(targets[i]) != CellState::Free) {
      throw SetupError("start/target cell not Free in both maps");
    }
    if (!seen.insert(starts[i]).second || !seen.insert(targets[i]).second) {
      throw SetupError("starts and targets must be pairwise distinct");
    }
    agents_[i].id = i;
    agents_[i].node = sid;
    agents_[i].target = tid;
    agents_[i].visit_history.insert(sid);
  }

  belief_ = BeliefState(prior);
  std::vector<Observation> all;
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const auto obs = sense(gt_, starts[i], cfg_.sensor);
    all.insert(all.end(), obs.begin(), obs.end());
  }
  belief_.apply(all);
  rebuild_graphs(true, true);

  log_.seed = seed_;
  log_.n_agents = cfg_.n_agents;
  log_.width = gt_.width;
  log_.height = gt_.height;
  for (const AgentState& a : agents_) {
    log_.start_nodes.push_back(a.node);
    log_.target_nodes.push_back(a.target);
  }
}

void Engine::rebuild_graphs(bool combined_changed, bool current_changed) {
  const auto t0 = std::chrono::steady_clock::now();
  if (combined_changed) {
    graph_ = build_edges(sample_nodes(belief_.combined(), cfg_.graph, false), belief_.combined(),
                         cfg_.graph, traversable_combined);
  }
  if (current_changed) {
    plan_graph_ = build_edges(sample_nodes(belief_.current(), cfg_.graph, true), belief_.current(),
                              cfg_.graph, traversable_plan);
  }
  utilities_ = compute_utilities(belief_, graph_, cfg_.sensor);
  beacons_ = cluster_beacons(beacon_candidates(graph_, utilities_), cfg_.graph.r_b);
  last_rebuild_seconds_ =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

AgentObservation Engine::observe_agent(int agent_index) const {
  return observe(belief_, graph_, plan_graph_, agents_[agent_index], agents_, cfg_.sensor,
                 beacons_, &utilities_);
}

JointAction Engine::resolve_conflicts(const JointAction& proposal) const {
  const int n = cfg_.n_agents;
  if (static_cast<int>(proposal.next_node.size()) != n) {
    throw ContractViolation("proposal size does not match team size");
  }
  JointAction r = proposal;
  for (int i = 0; i < n; ++i) {
    const int dest = r.next_node[i];
    if (dest != agents_[i].node) {
      const int cur_idx = graph_.index_of(agents_[i].node);
      bool neighbor = false;
      if (cur_idx >= 0) {
        for (const auto& [j, w] : graph_.adjacency(cur_idx)) {
          neighbor |= graph_.nodes()[j].id == dest;
        }
      }
      if (!neighbor) {
        throw ContractViolation("agent " + std::to_string(i) +
                                " proposed a non-neighbor node " + std::to_string(dest));
      }
    }
  }

  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = 0; i < n && !changed; ++i) {
      for (int j = i + 1; j < n && !changed; ++j) {
        const int di = r.next_node[i];
        const int dj = r.next_node[j];
        if (di == dj) {
          // Vertex conflict: a stayer keeps its node, otherwise lower id wins.
          int loser = j;
          if (dj == agents_[j].node) loser = i;
          r.next_node[loser] = agents_[loser].node;
          changed = true;
        } else if (di == agents_[j].node && dj == agents_[i].node) {
          // Edge swap: lower id moves.
          r.next_node[j] = agents_[j].node;
          changed = true;
        }
      }
    }
  }
  return r;
}

JointAction Engine::apply_dual_stage_constraint(const JointAction& proposal) const {
  JointAction out = proposal;
  for (int i = 0; i < cfg_.n_agents; ++i) {
    const AgentState& a = agents_[i];
    if (a.stage != Stage::PostArrival) continue;
    const bool may_roam = cfg_.dual_stage_enabled && dual_stage_gate(i);
    if (may_roam) continue;
    if (a.node == a.target) {
      // Departures need an open gate.
      out.next_node[i] = a.node;
    } else {
      // The return half of the bargain: once the gate closes, an off-target
      // helper heads home along the believed-shortest route.
      const int cur = graph_.index_of(a.node);
      const int tgt = graph_.index_of(a.target);
      if (cur >= 0 && tgt >= 0) {
        const ShortestPaths sp = dijkstra(graph_, a.node);
        const std::vector<int> path = sp.path_ids(graph_, tgt);
        if (path.size() >= 2) out.next_node[i] = path[1];
      }
    }
  }
  return out;
}

bool Engine::edge_blocked_in_truth(int from_id, int to_id, std::vector<Cell>* blockers) const {
  const Cell a = graph_.node_by_id(from_id).cell;
  const Cell b = graph_.node_by_id(to_id).cell;
  bool blocked = false;
  for (const Cell& c : supercover_cells(a, b)) {
    if (gt_.at(c) == CellState::Occupied) {
      blocked = true;
      if (blockers) blockers->push_back(c);
    }
  }
  return blocked;
}

StepOutcome Engine::step(const JointAction& resolved) {
  const int n = cfg_.n_agents;
  if (done_) throw ContractViolation("episode already finished");
  if (static_cast<int>(resolved.next_node.size()) != n) {
    throw ContractViolation("resolved action size does not match team size");
  }
  // Contract: the action must already be conflict-free.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (resolved.next_node[i] == resolved.next_node[j]) {
        throw ContractViolation("unresolved vertex conflict passed to step");
      }
      if (resolved.next_node[i] == agents_[j].node && resolved.next_node[j] == agents_[i].node) {
        throw ContractViolation("unresolved edge swap passed to step");
      }
    }
  }

  StepOutcome out;
  out.resolved_moves = resolved.next_node;
  out.rewards.assign(n, 0.0);

  // Execute movements; ground truth arbitrates traversal.
  std::vector<std::vector<Observation>> contact_obs(n);
  for (int i = 0; i < n; ++i) {
    AgentState& a = agents_[i];
    const int dest = out.resolved_moves[i];
    if (dest == a.node) continue;
    std::vector<Cell> blockers;
    if (edge_blocked_in_truth(a.node, dest, &blockers)) {
      for (const Cell& c : blockers) contact_obs[i].push_back({c, gt_.at(c)});
      out.conflicts_blocked.push_back({a.id, "edge blocked in ground truth"});
      out.resolved_moves[i] = a.node;
      continue;
    }
    const double len = distance(graph_.node_by_id(a.node).position,
                                graph_.node_by_id(dest).position);
    a.distance_traveled += len;
    a.node = dest;
    a.visit_history.insert(dest);
    out.rewards[i] -= cfg_.reward.step_cost_scale * (len / cfg_.graph.node_spacing);
  }

  // Shared sensing; frontier credit goes to the lowest-id observer.
  const std::set<Cell> frontier_before = belief_.prior_frontiers();
  const double disk_norm = std::max(1, sensing_disk_cell_count(cfg_.sensor, gt_.resolution));
  std::set<Cell> claimed;
  std::vector<Observation> merged;
  for (int i = 0; i < n; ++i) {
    std::vector<Observation> obs = contact_obs[i];
    const auto seen = sense(gt_, graph_.node_by_id(agents_[i].node).cell, cfg_.sensor);
    obs.insert(obs.end(), seen.begin(), seen.end());
    int credit = 0;
    for (const auto& [c, s] : obs) {
      if (!belief_.verified(c) && frontier_before.contains(c) && !claimed.contains(c)) {
        claimed.insert(c);
        ++credit;
      }
    }
    out.rewards[i] += cfg_.reward.frontier_bonus * (credit / disk_norm);
    merged.insert(merged.end(), obs.begin(), obs.end());
  }
  // Unique cells first verified this step; each also flips current-map state.
  {
    std::set<Cell> fresh;
    for (const auto& [c, s] : merged) {
      if (!belief_.verified(c)) fresh.insert(c);
    }
    out.new_observation_count = static_cast<int>(fresh.size());
  }
  const std::vector<Cell> combined_changes = belief_.apply(merged);
  out.combined_changed = !combined_changes.empty();
  out.current_changed = out.new_observation_count > 0;

  // Stage transitions and arrival bonuses.
  for (int i = 0; i < n; ++i) {
    AgentState& a = agents_[i];
    if (a.node == a.target && !a.arrived_step.has_value()) {
      a.arrived_step = step_count_;
      a.stage = Stage::PostArrival;
      out.rewards[i] += cfg_.reward.arrival_bonus;
    }
  }

  bool all_home = true;
  for (const AgentState& a : agents_) all_home &= a.node == a.target;
  out.done = all_home;
  if (all_home) {
    for (int i = 0; i < n; ++i) out.rewards[i] += cfg_.reward.team_done_bonus;
  }

  if (out.combined_changed || out.current_changed) {
    rebuild_graphs(out.combined_changed, out.current_changed);
  } else {
    // Utilities shift as frontier visibility changes even without map edits.
    utilities_ = compute_utilities(belief_, graph_, cfg_.sensor);
    beacons_ = cluster_beacons(beacon_candidates(graph_, utilities_), cfg_.graph.r_b);
  }

  StepRecord rec;
  rec.step = step_count_;
  for (const AgentState& a : agents_) rec.nodes.push_back(a.node);
  rec.options = pending_options_.empty() ? std::vector<int>(n, 0) : pending_options_;
  rec.terminations = pending_terminations_.empty() ? std::vector<int>(n, 0)
                                                   : pending_terminations_;
  rec.rewards = out.rewards;
  rec.observed_cells = out.new_observation_count;
  log_.records.push_back(std::move(rec));
  pending_options_.clear();
  pending_terminations_.clear();

  ++step_count_;
  done_ = out.done || step_count_ >= cfg_.step_cap;
  if (done_) finalize_log();
  return out;
}

void Engine::annotate_step(const std::vector<int>& options, const std::vector<int>& terminations) {
  pending_options_ = options;
  pending_terminations_ = terminations;
}

void Engine::finalize_log() {
  bool all_home = true;
  for (const AgentState& a : agents_) all_home &= a.node == a.target;

  EpisodeMetrics m;
  m.steps = step_count_;
  m.success = all_home;
  double sum = 0.0;
  m.max_dist = 0.0;
  m.min_dist = std::numeric_limits<double>::infinity();
  for (const AgentState& a : agents_) {
    sum += a.distance_traveled;
    m.max_dist = std::max(m.max_dist, a.distance_traveled);
    m.min_dist = std::min(m.min_dist, a.distance_traveled);
  }
  m.avg_dist = sum / cfg_.n_agents;
  log_.metrics = m;
  log_.finished = true;
}

std::vector<int> Engine::frontier_view_nodes() const {
  // Uncertain obstacle cells on the boundary: unverified Occupied next to a
  // prior frontier cell.
  std::set<Cell> uncertain;
  for (const Cell& f : belief_.prior_frontiers()) {
    const Cell nbrs[4] = {{f.x + 1, f.y}, {f.x - 1, f.y}, {f.x, f.y + 1}, {f.x, f.y - 1}};
    for (const Cell& n : nbrs) {
      if (belief_.combined().in_bounds(n) && belief_.combined().at(n) == CellState::Occupied &&
          !belief_.verified(n)) {
        uncertain.insert(n);
      }
    }
  }
  const OccupancyGrid& combined = belief_.combined();
  auto blocked = [&combined](Cell c) {
    return !combined.in_bounds(c) || combined.at(c) == CellState::Occupied;
  };
  const double r = cfg_.sensor.r_fov;
  std::vector<int> out;
  for (int i = 0; i < graph_.size(); ++i) {
    const Cell nc = graph_.nodes()[i].cell;
    for (const Cell& u : uncertain) {
      const double dx = (nc.x - u.x) * gt_.resolution;
      const double dy = (nc.y - u.y) * gt_.resolution;
      if (dx * dx + dy * dy > r * r) continue;
      if (line_of_sight(nc, u, blocked)) {
        out.push_back(graph_.nodes()[i].id);
        break;
      }
    }
  }
  return out;
}

bool Engine::dual_stage_gate(int agent_index) const {
  const AgentState& agent = agents_[agent_index];
  if (agent.stage != Stage::PostArrival) {
    throw ContractViolation("dual_stage_gate requires a post-arrival agent");
  }

  bool teammate_en_route = false;
  for (const AgentState& a : agents_) {
    if (a.id != agent.id && a.stage == Stage::PreArrival) teammate_en_route = true;
  }
  if (!teammate_en_route) return false;
  if (belief_.prior_frontiers().empty()) return false;
  if (!plan_graph_.contains(agent.node) || !plan_graph_.contains(agent.target)) return false;

  // Frontier candidates: nodes whose visit would verify uncertain cells.
  const std::vector<int> candidates = frontier_view_nodes();
  const ShortestPaths from_agent = dijkstra(plan_graph_, agent.node);
  int best_node = -1;
  double d1 = std::numeric_limits<double>::infinity();
  for (int id : candidates) {
    const int pi = plan_graph_.index_of(id);
    if (pi < 0) continue;
    if (from_agent.dist[pi] < d1) {
      d1 = from_agent.dist[pi];
      best_node = id;
    }
  }
  if (best_node < 0 || !std::isfinite(d1)) return false;

  const ShortestPaths from_frontier = dijkstra(plan_graph_, best_node);
  const double d2 = from_frontier.dist[plan_graph_.index_of(agent.target)];
  if (!std::isfinite(d2)) return false;

  double slowest = 0.0;
  for (const AgentState& a : agents_) {
    if (a.id == agent.id || a.stage != Stage::PreArrival) continue;
    const int ai = plan_graph_.index_of(a.node);
    const int ti = plan_graph_.index_of(a.target);
    if (ai < 0 || ti < 0) {
      slowest = std::numeric_limits<double>::infinity();
      continue;
    }
    const ShortestPaths sp = dijkstra(plan_graph_, a.node);
    slowest = std::max(slowest, sp.dist[ti]);
  }
  return d1 + d2 <= cfg_.kappa * slowest;
}

EpisodeMetrics compute_metrics(const EpisodeLog& log) { return log.metrics; }

std::string EpisodeLog::to_jsonl() const {
  std::ostringstream out;
  nlohmann::json header{{"type", "header"}, {"seed", seed},       {"n_agents", n_agents},
                        {"width", width},   {"height", height},   {"starts", start_nodes},
                        {"targets", target_nodes}};
  out << header.dump() << "\n";
  for (const StepRecord& r : records) {
    nlohmann::json rec{{"type", "step"},          {"step", r.step},
                       {"nodes", r.nodes},        {"options", r.options},
                       {"terminations", r.terminations}, {"rewards", r.rewards},
                       {"observed", r.observed_cells}};
    out << rec.dump() << "\n";
  }
  if (finished) {
    nlohmann::json end{{"type", "end"},
                       {"success", metrics.success},
                       {"steps", metrics.steps},
                       {"max_dist", metrics.max_dist},
                       {"avg_dist", metrics.avg_dist},
                       {"min_dist", metrics.min_dist}};
    out << end.dump() << "\n";
  }
  return out.str();
}

EpisodeLog EpisodeLog::from_jsonl(const std::string& text) {
  EpisodeLog log;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      log.seed = j.at("seed").get<std::uint64_t>();
      log.n_agents = j.at("n_agents").get<int>();
      log.width = j.at("width").get<int>();
      log.height = j.at("height").get<int>();
      log.start_nodes = j.at("starts").get<std::vector<int>>();
      log.target_nodes = j.at("targets").get<std::vector<int>>();
    } else if (type == "step") {
      StepRecord r;
      r.step = j.at("step").get<int>();
      r.nodes = j.at("nodes").get<std::vector<int>>();
      r.options = j.at("options").get<std::vector<int>>();
      r.terminations = j.at("terminations").get<std::vector<int>>();
      r.rewards = j.at("rewards").get<std::vector<double>>();
      r.observed_cells = j.at("observed").get<int>();
      log.records.push_back(std::move(r));
    } else if (type == "end") {
      log.metrics.success = j.at("success").get<bool>();
      log.metrics.steps = j.at("steps").get<int>();
      log.metrics.max_dist = j.at("max_dist").get<double>();
      log.metrics.avg_dist = j.at("avg_dist").get<double>();
      log.metrics.min_dist = j.at("min_dist").get<double>();
      log.finished = true;
    }
  }
  return log;
}

}  // namespace orion
