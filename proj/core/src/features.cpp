#include "orion/features.hpp"

#include <algorithm>

namespace orion {

namespace {

bool cell_in_range(Cell a, Cell b, double r_fov, double res) {
  const double dx = (a.x - b.x) * res;
  const double dy = (a.y - b.y) * res;
  return dx * dx + dy * dy <= r_fov * r_fov;
}

}  // namespace

UtilityColumns compute_utilities(const BeliefState& belief, const NavGraph& graph,
                                 const SensorConfig& sensor) {
  const double res = belief.resolution();
  const double norm = std::max(1, sensing_disk_cell_count(sensor, res));
  UtilityColumns out;
  out.prior_utility.assign(graph.size(), 0.0);
  out.utility.assign(graph.size(), 0.0);

  const OccupancyGrid& combined = belief.combined();
  const OccupancyGrid& current = belief.current();
  auto combined_blocked = [&combined](Cell c) {
    return !combined.in_bounds(c) || combined.at(c) == CellState::Occupied;
  };
  auto current_blocked = [&current](Cell c) {
    return !current.in_bounds(c) || current.at(c) == CellState::Occupied;
  };

  for (int i = 0; i < graph.size(); ++i) {
    const Cell nc = graph.nodes()[i].cell;
    int prior_count = 0;
    for (const Cell& f : belief.prior_frontiers()) {
      if (cell_in_range(nc, f, sensor.r_fov, res) && line_of_sight(nc, f, combined_blocked)) {
        ++prior_count;
      }
    }
    int cur_count = 0;
    for (const Cell& f : belief.current_frontiers()) {
      if (cell_in_range(nc, f, sensor.r_fov, res) && line_of_sight(nc, f, current_blocked)) {
        ++cur_count;
      }
    }
    out.prior_utility[i] = prior_count / norm;
    out.utility[i] = cur_count / norm;
  }
  return out;
}

DenseMatrix compute_node_features(const BeliefState& belief, const NavGraph& graph,
                                  const NavGraph& plan_graph, const AgentState& agent,
                                  const std::vector<AgentState>& team, const SensorConfig& sensor,
                                  const std::vector<Beacon>& beacons,
                                  const UtilityColumns* utilities) {
  const int n = graph.size();
  for (const NavNode& node : graph.nodes()) {
    if (!belief.combined().in_bounds(node.cell)) {
      throw InconsistentStateError("graph node outside belief grid");
    }
  }

  UtilityColumns local;
  if (!utilities) {
    local = compute_utilities(belief, graph, sensor);
    utilities = &local;
  }
  if (static_cast<int>(utilities->utility.size()) != n) {
    throw InconsistentStateError("utility columns do not match graph size");
  }

  // Guidepost paths for this agent.
  std::set<int> nav_path;
  std::set<int> coop_path;
  if (plan_graph.contains(agent.node)) {
    const NavNode& target_node = graph.node_by_id(agent.target);
    nav_path = guidepost_nav(plan_graph, agent.node, target_node.position, agent.target, beacons);

    std::vector<Point> unverified_targets;
    for (const AgentState& a : team) {
      const NavNode& t = graph.node_by_id(a.target);
      if (!belief.verified(t.cell)) unverified_targets.push_back(t.position);
    }
    coop_path = guidepost_coop(plan_graph, agent.node, unverified_targets, nav_path, beacons);
  }

  const double extent_x = belief.width() * belief.resolution();
  const double extent_y = belief.height() * belief.resolution();

  DenseMatrix m(n, FeatureCol::Count);
  for (int i = 0; i < n; ++i) {
    const NavNode& node = graph.nodes()[i];
    m.at(i, FeatureCol::X) = node.position.x / extent_x;
    m.at(i, FeatureCol::Y) = node.position.y / extent_y;
    m.at(i, FeatureCol::PriorUtility) = utilities->prior_utility[i];
    m.at(i, FeatureCol::Utility) = utilities->utility[i];
    m.at(i, FeatureCol::Visited) = agent.visit_history.contains(node.id) ? 1.0 : 0.0;
    m.at(i, FeatureCol::Verified) = belief.verified(node.cell) ? 1.0 : 0.0;

    double occ = 0.0;
    double tgt = 0.0;
    for (const AgentState& a : team) {
      if (a.node == node.id && a.id != agent.id) occ = -1.0;
      if (a.target == node.id && a.id != agent.id && tgt == 0.0) tgt = -1.0;
    }
    if (agent.node == node.id) occ = 1.0;
    if (agent.target == node.id) tgt = 1.0;
    m.at(i, FeatureCol::Occupancy) = occ;
    m.at(i, FeatureCol::Target) = tgt;
    m.at(i, FeatureCol::GuideNav) = nav_path.contains(node.id) ? 1.0 : 0.0;
    m.at(i, FeatureCol::GuideCoop) = coop_path.contains(node.id) ? 1.0 : 0.0;
  }
  return m;
}

DenseMatrix attention_mask(const NavGraph& graph) {
  const int n = graph.size();
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) {
    m.at(i, i) = 1.0;
    for (const auto& [j, w] : graph.adjacency(i)) {
      m.at(i, j) = 1.0;
      m.at(j, i) = 1.0;
    }
  }
  return m;
}

std::vector<std::vector<int>> attention_lists(const NavGraph& graph) {
  std::vector<std::vector<int>> lists(graph.size());
  for (int i = 0; i < graph.size(); ++i) {
    lists[i].push_back(i);
    for (const auto& [j, w] : graph.adjacency(i)) lists[i].push_back(j);
    std::sort(lists[i].begin(), lists[i].end());
  }
  return lists;
}

std::vector<int> AgentObservation::neighbor_rows() const {
  std::vector<int> rows;
  for (int id : neighbor_ids) {
    int row = -1;
    for (size_t i = 0; i < node_ids.size(); ++i) {
      if (node_ids[i] == id) row = static_cast<int>(i);
    }
    if (row < 0) throw InconsistentStateError("neighbor id missing from observation");
    rows.push_back(row);
  }
  return rows;
}

DenseMatrix AgentObservation::attention_mask() const {
  const int n = static_cast<int>(attn_lists.size());
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j : attn_lists[i]) m.at(i, j) = 1.0;
  }
  return m;
}

AgentObservation observe(const BeliefState& belief, const NavGraph& graph,
                         const NavGraph& plan_graph, const AgentState& agent,
                         const std::vector<AgentState>& team, const SensorConfig& sensor,
                         const std::vector<Beacon>& beacons, const UtilityColumns* utilities) {
  AgentObservation obs;
  obs.combined_features =
      compute_node_features(belief, graph, plan_graph, agent, team, sensor, beacons, utilities);
  // The updated-map view never sees prior-derived information.
  obs.current_features = obs.combined_features;
  for (int i = 0; i < obs.current_features.rows; ++i) {
    obs.current_features.at(i, FeatureCol::PriorUtility) = 0.0;
  }
  obs.attn_lists = attention_lists(graph);
  obs.node_ids.reserve(graph.size());
  for (const NavNode& n : graph.nodes()) obs.node_ids.push_back(n.id);

  obs.current_node_index = graph.index_of(agent.node);
  if (obs.current_node_index < 0) {
    throw InconsistentStateError("agent node missing from graph");
  }
  obs.neighbor_ids.push_back(agent.node);
  for (const auto& [j, w] : graph.adjacency(obs.current_node_index)) {
    obs.neighbor_ids.push_back(graph.nodes()[j].id);
  }
  std::sort(obs.neighbor_ids.begin(), obs.neighbor_ids.end());
  return obs;
}

std::vector<std::pair<int, Point>> beacon_candidates(const NavGraph& graph,
                                                     const UtilityColumns& utilities) {
  std::vector<std::pair<int, Point>> out;
  for (int i = 0; i < graph.size(); ++i) {
    if (utilities.prior_utility[i] > 0.0 || utilities.utility[i] > 0.0) {
      out.push_back({graph.nodes()[i].id, graph.nodes()[i].position});
    }
  }
  return out;
}

}  // namespace orion
