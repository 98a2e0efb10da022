#pragma once

#include <set>
#include <vector>

#include "orion/navgraph.hpp"

namespace orion {

struct Beacon {
  int id = -1;
  Point position;
  int center_node_id = -1;
  std::set<int> member_nodes;
};

// Greedy clustering: repeatedly take the lowest-id unassigned candidate as a
// beacon center and absorb every unassigned candidate within r_b of it.
std::vector<Beacon> cluster_beacons(const std::vector<std::pair<int, Point>>& candidates,
                                    double r_b);

// Dijkstra path on the planning graph toward the target when reachable,
// otherwise toward the beacon nearest the target position. Node-id set of the
// path; empty when neither is reachable.
std::set<int> guidepost_nav(const NavGraph& plan_graph, int from_id, Point target_position,
                            int target_node_id, const std::vector<Beacon>& beacons);

// Path toward the beacon nearest the closest unverified target; falls back to
// own_nav when no unverified targets remain.
std::set<int> guidepost_coop(const NavGraph& plan_graph, int from_id,
                             const std::vector<Point>& unverified_targets,
                             const std::set<int>& own_nav, const std::vector<Beacon>& beacons);

}  // namespace orion
