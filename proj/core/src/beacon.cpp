#include "orion/beacon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace orion {

std::vector<Beacon> cluster_beacons(const std::vector<std::pair<int, Point>>& candidates,
                                    double r_b) {
  std::vector<std::pair<int, Point>> sorted = candidates;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<Beacon> beacons;
  std::vector<char> assigned(sorted.size(), 0);
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (assigned[i]) continue;
    Beacon b;
    b.id = static_cast<int>(beacons.size());
    b.center_node_id = sorted[i].first;
    b.position = sorted[i].second;
    for (size_t j = i; j < sorted.size(); ++j) {
      if (assigned[j]) continue;
      if (distance(b.position, sorted[j].second) <= r_b) {
        assigned[j] = 1;
        b.member_nodes.insert(sorted[j].first);
      }
    }
    beacons.push_back(std::move(b));
  }
  return beacons;
}

namespace {

// Beacons ordered by distance to a reference point, ties toward lower id.
std::vector<const Beacon*> beacons_by_distance(const std::vector<Beacon>& beacons, Point ref) {
  std::vector<const Beacon*> order;
  order.reserve(beacons.size());
  for (const Beacon& b : beacons) order.push_back(&b);
  std::sort(order.begin(), order.end(), [&](const Beacon* a, const Beacon* b) {
    const double da = distance(a->position, ref);
    const double db = distance(b->position, ref);
    if (da != db) return da < db;
    return a->id < b->id;
  });
  return order;
}

std::set<int> path_to(const NavGraph& g, const ShortestPaths& sp, int target_id) {
  const int idx = g.index_of(target_id);
  if (idx < 0) return {};
  const std::vector<int> ids = sp.path_ids(g, idx);
  return {ids.begin(), ids.end()};
}

}  // namespace

std::set<int> guidepost_nav(const NavGraph& plan_graph, int from_id, Point target_position,
                            int target_node_id, const std::vector<Beacon>& beacons) {
  const ShortestPaths sp = dijkstra(plan_graph, from_id);

  const std::set<int> direct = path_to(plan_graph, sp, target_node_id);
  if (!direct.empty()) return direct;

  for (const Beacon* b : beacons_by_distance(beacons, target_position)) {
    const std::set<int> path = path_to(plan_graph, sp, b->center_node_id);
    if (!path.empty()) return path;
  }
  return {};
}

std::set<int> guidepost_coop(const NavGraph& plan_graph, int from_id,
                             const std::vector<Point>& unverified_targets,
                             const std::set<int>& own_nav, const std::vector<Beacon>& beacons) {
  if (unverified_targets.empty()) return own_nav;

  const Point from_pos = plan_graph.node_by_id(from_id).position;
  Point closest = unverified_targets.front();
  double best = std::numeric_limits<double>::infinity();
  for (const Point& t : unverified_targets) {
    const double d = distance(from_pos, t);
    if (d < best) {
      best = d;
      closest = t;
    }
  }

  const ShortestPaths sp = dijkstra(plan_graph, from_id);
  for (const Beacon* b : beacons_by_distance(beacons, closest)) {
    const std::set<int> path = path_to(plan_graph, sp, b->center_node_id);
    if (!path.empty()) return path;
  }
  return {};
}

}  // namespace orion
