#include "orion/navgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <json.hpp>

namespace orion {

NavGraph::NavGraph(std::vector<NavNode> nodes, int k_max)
    : nodes_(std::move(nodes)), adjacency_(nodes_.size()), k_max_(k_max) {
  int max_id = -1;
  for (const NavNode& n : nodes_) max_id = std::max(max_id, n.id);
  id_to_index_.assign(max_id + 1, -1);
  for (size_t i = 0; i < nodes_.size(); ++i) id_to_index_[nodes_[i].id] = static_cast<int>(i);
}

int NavGraph::index_of(int node_id) const {
  if (node_id < 0 || node_id >= static_cast<int>(id_to_index_.size())) return -1;
  return id_to_index_[node_id];
}

const NavNode& NavGraph::node_by_id(int node_id) const {
  const int idx = index_of(node_id);
  if (idx < 0) throw InvalidNodeError("unknown node id " + std::to_string(node_id));
  return nodes_[idx];
}

void NavGraph::add_edge(int index_a, int index_b, double weight) {
  adjacency_[index_a].push_back({index_b, weight});
  adjacency_[index_b].push_back({index_a, weight});
}

bool NavGraph::has_edge_ids(int id_a, int id_b) const {
  const int ia = index_of(id_a);
  const int ib = index_of(id_b);
  if (ia < 0 || ib < 0) return false;
  for (const auto& [j, w] : adjacency_[ia]) {
    if (j == ib) return true;
  }
  return false;
}

int NavGraph::edge_count() const {
  int total = 0;
  for (const auto& adj : adjacency_) total += static_cast<int>(adj.size());
  return total / 2;
}

std::string NavGraph::to_json() const {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const NavNode& n : nodes_) {
    j["nodes"].push_back({{"id", n.id}, {"x", n.position.x}, {"y", n.position.y}});
  }
  j["edges"] = nlohmann::json::array();
  for (size_t i = 0; i < nodes_.size(); ++i) {
    for (const auto& [k, w] : adjacency_[i]) {
      if (static_cast<int>(i) < k) {
        j["edges"].push_back({{"a", nodes_[i].id}, {"b", nodes_[k].id}, {"w", w}});
      }
    }
  }
  return j.dump();
}

int Lattice::id_of_cell(Cell c) const {
  const int rx = c.x - offset;
  const int ry = c.y - offset;
  if (rx < 0 || ry < 0 || rx % pitch != 0 || ry % pitch != 0) return -1;
  const int lx = rx / pitch;
  const int ly = ry / pitch;
  if (lx >= cols || ly >= rows) return -1;
  return id_of(lx, ly);
}

Lattice make_lattice(const OccupancyGrid& map, const GraphConfig& cfg) {
  Lattice lat;
  lat.pitch = std::max(1, static_cast<int>(std::lround(cfg.node_spacing / map.resolution)));
  lat.offset = lat.pitch / 2;
  lat.cols = (map.width - lat.offset + lat.pitch - 1) / lat.pitch;
  lat.rows = (map.height - lat.offset + lat.pitch - 1) / lat.pitch;
  return lat;
}

std::vector<NavNode> sample_nodes(const OccupancyGrid& map, const GraphConfig& cfg,
                                  bool include_unknown) {
  const Lattice lat = make_lattice(map, cfg);
  std::vector<NavNode> nodes;
  for (int ly = 0; ly < lat.rows; ++ly) {
    for (int lx = 0; lx < lat.cols; ++lx) {
      const Cell c = lat.cell_of_lattice(lx, ly);
      if (!map.in_bounds(c)) continue;
      const CellState s = map.at(c);
      if (s == CellState::Free || (include_unknown && s == CellState::Unknown)) {
        nodes.push_back({lat.id_of(lx, ly), map.center(c), c});
      }
    }
  }
  return nodes;
}

NavGraph build_edges(std::vector<NavNode> nodes, const OccupancyGrid& map, const GraphConfig& cfg,
                     const std::function<bool(CellState)>& traversable) {
  std::sort(nodes.begin(), nodes.end(), [](const NavNode& a, const NavNode& b) {
    return a.id < b.id;
  });
  NavGraph g(std::move(nodes), cfg.k_max);
  const auto& ns = g.nodes();
  const int n = g.size();

  auto blocked = [&](Cell c) { return !map.in_bounds(c) || !traversable(map.at(c)); };

  // For each node, its k_max nearest collision-free neighbors (squared cell
  // distance, then id, for exact deterministic ordering).
  std::vector<std::vector<int>> chosen(n);
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<long long, int>> order;
    order.reserve(n - 1);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const long long dx = ns[i].cell.x - ns[j].cell.x;
      const long long dy = ns[i].cell.y - ns[j].cell.y;
      order.push_back({dx * dx + dy * dy, ns[j].id});
    }
    std::sort(order.begin(), order.end());
    for (const auto& [d2, id] : order) {
      if (static_cast<int>(chosen[i].size()) >= cfg.k_max) break;
      const int j = g.index_of(id);
      if (line_of_sight(ns[i].cell, ns[j].cell, blocked) && !blocked(ns[i].cell) &&
          !blocked(ns[j].cell)) {
        chosen[i].push_back(j);
      }
    }
  }

  // Mutual selection keeps every degree within k_max.
  for (int i = 0; i < n; ++i) {
    for (int j : chosen[i]) {
      if (j > i && std::find(chosen[j].begin(), chosen[j].end(), i) != chosen[j].end()) {
        g.add_edge(i, j, distance(ns[i].position, ns[j].position));
      }
    }
  }
  return g;
}

ShortestPaths dijkstra(const NavGraph& graph, int source_id) {
  const int src = graph.index_of(source_id);
  if (src < 0) throw InvalidNodeError("dijkstra: unknown source id " + std::to_string(source_id));

  const int n = graph.size();
  ShortestPaths sp;
  sp.source_index = src;
  sp.dist.assign(n, std::numeric_limits<double>::infinity());
  sp.parent.assign(n, -1);
  sp.dist[src] = 0.0;

  // (distance, node id, list index); the id in the key makes pop order and
  // therefore parents deterministic under ties.
  using Entry = std::tuple<double, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  pq.push({0.0, graph.nodes()[src].id, src});
  std::vector<char> done(n, 0);

  while (!pq.empty()) {
    const auto [d, id, u] = pq.top();
    pq.pop();
    if (done[u]) continue;
    done[u] = 1;
    for (const auto& [v, w] : graph.adjacency(u)) {
      if (done[v]) continue;
      const double alt = d + w;
      if (alt < sp.dist[v] ||
          (alt == sp.dist[v] && sp.parent[v] >= 0 &&
           graph.nodes()[u].id < graph.nodes()[sp.parent[v]].id)) {
        sp.dist[v] = alt;
        sp.parent[v] = u;
        pq.push({alt, graph.nodes()[v].id, v});
      }
    }
  }
  return sp;
}

std::vector<int> ShortestPaths::path_ids(const NavGraph& g, int target_index) const {
  std::vector<int> out;
  if (target_index < 0 || !std::isfinite(dist[target_index])) return out;
  int cur = target_index;
  while (cur >= 0) {
    out.push_back(g.nodes()[cur].id);
    if (cur == source_index) break;
    cur = parent[cur];
  }
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace orion
