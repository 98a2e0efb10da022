#pragma once

#include <functional>
#include <string>
#include <vector>

#include "orion/geometry.hpp"
#include "orion/grid.hpp"

namespace orion {

struct GraphConfig {
  double node_spacing = 2.0;  // meters between lattice nodes
  int k_max = 8;              // neighbor cap per node
  double r_b = 6.0;           // beacon clustering radius, meters
};

// Node ids are global lattice indices (row-major over the sampling lattice),
// so the same physical location keeps its id across the combined, current and
// planning graphs.
struct NavNode {
  int id = -1;
  Point position;
  Cell cell;
};

class NavGraph {
 public:
  NavGraph() = default;
  NavGraph(std::vector<NavNode> nodes, int k_max);

  const std::vector<NavNode>& nodes() const { return nodes_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  // List index of a node id, -1 when absent.
  int index_of(int node_id) const;
  bool contains(int node_id) const { return index_of(node_id) >= 0; }
  const NavNode& node_by_id(int node_id) const;
  int k_max() const { return k_max_; }

  // Adjacency by list index: (neighbor index, edge length in meters).
  const std::vector<std::pair<int, double>>& adjacency(int index) const {
    return adjacency_[index];
  }
  void add_edge(int index_a, int index_b, double weight);
  bool has_edge_ids(int id_a, int id_b) const;
  int degree(int index) const { return static_cast<int>(adjacency_[index].size()); }
  int edge_count() const;

  std::string to_json() const;

 private:
  std::vector<NavNode> nodes_;
  std::vector<std::vector<std::pair<int, double>>> adjacency_;
  std::vector<int> id_to_index_;  // dense lookup, -1 when absent
  int k_max_ = 0;
};

// Lattice cells for a map; pitch derived from node_spacing. Exposed so other
// modules can reuse the exact same lattice.
struct Lattice {
  int pitch = 1;   // cells between nodes
  int offset = 0;  // cell offset of the first lattice row/column
  int cols = 0;
  int rows = 0;

  int id_of(int lx, int ly) const { return ly * cols + lx; }
  Cell cell_of_lattice(int lx, int ly) const {
    return {offset + lx * pitch, offset + ly * pitch};
  }
  // Lattice index of a cell, or -1 when the cell is not a lattice point.
  int id_of_cell(Cell c) const;
};

Lattice make_lattice(const OccupancyGrid& map, const GraphConfig& cfg);

// Nodes at lattice points whose cell is Free (plus Unknown when requested),
// ids in row-major lattice order.
std::vector<NavNode> sample_nodes(const OccupancyGrid& map, const GraphConfig& cfg,
                                  bool include_unknown);

// Connects each node to its nearest mutually-chosen neighbors whose straight
// segment crosses only cells accepted by `traversable`. Degree <= k_max.
NavGraph build_edges(std::vector<NavNode> nodes, const OccupancyGrid& map, const GraphConfig& cfg,
                     const std::function<bool(CellState)>& traversable);

struct ShortestPaths {
  std::vector<double> dist;    // by list index, infinity when unreachable
  std::vector<int> parent;     // by list index, -1 for source/unreachable
  int source_index = -1;

  // Path of node ids from source to target list index; empty when unreachable.
  std::vector<int> path_ids(const NavGraph& g, int target_index) const;
};

// Exact Dijkstra; ties broken toward the smaller node id so parents are
// deterministic. Throws InvalidNodeError for unknown source ids.
ShortestPaths dijkstra(const NavGraph& graph, int source_id);

}  // namespace orion
