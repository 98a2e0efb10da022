#pragma once

#include <vector>

#include "orion/agent.hpp"
#include "orion/beacon.hpp"
#include "orion/belief.hpp"
#include "orion/matrix.hpp"
#include "orion/navgraph.hpp"
#include "orion/sensing.hpp"

namespace orion {

// Node feature columns, fixed width 10.
struct FeatureCol {
  enum : int {
    X = 0,
    Y,
    PriorUtility,
    Utility,
    Visited,
    Verified,
    Occupancy,
    Target,
    GuideNav,
    GuideCoop,
    Count
  };
};

// Shared per-step utility columns (identical for every agent): counts of
// visible prior/current frontiers per node, normalized by the sensing disk
// size. Prior utility looks at the combined map, utility at the current map.
struct UtilityColumns {
  std::vector<double> prior_utility;
  std::vector<double> utility;
};

UtilityColumns compute_utilities(const BeliefState& belief, const NavGraph& graph,
                                 const SensorConfig& sensor);

// The full n x 10 matrix for one agent's view over the shared node set.
// Passing precomputed `utilities` skips the expensive visibility counts.
DenseMatrix compute_node_features(const BeliefState& belief, const NavGraph& graph,
                                  const NavGraph& plan_graph, const AgentState& agent,
                                  const std::vector<AgentState>& team, const SensorConfig& sensor,
                                  const std::vector<Beacon>& beacons,
                                  const UtilityColumns* utilities = nullptr);

// Dense binary mask from graph edges: mask[i][j] = 1 iff i == j or (i,j) is
// an edge.
DenseMatrix attention_mask(const NavGraph& graph);
// The same mask as per-row index lists (what the attention layers consume).
std::vector<std::vector<int>> attention_lists(const NavGraph& graph);

struct AgentObservation {
  DenseMatrix current_features;   // online-map view: prior utility zeroed
  DenseMatrix combined_features;  // full belief view
  std::vector<std::vector<int>> attn_lists;
  std::vector<int> node_ids;      // row index -> node id
  std::vector<int> neighbor_ids;  // agent's graph neighbors plus itself, sorted
  int current_node_index = -1;

  DenseMatrix attention_mask() const;
  // Row indices of neighbor_ids within the node set.
  std::vector<int> neighbor_rows() const;
};

// Assembles one agent's observation. The updated-map view reuses the shared
// node set; nodes outside the current map are flagged by Verified == 0 and
// the prior-utility column is zeroed there since it is not derivable from M.
AgentObservation observe(const BeliefState& belief, const NavGraph& graph,
                         const NavGraph& plan_graph, const AgentState& agent,
                         const std::vector<AgentState>& team, const SensorConfig& sensor,
                         const std::vector<Beacon>& beacons,
                         const UtilityColumns* utilities = nullptr);

// Beacon candidates: nodes with nonzero (prior or current) utility.
std::vector<std::pair<int, Point>> beacon_candidates(const NavGraph& graph,
                                                     const UtilityColumns& utilities);

}  // namespace orion
