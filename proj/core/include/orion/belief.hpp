#pragma once

#include <set>
#include <utility>
#include <vector>

#include "orion/grid.hpp"

namespace orion {

using Observation = std::pair<Cell, CellState>;

// Shared team belief: prior map M-, online map M (starts all Unknown) and the
// combined map M^ (prior overridden cell-by-cell by observations). Frontier
// sets are maintained incrementally as observations land.
class BeliefState {
 public:
  BeliefState() = default;
  explicit BeliefState(const OccupancyGrid& prior);

  const OccupancyGrid& prior() const { return prior_; }
  const OccupancyGrid& current() const { return current_; }
  const OccupancyGrid& combined() const { return combined_; }
  bool verified(Cell c) const { return verified_[combined_.index(c)]; }
  int width() const { return combined_.width; }
  int height() const { return combined_.height; }
  double resolution() const { return combined_.resolution; }

  // Applies authoritative observations. Returns the cells whose combined
  // value actually changed. Idempotent for repeated identical observations.
  std::vector<Cell> apply(const std::vector<Observation>& observations);

  // Free cells of the combined map 4-adjacent to an unverified Occupied cell.
  const std::set<Cell>& prior_frontiers() const { return prior_frontiers_; }
  // Free cells of the current map 4-adjacent to an Unknown cell.
  const std::set<Cell>& current_frontiers() const { return current_frontiers_; }

  bool fully_verified() const;

 private:
  void refresh_frontiers_around(Cell c);
  bool is_prior_frontier(Cell c) const;
  bool is_current_frontier(Cell c) const;

  OccupancyGrid prior_;
  OccupancyGrid current_;
  OccupancyGrid combined_;
  std::vector<char> verified_;
  std::set<Cell> prior_frontiers_;
  std::set<Cell> current_frontiers_;
};

// Full-grid rescans of the frontier definitions; the oracle counterpart of
// the incremental sets above.
std::set<Cell> rescan_prior_frontiers(const BeliefState& b);
std::set<Cell> rescan_current_frontiers(const BeliefState& b);

}  // namespace orion
