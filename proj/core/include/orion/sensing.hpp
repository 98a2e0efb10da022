#pragma once

#include <vector>

#include "orion/belief.hpp"
#include "orion/geometry.hpp"
#include "orion/grid.hpp"

namespace orion {

struct SensorConfig {
  double r_fov = 8.0;  // meters
};

// Number of cells in the sensing disk, the fixed normalization constant for
// utility counts.
int sensing_disk_cell_count(const SensorConfig& sensor, double resolution);

// Reveals every cell within r_fov of `position` that has an unobstructed
// supercover line of sight on the ground truth. Occupied cells are visible
// but hide everything behind them. The agent's own cell is always included.
// Throws InvalidPoseError when `position` is Occupied in gt.
std::vector<Observation> sense(const OccupancyGrid& gt, Cell position, const SensorConfig& sensor);

}  // namespace orion
