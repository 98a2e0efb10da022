#include "orion/sensing.hpp"

namespace orion {

int sensing_disk_cell_count(const SensorConfig& sensor, double resolution) {
  return static_cast<int>(disk_offsets(sensor.r_fov, resolution).size());
}

std::vector<Observation> sense(const OccupancyGrid& gt, Cell position, const SensorConfig& sensor) {
  if (!gt.in_bounds(position)) throw InvalidPoseError("sense position outside grid");
  if (gt.at(position) == CellState::Occupied) {
    throw InvalidPoseError("sense position is Occupied in ground truth");
  }

  auto blocked = [&gt](Cell c) {
    return !gt.in_bounds(c) || gt.at(c) == CellState::Occupied;
  };

  std::vector<Observation> out;
  for (const Cell& off : disk_offsets(sensor.r_fov, gt.resolution)) {
    const Cell c{position.x + off.x, position.y + off.y};
    if (!gt.in_bounds(c)) continue;
    if (line_of_sight(position, c, blocked)) out.push_back({c, gt.at(c)});
  }
  return out;
}

}  // namespace orion
