#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "orion/common.hpp"

namespace orion {

enum class CellState : std::uint8_t { Free = 0, Occupied = 1, Unknown = 2 };

char cell_char(CellState s);
CellState cell_from_char(char c);

// Row-major 2D occupancy lattice. Ground-truth maps never contain Unknown.
struct OccupancyGrid {
  int width = 0;
  int height = 0;
  double resolution = 1.0;  // meters per cell
  std::vector<CellState> cells;

  OccupancyGrid() = default;
  OccupancyGrid(int w, int h, double res, CellState fill);

  bool in_bounds(Cell c) const { return c.x >= 0 && c.x < width && c.y >= 0 && c.y < height; }
  int index(Cell c) const { return c.y * width + c.x; }
  Cell cell_of(int index) const { return {index % width, index / width}; }
  CellState at(Cell c) const { return cells[index(c)]; }
  CellState& at(Cell c) { return cells[index(c)]; }
  Point center(Cell c) const { return {(c.x + 0.5) * resolution, (c.y + 0.5) * resolution}; }

  int count(CellState s) const;

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;
};

// Returns the 4-connected Free components; component id per cell, -1 for
// non-Free. `component_count` receives the number of components.
std::vector<int> free_components(const OccupancyGrid& grid, int& component_count);

bool free_space_connected(const OccupancyGrid& grid);

// Map file format: a single-line JSON header {width,height,resolution,seed}
// followed by `height` rows of '.'/'#'/'?' characters. Round-trips bit-exactly.
std::string map_to_string(const OccupancyGrid& grid, std::uint64_t seed);
struct MapFile {
  OccupancyGrid grid;
  std::uint64_t seed = 0;
};
MapFile map_from_string(const std::string& text);
void save_map(const OccupancyGrid& grid, std::uint64_t seed, const std::string& path);
MapFile load_map(const std::string& path);

}  // namespace orion
