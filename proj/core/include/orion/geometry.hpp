#pragma once

#include <functional>
#include <vector>

#include "orion/grid.hpp"

namespace orion {

// Supercover line between the centers of cells a and b: every cell whose
// closed unit square the segment touches, corner contacts included. The set
// is independent of endpoint order. Computed in exact integer arithmetic on a
// doubled lattice (cell centers at odd coordinates).
std::vector<Cell> supercover_cells(Cell a, Cell b);

// True when no cell strictly between a and b (in supercover order) satisfies
// `blocked`. The endpoints themselves are exempt, so an Occupied target stays
// visible while hiding everything behind it.
bool line_of_sight(Cell a, Cell b, const std::function<bool(Cell)>& blocked);

// Offsets (dx, dy) with center distance <= range_m at the given resolution,
// sorted lexicographically. Shared by sensing and feature normalization.
std::vector<Cell> disk_offsets(double range_m, double resolution);

}  // namespace orion
