#pragma once

#include <cstdint>
#include <set>

#include "orion/grid.hpp"

namespace orion {

// Injected prior/ground-truth discrepancies. Added blocks flip Free cells of
// the ground truth to Occupied in the prior; removed blocks flip Occupied
// cells to Free in the prior.
struct DiscrepancyConfig {
  int add_block_count = 0;
  int remove_block_count = 0;
  int block_size = 2;  // cells, square blocks
  std::uint64_t seed = 0;
};

// Deterministic maze-like map: Occupied border, recursive-division walls with
// corridor gaps plus random block obstacles at the requested density, Free
// space guaranteed 4-connected. Throws GenerationError (naming the seed) when
// bounded retries cannot produce a usable map.
OccupancyGrid generate_maze_map(std::uint64_t seed, int width, int height, int corridor_width,
                                double obstacle_density);

// Builds the prior map from the ground truth. Protected cells (must be Free
// in gt) are never covered by a block, prior Free space stays connected.
// Throws PlacementError when the requested blocks cannot be placed.
OccupancyGrid inject_discrepancies(const OccupancyGrid& gt, const DiscrepancyConfig& cfg,
                                   const std::set<Cell>& protected_cells);

}  // namespace orion
