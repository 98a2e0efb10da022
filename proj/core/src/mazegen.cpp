#include "orion/mazegen.hpp"

#include <algorithm>
#include <vector>

namespace orion {

namespace {

// Recursive division: split chambers with one-cell walls, each wall pierced
// by a corridor_width gap. Preserves connectivity by construction.
void divide(OccupancyGrid& g, Rng& rng, int x0, int y0, int x1, int y1, int corridor) {
  const int w = x1 - x0;
  const int h = y1 - y0;
  const int min_side = 2 * corridor + 3;
  if (w < min_side && h < min_side) return;

  const bool horizontal = (h > w) || (h == w && rng.next_real() < 0.5);
  if (horizontal) {
    if (h < min_side) return;
    const int wy = rng.next_int(y0 + corridor + 1, y1 - corridor - 2);
    const int gap = rng.next_int(x0, x1 - corridor);
    for (int x = x0; x < x1; ++x) {
      if (x >= gap && x < gap + corridor) continue;
      g.at({x, wy}) = CellState::Occupied;
    }
    divide(g, rng, x0, y0, x1, wy, corridor);
    divide(g, rng, x0, wy + 1, x1, y1, corridor);
  } else {
    if (w < min_side) return;
    const int wx = rng.next_int(x0 + corridor + 1, x1 - corridor - 2);
    const int gap = rng.next_int(y0, y1 - corridor);
    for (int y = y0; y < y1; ++y) {
      if (y >= gap && y < gap + corridor) continue;
      g.at({wx, y}) = CellState::Occupied;
    }
    divide(g, rng, x0, y0, wx, y1, corridor);
    divide(g, rng, wx + 1, y0, x1, y1, corridor);
  }
}

OccupancyGrid attempt(Rng& rng, int width, int height, int corridor_width, double density) {
  OccupancyGrid g(width, height, 1.0, CellState::Free);
  for (int x = 0; x < width; ++x) {
    g.at({x, 0}) = CellState::Occupied;
    g.at({x, height - 1}) = CellState::Occupied;
  }
  for (int y = 0; y < height; ++y) {
    g.at({0, y}) = CellState::Occupied;
    g.at({width - 1, y}) = CellState::Occupied;
  }
  if (density <= 0.0) return g;

  divide(g, rng, 1, 1, width - 1, height - 1, corridor_width);

  // Random square blocks until the interior reaches the target density.
  const int interior = (width - 2) * (height - 2);
  const int target = static_cast<int>(density * interior);
  int occupied = g.count(CellState::Occupied) - (2 * width + 2 * height - 4);
  // Block obstacles scale with the corridor width so large maps get
  // shelf-like clusters instead of line-of-sight confetti.
  const int max_block = std::max(2, corridor_width);
  int attempts = 8 * interior;
  while (occupied < target && attempts-- > 0) {
    const int size = rng.next_int(1, max_block);
    const int bx = rng.next_int(1, width - 1 - size);
    const int by = rng.next_int(1, height - 1 - size);
    for (int y = by; y < by + size; ++y) {
      for (int x = bx; x < bx + size; ++x) {
        if (g.at({x, y}) == CellState::Free) {
          g.at({x, y}) = CellState::Occupied;
          ++occupied;
        }
      }
    }
  }

  // Keep the largest Free component, fill the rest.
  int ncomp = 0;
  const std::vector<int> comp = free_components(g, ncomp);
  if (ncomp > 1) {
    std::vector<int> sizes(ncomp, 0);
    for (int c : comp) {
      if (c >= 0) ++sizes[c];
    }
    const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (size_t i = 0; i < comp.size(); ++i) {
      if (comp[i] >= 0 && comp[i] != keep) g.cells[i] = CellState::Occupied;
    }
  }
  return g;
}

}  // namespace

OccupancyGrid generate_maze_map(std::uint64_t seed, int width, int height, int corridor_width,
                                double obstacle_density) {
  if (width < 8 || height < 8) throw GenerationError("map must be at least 8x8");
  if (corridor_width < 1) throw GenerationError("corridor_width must be >= 1");
  if (obstacle_density < 0.0 || obstacle_density > 1.0) {
    throw GenerationError("obstacle_density must lie in [0,1]");
  }

  const int max_attempts = 16;
  for (int k = 0; k < max_attempts; ++k) {
    Rng rng = Rng(seed).fork(static_cast<std::uint64_t>(k) + 1);
    OccupancyGrid g = attempt(rng, width, height, corridor_width, obstacle_density);
    const int free_cells = g.count(CellState::Free);
    const int interior = (width - 2) * (height - 2);
    // Reject degenerate maps where the component fill ate most of the space.
    if (free_cells >= std::max(2, static_cast<int>(0.25 * (1.0 - obstacle_density) * interior))) {
      return g;
    }
  }
  throw GenerationError("maze generation failed for seed " + std::to_string(seed));
}

OccupancyGrid inject_discrepancies(const OccupancyGrid& gt, const DiscrepancyConfig& cfg,
                                   const std::set<Cell>& protected_cells) {
  for (const Cell& c : protected_cells) {
    if (!gt.in_bounds(c) || gt.at(c) != CellState::Free) {
      throw PlacementError("protected cell is not Free in ground truth");
    }
  }
  if (cfg.block_size < 1) throw PlacementError("block_size must be >= 1");

  OccupancyGrid prior = gt;
  Rng rng(cfg.seed);
  const int bs = cfg.block_size;

  auto anchors = [&](auto&& eligible) {
    std::vector<Cell> out;
    for (int y = 1; y + bs <= gt.height - 1; ++y) {
      for (int x = 1; x + bs <= gt.width - 1; ++x) {
        bool ok = true;
        for (int dy = 0; dy < bs && ok; ++dy) {
          for (int dx = 0; dx < bs && ok; ++dx) {
            ok = eligible(Cell{x + dx, y + dy});
          }
        }
        if (ok) out.push_back({x, y});
      }
    }
    return out;
  };
  auto shuffle = [&rng](std::vector<Cell>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[rng.next_below(i)]);
    }
  };
  auto stamp = [&](OccupancyGrid& g, Cell a, CellState s) {
    for (int dy = 0; dy < bs; ++dy) {
      for (int dx = 0; dx < bs; ++dx) g.at({a.x + dx, a.y + dy}) = s;
    }
  };

  // Added obstacles: Free in gt (and untouched by protections), Occupied in
  // the prior. Each placement must keep prior Free space connected.
  for (int b = 0; b < cfg.add_block_count; ++b) {
    std::vector<Cell> cand = anchors([&](Cell c) {
      return gt.at(c) == CellState::Free && prior.at(c) == CellState::Free &&
             !protected_cells.contains(c);
    });
    shuffle(cand);
    bool placed = false;
    for (const Cell& a : cand) {
      OccupancyGrid trial = prior;
      stamp(trial, a, CellState::Occupied);
      if (free_space_connected(trial) && trial.count(CellState::Free) > 0) {
        prior = std::move(trial);
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw PlacementError("cannot place added discrepancy block " + std::to_string(b));
    }
  }

  // Removed obstacles: Occupied in gt, Free in the prior. The freed block has
  // to attach to existing prior free space so the prior stays connected.
  // Fully-occupied blocks are preferred; thin-walled mazes may only offer
  // partially occupied ones, in which case only the occupied cells flip.
  for (int b = 0; b < cfg.remove_block_count; ++b) {
    auto stamp_occupied = [&](OccupancyGrid& g, Cell a) {
      for (int dy = 0; dy < bs; ++dy) {
        for (int dx = 0; dx < bs; ++dx) {
          Cell c{a.x + dx, a.y + dy};
          if (gt.at(c) == CellState::Occupied) g.at(c) = CellState::Free;
        }
      }
    };
    auto try_place = [&](std::vector<Cell>& cand) {
      shuffle(cand);
      for (const Cell& a : cand) {
        OccupancyGrid trial = prior;
        stamp_occupied(trial, a);
        if (trial != prior && free_space_connected(trial)) {
          prior = std::move(trial);
          return true;
        }
      }
      return false;
    };
    std::vector<Cell> full = anchors([&](Cell c) {
      return gt.at(c) == CellState::Occupied && prior.at(c) == CellState::Occupied;
    });
    bool placed = try_place(full);
    if (!placed) {
      std::vector<Cell> partial = anchors([&](Cell c) {
        return prior.at(c) == gt.at(c);  // untouched so far
      });
      placed = try_place(partial);
    }
    if (!placed) {
      throw PlacementError("cannot place removed discrepancy block " + std::to_string(b));
    }
  }
  return prior;
}

}  // namespace orion
