#include "orion/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace orion {

namespace {

// Doubled-lattice coordinate of a cell center.
inline std::int64_t doubled(int cell_coord) { return 2LL * cell_coord + 1; }

}  // namespace

std::vector<Cell> supercover_cells(Cell a, Cell b) {
  // Canonical endpoint order so both directions yield the same set.
  if (b.x < a.x || (b.x == a.x && b.y < a.y)) std::swap(a, b);

  std::vector<Cell> out;
  if (a.x == b.x) {
    for (int y = a.y; y <= b.y; ++y) out.push_back({a.x, y});
    return out;
  }

  const std::int64_t x0 = doubled(a.x), y0 = doubled(a.y);
  const std::int64_t x1 = doubled(b.x), y1 = doubled(b.y);
  const std::int64_t dx = x1 - x0;  // > 0 after canonicalization
  const std::int64_t dy = y1 - y0;

  // Sweep columns. Within the vertical slab of column cx the segment spans a
  // closed y-interval; every row whose closed cell square meets that interval
  // is in the cover (point contact counts). All comparisons are done on y*dx
  // to stay in integers:  y(x) * dx = y0*dx + dy*(x - x0).
  const std::int64_t two_dx = 2 * dx;
  auto floor_div = [](std::int64_t n, std::int64_t d) {
    std::int64_t q = n / d;
    if ((n % d != 0) && ((n < 0) != (d < 0))) --q;
    return q;
  };
  auto ceil_div = [&floor_div](std::int64_t n, std::int64_t d) {
    return -floor_div(-n, d);
  };
  for (int cx = a.x; cx <= b.x; ++cx) {
    const std::int64_t slab_lo = std::max<std::int64_t>(2LL * cx, x0);
    const std::int64_t slab_hi = std::min<std::int64_t>(2LL * cx + 2, x1);
    std::int64_t ya = y0 * dx + dy * (slab_lo - x0);
    std::int64_t yb = y0 * dx + dy * (slab_hi - x0);
    if (ya > yb) std::swap(ya, yb);

    // Rows cy with 2cy*dx <= yb and (2cy+2)*dx >= ya:
    const std::int64_t cy_lo = ceil_div(ya, two_dx) - 1;
    const std::int64_t cy_hi = floor_div(yb, two_dx);
    for (std::int64_t cy = cy_lo; cy <= cy_hi; ++cy) {
      out.push_back({cx, static_cast<int>(cy)});
    }
  }
  return out;
}

bool line_of_sight(Cell a, Cell b, const std::function<bool(Cell)>& blocked) {
  for (const Cell& c : supercover_cells(a, b)) {
    if (c == a || c == b) continue;
    if (blocked(c)) return false;
  }
  return true;
}

std::vector<Cell> disk_offsets(double range_m, double resolution) {
  std::vector<Cell> out;
  const int r = static_cast<int>(std::floor(range_m / resolution)) + 1;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      const double d = std::hypot(dx * resolution, dy * resolution);
      if (d <= range_m) out.push_back({dx, dy});
    }
  }
  return out;
}

}  // namespace orion
