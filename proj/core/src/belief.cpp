#include "orion/belief.hpp"

namespace orion {

namespace {
constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};
}  // namespace

BeliefState::BeliefState(const OccupancyGrid& prior)
    : prior_(prior),
      current_(prior.width, prior.height, prior.resolution, CellState::Unknown),
      combined_(prior),
      verified_(prior.cells.size(), 0) {
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      const Cell c{x, y};
      if (is_prior_frontier(c)) prior_frontiers_.insert(c);
    }
  }
}

bool BeliefState::is_prior_frontier(Cell c) const {
  if (combined_.at(c) != CellState::Free) return false;
  for (int k = 0; k < 4; ++k) {
    const Cell n{c.x + kDx[k], c.y + kDy[k]};
    if (!combined_.in_bounds(n)) continue;
    if (combined_.at(n) == CellState::Occupied && !verified_[combined_.index(n)]) return true;
  }
  return false;
}

bool BeliefState::is_current_frontier(Cell c) const {
  if (current_.at(c) != CellState::Free) return false;
  for (int k = 0; k < 4; ++k) {
    const Cell n{c.x + kDx[k], c.y + kDy[k]};
    if (!current_.in_bounds(n)) continue;
    if (current_.at(n) == CellState::Unknown) return true;
  }
  return false;
}

void BeliefState::refresh_frontiers_around(Cell c) {
  auto refresh = [this](Cell q) {
    if (!combined_.in_bounds(q)) return;
    if (is_prior_frontier(q)) {
      prior_frontiers_.insert(q);
    } else {
      prior_frontiers_.erase(q);
    }
    if (is_current_frontier(q)) {
      current_frontiers_.insert(q);
    } else {
      current_frontiers_.erase(q);
    }
  };
  refresh(c);
  for (int k = 0; k < 4; ++k) refresh({c.x + kDx[k], c.y + kDy[k]});
}

std::vector<Cell> BeliefState::apply(const std::vector<Observation>& observations) {
  std::vector<Cell> changed_combined;
  for (const auto& [c, s] : observations) {
    if (!combined_.in_bounds(c)) {
      throw InconsistentStateError("observation outside grid bounds");
    }
    const bool was_verified = verified_[combined_.index(c)];
    const CellState old_current = current_.at(c);
    const CellState old_combined = combined_.at(c);
    current_.at(c) = s;
    verified_[combined_.index(c)] = 1;
    if (old_combined != s) {
      combined_.at(c) = s;
      changed_combined.push_back(c);
    }
    if (!was_verified || old_current != s || old_combined != s) {
      refresh_frontiers_around(c);
    }
  }
  return changed_combined;
}

bool BeliefState::fully_verified() const {
  for (char v : verified_) {
    if (!v) return false;
  }
  return true;
}

std::set<Cell> rescan_prior_frontiers(const BeliefState& b) {
  std::set<Cell> out;
  const OccupancyGrid& m = b.combined();
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const Cell c{x, y};
      if (m.at(c) != CellState::Free) continue;
      for (int k = 0; k < 4; ++k) {
        const Cell n{x + kDx[k], y + kDy[k]};
        if (!m.in_bounds(n)) continue;
        if (m.at(n) == CellState::Occupied && !b.verified(n)) {
          out.insert(c);
          break;
        }
      }
    }
  }
  return out;
}

std::set<Cell> rescan_current_frontiers(const BeliefState& b) {
  std::set<Cell> out;
  const OccupancyGrid& m = b.current();
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const Cell c{x, y};
      if (m.at(c) != CellState::Free) continue;
      for (int k = 0; k < 4; ++k) {
        const Cell n{x + kDx[k], y + kDy[k]};
        if (m.in_bounds(n) && m.at(n) == CellState::Unknown) {
          out.insert(c);
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace orion
