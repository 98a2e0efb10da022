#include "orion/grid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace orion {

double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

std::uint64_t Rng::next_u64() {
  // splitmix64
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  // Rejection sampling to remove modulo bias.
  const std::uint64_t limit = ~0ULL - (~0ULL % n + 1) % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x > limit);
  return x % n;
}

int Rng::next_int(int lo, int hi) {
  return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
}

double Rng::next_real() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_real(double lo, double hi) { return lo + (hi - lo) * next_real(); }

double Rng::next_gaussian() {
  double u1 = next_real();
  double u2 = next_real();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

Rng Rng::fork(std::uint64_t tag) const {
  Rng child(state_ ^ (tag * 0xd1342543de82ef95ULL + 0x2545F4914F6CDD1DULL));
  child.next_u64();
  return child;
}

char cell_char(CellState s) {
  switch (s) {
    case CellState::Free: return '.';
    case CellState::Occupied: return '#';
    default: return '?';
  }
}

CellState cell_from_char(char c) {
  switch (c) {
    case '.': return CellState::Free;
    case '#': return CellState::Occupied;
    case '?': return CellState::Unknown;
    default: throw InconsistentStateError(std::string("unknown map character '") + c + "'");
  }
}

OccupancyGrid::OccupancyGrid(int w, int h, double res, CellState fill)
    : width(w), height(h), resolution(res), cells(static_cast<size_t>(w) * h, fill) {
  if (w <= 0 || h <= 0 || res <= 0.0) {
    throw DimensionError("grid dimensions and resolution must be positive");
  }
}

int OccupancyGrid::count(CellState s) const {
  int n = 0;
  for (CellState c : cells) n += (c == s);
  return n;
}

std::vector<int> free_components(const OccupancyGrid& grid, int& component_count) {
  std::vector<int> comp(grid.cells.size(), -1);
  component_count = 0;
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(grid.cells.size()); ++start) {
    if (grid.cells[start] != CellState::Free || comp[start] >= 0) continue;
    const int id = component_count++;
    stack.push_back(start);
    comp[start] = id;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      const Cell c = grid.cell_of(cur);
      const Cell nbrs[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
      for (const Cell& n : nbrs) {
        if (!grid.in_bounds(n)) continue;
        const int ni = grid.index(n);
        if (grid.cells[ni] == CellState::Free && comp[ni] < 0) {
          comp[ni] = id;
          stack.push_back(ni);
        }
      }
    }
  }
  return comp;
}

bool free_space_connected(const OccupancyGrid& grid) {
  int n = 0;
  free_components(grid, n);
  return n <= 1;
}

std::string map_to_string(const OccupancyGrid& grid, std::uint64_t seed) {
  nlohmann::json header{{"width", grid.width},
                        {"height", grid.height},
                        {"resolution", grid.resolution},
                        {"seed", seed}};
  std::string out = header.dump();
  out.push_back('\n');
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) out.push_back(cell_char(grid.at({x, y})));
    out.push_back('\n');
  }
  return out;
}

MapFile map_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InconsistentStateError("empty map file");
  const nlohmann::json header = nlohmann::json::parse(line);
  MapFile mf;
  mf.grid = OccupancyGrid(header.at("width").get<int>(), header.at("height").get<int>(),
                          header.at("resolution").get<double>(), CellState::Unknown);
  mf.seed = header.at("seed").get<std::uint64_t>();
  for (int y = 0; y < mf.grid.height; ++y) {
    if (!std::getline(in, line) || static_cast<int>(line.size()) != mf.grid.width) {
      throw InconsistentStateError("map row " + std::to_string(y) + " malformed");
    }
    for (int x = 0; x < mf.grid.width; ++x) mf.grid.at({x, y}) = cell_from_char(line[x]);
  }
  return mf;
}

void save_map(const OccupancyGrid& grid, std::uint64_t seed, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InconsistentStateError("cannot open " + path + " for writing");
  out << map_to_string(grid, seed);
}

MapFile load_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InconsistentStateError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return map_from_string(buf.str());
}

}  // namespace orion
