#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace orion {

// Grid cell in integer cell coordinates (x = column, y = row).
struct Cell {
  int x = 0;
  int y = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

// Position in meters.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

double distance(const Point& a, const Point& b);

// Deterministic RNG. Wraps a fixed 64-bit generator and does its own range
// reduction so that sequences do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64();
  // Uniform integer in [0, n), n > 0.
  std::uint64_t next_below(std::uint64_t n);
  int next_int(int lo, int hi);  // inclusive bounds
  double next_real();            // [0, 1)
  double next_real(double lo, double hi);
  // Normal(0, 1) via Box-Muller on next_real draws.
  double next_gaussian();

  // Derives an independent stream for a named purpose.
  Rng fork(std::uint64_t tag) const;

 private:
  std::uint64_t state_;
};

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PlacementError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidPoseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidNodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InconsistentStateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidFsmError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CorruptCheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SetupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace orion
