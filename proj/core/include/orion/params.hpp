#pragma once

#include <map>
#include <string>
#include <vector>

#include "orion/matrix.hpp"

namespace orion {

// Named flat storage for every learnable weight. Shapes are fixed once added;
// the same class doubles as a gradient accumulator.
class ParameterStore {
 public:
  DenseMatrix& add(const std::string& name, int rows, int cols);
  DenseMatrix& at(const std::string& name);
  const DenseMatrix& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.contains(name); }

  // Accumulates g into the named slot, creating a zero matrix on first use.
  void accumulate(const std::string& name, const DenseMatrix& g);

  const std::map<std::string, DenseMatrix>& entries() const { return entries_; }
  std::map<std::string, DenseMatrix>& entries() { return entries_; }
  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;
  size_t scalar_count() const;
  void zero();

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  std::map<std::string, DenseMatrix> entries_;
};

// Uniform +-sqrt(6/(fan_in+fan_out)) fill.
void glorot_init(DenseMatrix& w, Rng& rng);

// Checkpoint format: one JSON manifest line
//   {"version":1,"entries":[{"name","rows","cols","dtype","offset"}...]}
// followed by the little-endian raw float64 blob. 64-bit round trips are
// bit-exact. Throws CorruptCheckpointError on any manifest/blob mismatch.
void save_checkpoint(const ParameterStore& store, const std::string& path);
ParameterStore load_checkpoint(const std::string& path);

std::string checkpoint_to_string(const ParameterStore& store);
ParameterStore checkpoint_from_string(const std::string& bytes);

}  // namespace orion
