#include "orion/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace orion {

DenseMatrix& ParameterStore::add(const std::string& name, int rows, int cols) {
  if (entries_.contains(name)) {
    throw InconsistentStateError("parameter '" + name + "' already exists");
  }
  return entries_.emplace(name, DenseMatrix(rows, cols)).first->second;
}

DenseMatrix& ParameterStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InconsistentStateError("unknown parameter '" + name + "'");
  return it->second;
}

const DenseMatrix& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InconsistentStateError("unknown parameter '" + name + "'");
  return it->second;
}

void ParameterStore::accumulate(const std::string& name, const DenseMatrix& g) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    entries_.emplace(name, g);
    return;
  }
  add_inplace(it->second, g);
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

std::vector<std::string> ParameterStore::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  }
  return out;
}

size_t ParameterStore::scalar_count() const {
  size_t n = 0;
  for (const auto& [k, v] : entries_) n += v.data.size();
  return n;
}

void ParameterStore::zero() {
  for (auto& [k, v] : entries_) {
    std::fill(v.data.begin(), v.data.end(), 0.0);
  }
}

void glorot_init(DenseMatrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / (w.rows + w.cols));
  for (double& v : w.data) v = rng.next_real(-limit, limit);
}

std::string checkpoint_to_string(const ParameterStore& store) {
  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["entries"] = nlohmann::json::array();
  std::string blob;
  for (const auto& [name, m] : store.entries()) {
    manifest["entries"].push_back({{"name", name},
                                   {"rows", m.rows},
                                   {"cols", m.cols},
                                   {"dtype", "f64"},
                                   {"offset", blob.size()}});
    const size_t bytes = m.data.size() * sizeof(double);
    const size_t start = blob.size();
    blob.resize(start + bytes);
    std::memcpy(blob.data() + start, m.data.data(), bytes);
  }
  std::string out = manifest.dump();
  out.push_back('\n');
  out += blob;
  return out;
}

ParameterStore checkpoint_from_string(const std::string& bytes) {
  const size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw CorruptCheckpointError("checkpoint missing manifest line");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpointError(std::string("bad checkpoint manifest: ") + e.what());
  }
  if (!manifest.contains("version") || manifest["version"].get<int>() != 1) {
    throw CorruptCheckpointError("unsupported checkpoint version");
  }
  const char* blob = bytes.data() + nl + 1;
  const size_t blob_size = bytes.size() - nl - 1;

  ParameterStore store;
  for (const auto& e : manifest["entries"]) {
    const std::string name = e.at("name").get<std::string>();
    const int rows = e.at("rows").get<int>();
    const int cols = e.at("cols").get<int>();
    const size_t offset = e.at("offset").get<size_t>();
    if (e.at("dtype").get<std::string>() != "f64") {
      throw CorruptCheckpointError("unsupported dtype for '" + name + "'");
    }
    const size_t need = static_cast<size_t>(rows) * cols * sizeof(double);
    if (offset + need > blob_size) {
      throw CorruptCheckpointError("checkpoint blob truncated at '" + name + "'");
    }
    DenseMatrix& m = store.add(name, rows, cols);
    std::memcpy(m.data.data(), blob + offset, need);
  }
  return store;
}

void save_checkpoint(const ParameterStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorruptCheckpointError("cannot open " + path + " for writing");
  const std::string bytes = checkpoint_to_string(store);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ParameterStore load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptCheckpointError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace orion
