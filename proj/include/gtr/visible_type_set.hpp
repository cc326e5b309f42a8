#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace gtr {

enum class Provenance { SameFile, Imported };

// User-defined type names reachable from one source file.
struct VisibleTypeSet {
  std::map<std::string, Provenance> provenance;

  // Adds a name; SameFile wins when a name arrives from both sources.
  void add(const std::string& name, Provenance origin);
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t size() const { return provenance.size(); }
  bool empty() const { return provenance.empty(); }
};

const char* to_string(Provenance p);

}  // namespace gtr
