#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gtr/source_model.hpp"
#include "gtr/visible_type_set.hpp"

namespace gtr {

// One import statement. `names` holds (imported name, local alias) pairs;
// `star` marks `from m import *`; a bare `import m [as a]` has no names and
// `module_alias` set. `resolved` is the in-project file, if any.
struct ImportRecord {
  std::string module;  // as written, leading dots included
  std::vector<std::pair<std::string, std::string>> names;
  bool star = false;
  std::string module_alias;
  std::optional<std::string> resolved;

  friend bool operator==(const ImportRecord&, const ImportRecord&) = default;
};

struct FileIndex {
  std::vector<std::string> defined_types;  // sorted, unique
  std::vector<ImportRecord> imports;       // statement order

  friend bool operator==(const FileIndex&, const FileIndex&) = default;
};

struct ProjectIndex {
  std::map<std::string, FileIndex> files;  // path relative to the root, '/' separated
  std::vector<Diagnostic> diagnostics;
};

// Indexes every `.py` file under `root`. Modules resolve against the importing
// file's directory, then its top-level project directory, then `root`.
ProjectIndex index_project(const std::filesystem::path& root);

// Same, from in-memory sources keyed by relative path.
ProjectIndex index_sources(const std::map<std::string, std::string>& sources);

// Class definitions and top-level `Name = <type>` aliases of one file, plus
// its import statements (unresolved).
FileIndex scan_file(std::string_view source);

// Throws FileNotIndexed when `file` is not part of the index.
VisibleTypeSet visible_types(const ProjectIndex& index, const std::string& file);

nlohmann::json to_json(const ProjectIndex& index);
ProjectIndex project_index_from_json(const nlohmann::json& j);

}  // namespace gtr
