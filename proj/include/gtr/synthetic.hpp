#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gtr {

// A generated corpus of small Python projects where every annotated type is
// fixed by one cue in the function body: a helper call such as
// `count_items(...)` for elementary and generic types, or the class name
// itself for user-defined types. Projects live under `train/` and `test/`.
// Shared class names recur across training projects; each training project
// also has one class of its own, and some test projects define a class that
// never occurs in training.
struct SyntheticOptions {
  int train_projects = 36;
  int test_projects = 8;
  int functions_per_project = 48;
  // Test projects that define one class name never annotated in training.
  int projects_with_unseen = 3;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  // Relative path -> file contents.
  std::map<std::string, std::string> files;
  std::vector<std::string> seen_type_names;
  std::vector<std::string> unseen_type_names;
  // One per training project.
  std::vector<std::string> project_type_names;
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& options);

// The cue-to-type table behind the corpus, for tests.
const std::map<std::string, std::string>& synthetic_cue_table();

void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& root);

}  // namespace gtr
