#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gtr/errors.hpp"
#include "gtr/evaluation.hpp"
#include "gtr/gtr_inference.hpp"
#include "gtr/import_analysis.hpp"
#include "gtr/seq_model.hpp"
#include "gtr/synthetic.hpp"
#include "gtr/training.hpp"
#include "json.hpp"

namespace gtr {

// A command could not start because an earlier stage's output is missing.
class MissingPrerequisite : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path corpus_root;
  std::filesystem::path workdir = "gtr-work";
  ModelDims dims;
  int vocab_min_count = 1;
  // A token must occur in this many training projects (top-level
  // directories or repos); identifiers private to one project become <unk>.
  int vocab_min_projects = 2;
  Hyperparams generation;
  Hyperparams similarity;
  int beam_k = 5;
  std::vector<int> ks = {1, 3, 5};
  InferenceMode mode = InferenceMode::Full;
  // Share of projects held out when the corpus has no train/ and test/ split.
  double test_fraction = 0.2;
  SyntheticOptions synthetic;
};

// Desk-scale settings used by `demo`: the model is trained from scratch, so
// the learning rate is far above the fine-tuning default.
RunConfig demo_config();

// Applies `key = value` lines (with [sections], `;` comments) on top of
// `base`. Throws ConfigError on syntax errors, unknown keys or bad values.
RunConfig parse_config(const std::string& text, RunConfig base);
RunConfig load_config(const std::filesystem::path& path, RunConfig base);

// Canonical `section.key = value` listing of every setting.
std::string dump_config(const RunConfig& config);
std::uint64_t config_hash(const RunConfig& config);

// Writes through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

// Paths inside the work directory.
struct Workdir {
  std::filesystem::path root;
  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path train_data() const { return root / "data" / "train.jsonl"; }
  std::filesystem::path test_data() const { return root / "data" / "test.jsonl"; }
  std::filesystem::path train_index() const { return root / "data" / "train_index.json"; }
  std::filesystem::path test_index() const { return root / "data" / "test_index.json"; }
  std::filesystem::path vocab() const { return root / "data" / "vocab.json"; }
  std::filesystem::path diagnostics() const { return root / "data" / "diagnostics.jsonl"; }
  std::filesystem::path summary() const { return root / "data" / "summary.txt"; }
  std::filesystem::path contrastive() const { return root / "data" / "contrastive.jsonl"; }
  std::filesystem::path gen_checkpoint() const { return root / "checkpoints" / "gen.ckpt"; }
  std::filesystem::path sim_checkpoint() const { return root / "checkpoints" / "sim.ckpt"; }
  std::filesystem::path predictions(InferenceMode m) const;
  std::filesystem::path report(InferenceMode m, const char* ext) const;
};

// Functions and import index of one split, paths relative to the split root.
struct CorpusSplit {
  std::vector<PythonFunction> functions;
  ProjectIndex index;
};

struct LoadedCorpus {
  CorpusSplit train;
  CorpusSplit test;
  std::vector<Diagnostic> diagnostics;
};

// Accepts a directory with train/ and test/ subdirectories, a plain directory
// of projects (split by a seeded hash of the project directory), or a JSONL
// file of {repo, file_path, source} records (split by repo).
LoadedCorpus load_corpus(const std::filesystem::path& root, double test_fraction, std::uint64_t seed);

// Vocabulary over training function tokens, keeping tokens seen at least
// `min_count` times and in at least `min_projects` projects (the first path
// component of the function's file).
Vocabulary build_vocabulary(const std::vector<PythonFunction>& functions, int min_count, int min_projects);

// Dataset JSONL records.
nlohmann::json slot_to_json(const TypeSlot& slot);
TypeSlot slot_from_json(const nlohmann::json& j);
nlohmann::json dataset_record(const std::string& id, const TrainingPair& pair, const VisibleTypeSet& visible,
                              bool unseen);
TrainingPair pair_from_record(const nlohmann::json& j);
TestCase test_case_from_record(const nlohmann::json& j);
nlohmann::json prediction_record(const std::string& id, const std::string& file_path,
                                 const RankedPrediction& prediction);

// Stage entry points. Each logs to `log` and returns normally on success.
void run_build_dataset(const RunConfig& config, std::ostream& log);
void run_train_generation(const RunConfig& config, std::ostream& log);
void run_train_similarity(const RunConfig& config, std::ostream& log);
void run_infer(const RunConfig& config, std::ostream& log);
MetricsReport run_eval(const RunConfig& config, std::ostream& out, std::ostream& log);
std::vector<MetricsReport> run_ablate(const RunConfig& config, const std::vector<InferenceMode>& modes,
                                      std::ostream& out, std::ostream& log);
void run_demo(const RunConfig& config, std::ostream& out, std::ostream& log);

struct CliOptions {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> beam_k;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  std::optional<int> batch_size;
  std::string mode;
  std::string workdir;
  std::string corpus;
};

// Built-in defaults (demo_config() for `demo`), then the config file, then
// TIGER_SEED, then flags. Flags for epochs, learning rate and batch size
// apply to both training stages.
RunConfig resolve_config(const CliOptions& options, const char* env_seed);

// Command-line front end: returns the process exit status
// (0 ok, 1 failure or missing prerequisite, 2 configuration error).
int run_cli(int argc, char** argv);

}  // namespace gtr
