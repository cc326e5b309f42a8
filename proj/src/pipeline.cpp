#include "gtr/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <exception>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gtr/errors.hpp"

namespace gtr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return value;
}

int parse_positive(const std::string& key, const std::string& text) {
  const int v = parse_number<int>(key, text);
  if (v <= 0) throw ConfigError(key + " must be positive");
  return v;
}

std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    const auto b = part.find_first_not_of(" \t");
    const auto e = part.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty entry in inference.ks");
    ks.push_back(parse_positive("inference.ks", part.substr(b, e - b + 1)));
  }
  if (ks.empty()) throw ConfigError("inference.ks must list at least one k");
  return ks;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); }},
      {"paths.corpus_root", [](RunConfig& c, const std::string& v) { c.corpus_root = v; }},
      {"paths.workdir", [](RunConfig& c, const std::string& v) { c.workdir = v; }},
      {"model.d_model", [](RunConfig& c, const std::string& v) { c.dims.d_model = parse_positive("model.d_model", v); }},
      {"model.n_heads", [](RunConfig& c, const std::string& v) { c.dims.n_heads = parse_positive("model.n_heads", v); }},
      {"model.d_ff", [](RunConfig& c, const std::string& v) { c.dims.d_ff = parse_positive("model.d_ff", v); }},
      {"model.enc_layers", [](RunConfig& c, const std::string& v) { c.dims.enc_layers = parse_positive("model.enc_layers", v); }},
      {"model.dec_layers", [](RunConfig& c, const std::string& v) { c.dims.dec_layers = parse_positive("model.dec_layers", v); }},
      {"model.max_seq_len", [](RunConfig& c, const std::string& v) { c.dims.max_seq_len = parse_positive("model.max_seq_len", v); }},
      {"model.vocab_min_count", [](RunConfig& c, const std::string& v) { c.vocab_min_count = parse_positive("model.vocab_min_count", v); }},
      {"model.vocab_min_projects", [](RunConfig& c, const std::string& v) { c.vocab_min_projects = parse_positive("model.vocab_min_projects", v); }},
      {"generation.epochs", [](RunConfig& c, const std::string& v) { c.generation.epochs = parse_number<int>("generation.epochs", v); }},
      {"generation.learning_rate", [](RunConfig& c, const std::string& v) { c.generation.learning_rate = parse_number<double>("generation.learning_rate", v); }},
      {"generation.batch_size", [](RunConfig& c, const std::string& v) { c.generation.batch_size = parse_positive("generation.batch_size", v); }},
      {"similarity.epochs", [](RunConfig& c, const std::string& v) { c.similarity.epochs = parse_number<int>("similarity.epochs", v); }},
      {"similarity.learning_rate", [](RunConfig& c, const std::string& v) { c.similarity.learning_rate = parse_number<double>("similarity.learning_rate", v); }},
      {"similarity.batch_size", [](RunConfig& c, const std::string& v) { c.similarity.batch_size = parse_positive("similarity.batch_size", v); }},
      {"inference.beam_k", [](RunConfig& c, const std::string& v) { c.beam_k = parse_positive("inference.beam_k", v); }},
      {"inference.ks", [](RunConfig& c, const std::string& v) { c.ks = parse_ks(v); }},
      {"inference.mode", [](RunConfig& c, const std::string& v) {
         try {
           c.mode = inference_mode_from_string(v);
         } catch (const Error& e) {
           throw ConfigError(e.what());
         }
       }},
      {"data.test_fraction", [](RunConfig& c, const std::string& v) {
         c.test_fraction = parse_number<double>("data.test_fraction", v);
         if (c.test_fraction < 0 || c.test_fraction > 1) throw ConfigError("data.test_fraction must be in [0, 1]");
       }},
      {"synthetic.train_projects", [](RunConfig& c, const std::string& v) { c.synthetic.train_projects = parse_positive("synthetic.train_projects", v); }},
      {"synthetic.test_projects", [](RunConfig& c, const std::string& v) { c.synthetic.test_projects = parse_positive("synthetic.test_projects", v); }},
      {"synthetic.functions_per_project", [](RunConfig& c, const std::string& v) { c.synthetic.functions_per_project = parse_positive("synthetic.functions_per_project", v); }},
      {"synthetic.projects_with_unseen", [](RunConfig& c, const std::string& v) { c.synthetic.projects_with_unseen = parse_number<int>("synthetic.projects_with_unseen", v); }},
  };
  return table;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingPrerequisite("missing " + path.string());
  std::vector<json> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::string to_jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

void require(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) throw MissingPrerequisite("missing " + path.string() + " (run `" + hint + "` first)");
}

SeqModelParams load_model(const fs::path& path, const std::string& hint) {
  require(path, hint);
  return load_checkpoint(path);
}

// Reads every .py file below `dir` keyed by its '/'-separated relative path.
void collect_python(const fs::path& dir, const fs::path& base, std::map<std::string, std::string>& out) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".py") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out[fs::relative(f, base).generic_string()] = read_file(f);
}

CorpusSplit make_split(const std::map<std::string, std::string>& sources, std::vector<Diagnostic>& diagnostics) {
  CorpusSplit split;
  split.index = index_sources(sources);
  for (const auto& [path, text] : sources) {
    auto r = extract_functions(text, path);
    split.functions.insert(split.functions.end(), r.functions.begin(), r.functions.end());
    diagnostics.insert(diagnostics.end(), r.diagnostics.begin(), r.diagnostics.end());
  }
  diagnostics.insert(diagnostics.end(), split.index.diagnostics.begin(), split.index.diagnostics.end());
  return split;
}

bool held_out(const std::string& project, double fraction, std::uint64_t seed) {
  // FNV alone leaves the top bits nearly equal for names that differ only at
  // the end, so finish with the splitmix64 mixer.
  std::uint64_t h = fnv1a(std::to_string(seed) + ":" + project);
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return static_cast<double>(h >> 11) * 0x1.0p-53 < fraction;
}

std::vector<TestCase> load_test_cases(const Workdir& w) {
  std::vector<TestCase> cases;
  for (const auto& r : read_jsonl(w.test_data())) cases.push_back(test_case_from_record(r));
  return cases;
}

class StageTimer {
 public:
  StageTimer(std::ostream& log, std::string name) : log_(log), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    log_ << "[gtr] " << name_ << (std::uncaught_exceptions() ? " failed after " : " finished in ") << fmt_seconds(s)
         << "\n";
  }

 private:
  static std::string fmt_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1fs", s);
    return buf;
  }
  std::ostream& log_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

std::vector<EvalInstance> join_predictions(const std::vector<TestCase>& cases, const std::vector<json>& predictions) {
  std::map<std::string, const json*> by_id;
  for (const auto& p : predictions) by_id[p.at("id").get<std::string>()] = &p;
  std::vector<EvalInstance> out;
  for (const auto& c : cases) {
    EvalInstance inst;
    inst.id = c.id;
    inst.gold = parse_type(c.expected_type);
    inst.type_category = c.category;
    inst.var_kind = c.func.slot.var_kind;
    inst.unseen = c.unseen;
    inst.prediction.slot = c.func.slot;
    auto it = by_id.find(c.id);
    if (it != by_id.end()) {
      for (const auto& r : it->second->at("ranked")) {
        Candidate cand;
        cand.text = r.at("type").get<std::string>();
        cand.type_expr = parse_type(cand.text);
        cand.score = r.at("score").get<double>();
        cand.lik = r.at("lik").get<double>();
        cand.sim = r.at("sim").get<double>();
        cand.origin = candidate_origin_from_string(r.at("origin").get<std::string>());
        inst.prediction.candidates.push_back(std::move(cand));
      }
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::string mode_title(InferenceMode m) {
  switch (m) {
    case InferenceMode::Full: return "GTR (generating + ranking)";
    case InferenceMode::GeneratingOnly: return "Only generating";
    case InferenceMode::RankingOnly: return "Only ranking";
  }
  return "";
}

void write_report(const Workdir& w, InferenceMode mode, const MetricsReport& report, std::ostream& out) {
  const std::string text = format_report(report, mode_title(mode));
  write_file_atomic(w.report(mode, "txt"), text);
  write_file_atomic(w.report(mode, "json"), report_to_json(report).dump(2) + "\n");
  out << text << "\n";
}

}  // namespace

// ---- configuration ----

RunConfig demo_config() {
  RunConfig c;
  c.workdir = "gtr-demo";
  c.generation.epochs = 6;
  c.generation.learning_rate = 1e-3;
  c.generation.batch_size = 8;
  c.similarity.epochs = 8;
  c.similarity.learning_rate = 3e-4;
  c.similarity.batch_size = 8;
  return c;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  boost::property_tree::ptree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  for (const auto& [section, node] : tree) {
    if (node.empty()) {
      auto it = setters().find(section);
      if (it == setters().end()) throw ConfigError("unknown config key: " + section);
      it->second(base, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) {
      const std::string full = section + "." + key;
      auto it = setters().find(full);
      if (it == setters().end()) throw ConfigError("unknown config key: " + full);
      it->second(base, leaf.data());
    }
  }
  return base;
}

RunConfig load_config(const fs::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream out;
  std::string ks;
  for (std::size_t i = 0; i < c.ks.size(); ++i) ks += (i ? "," : "") + std::to_string(c.ks[i]);
  out << "seed = " << c.seed << "\n"
      << "paths.corpus_root = " << c.corpus_root.generic_string() << "\n"
      << "paths.workdir = " << c.workdir.generic_string() << "\n"
      << "model.d_model = " << c.dims.d_model << "\n"
      << "model.n_heads = " << c.dims.n_heads << "\n"
      << "model.d_ff = " << c.dims.d_ff << "\n"
      << "model.enc_layers = " << c.dims.enc_layers << "\n"
      << "model.dec_layers = " << c.dims.dec_layers << "\n"
      << "model.max_seq_len = " << c.dims.max_seq_len << "\n"
      << "model.vocab_min_count = " << c.vocab_min_count << "\n"
      << "model.vocab_min_projects = " << c.vocab_min_projects << "\n"
      << "generation.epochs = " << c.generation.epochs << "\n"
      << "generation.learning_rate = " << fmt_double(c.generation.learning_rate) << "\n"
      << "generation.batch_size = " << c.generation.batch_size << "\n"
      << "similarity.epochs = " << c.similarity.epochs << "\n"
      << "similarity.learning_rate = " << fmt_double(c.similarity.learning_rate) << "\n"
      << "similarity.batch_size = " << c.similarity.batch_size << "\n"
      << "inference.beam_k = " << c.beam_k << "\n"
      << "inference.ks = " << ks << "\n"
      << "inference.mode = " << to_string(c.mode) << "\n"
      << "data.test_fraction = " << fmt_double(c.test_fraction) << "\n"
      << "synthetic.train_projects = " << c.synthetic.train_projects << "\n"
      << "synthetic.test_projects = " << c.synthetic.test_projects << "\n"
      << "synthetic.functions_per_project = " << c.synthetic.functions_per_project << "\n"
      << "synthetic.projects_with_unseen = " << c.synthetic.projects_with_unseen << "\n";
  return out.str();
}

std::uint64_t config_hash(const RunConfig& config) { return fnv1a(dump_config(config)); }

// ---- files ----

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path Workdir::predictions(InferenceMode m) const {
  return m == InferenceMode::Full ? root / "predictions.jsonl"
                                  : root / ("predictions_" + std::string(to_string(m)) + ".jsonl");
}

fs::path Workdir::report(InferenceMode m, const char* ext) const {
  return m == InferenceMode::Full ? root / ("report." + std::string(ext))
                                  : root / ("report_" + std::string(to_string(m)) + "." + ext);
}

// ---- corpus ----

LoadedCorpus load_corpus(const fs::path& root, double test_fraction, std::uint64_t seed) {
  LoadedCorpus corpus;
  std::map<std::string, std::string> train, test;
  if (fs::is_regular_file(root)) {
    for (const auto& r : read_jsonl(root)) {
      const std::string repo = r.at("repo").get<std::string>();
      const std::string path = repo + "/" + r.at("file_path").get<std::string>();
      (held_out(repo, test_fraction, seed) ? test : train)[path] = r.at("source").get<std::string>();
    }
  } else if (fs::is_directory(root / "train") && fs::is_directory(root / "test")) {
    collect_python(root / "train", root / "train", train);
    collect_python(root / "test", root / "test", test);
  } else if (fs::is_directory(root)) {
    std::map<std::string, std::string> all;
    collect_python(root, root, all);
    for (auto& [path, text] : all) {
      const auto slash = path.find('/');
      const bool is_test = slash != std::string::npos && held_out(path.substr(0, slash), test_fraction, seed);
      (is_test ? test : train)[path] = std::move(text);
    }
  } else {
    throw MissingPrerequisite("corpus not found: " + root.string());
  }
  corpus.train = make_split(train, corpus.diagnostics);
  corpus.test = make_split(test, corpus.diagnostics);
  return corpus;
}

Vocabulary build_vocabulary(const std::vector<PythonFunction>& functions, int min_count, int min_projects) {
  std::map<std::string, std::set<std::string>> projects;
  std::vector<std::vector<std::string>> streams;
  for (const auto& f : functions) {
    const std::string project = f.file_path.substr(0, f.file_path.find('/'));
    streams.push_back(tokenize_code(f.source_text));
    for (const auto& t : streams.back()) projects[t].insert(project);
  }
  for (auto& s : streams)
    std::erase_if(s, [&](const std::string& t) { return static_cast<int>(projects[t].size()) < min_projects; });
  return Vocabulary::build(streams, min_count);
}

// ---- records ----

json slot_to_json(const TypeSlot& slot) {
  return {{"kind", to_string(slot.var_kind)}, {"name", slot.var_name}, {"index", slot.occurrence_index}};
}

TypeSlot slot_from_json(const json& j) {
  return TypeSlot{var_kind_from_string(j.at("kind").get<std::string>()), j.at("name").get<std::string>(),
                  j.at("index").get<int>()};
}

json dataset_record(const std::string& id, const TrainingPair& pair, const VisibleTypeSet& visible, bool unseen) {
  const auto& f = pair.input.function;
  return {{"id", id},
          {"function", f.source_text},
          {"name", f.name},
          {"line_span", {f.line_span.first, f.line_span.second}},
          {"slot", slot_to_json(pair.input.slot)},
          {"expected_type", pair.expected_type},
          {"category", to_string(pair.category)},
          {"file_path", f.file_path},
          {"visible_types", visible.names()},
          {"negatives", json::array()},
          {"unseen", unseen}};
}

TrainingPair pair_from_record(const json& j) {
  TrainingPair p;
  p.input.function.file_path = j.at("file_path").get<std::string>();
  p.input.function.name = j.value("name", std::string());
  p.input.function.source_text = j.at("function").get<std::string>();
  if (j.contains("line_span")) p.input.function.line_span = {j["line_span"][0].get<int>(), j["line_span"][1].get<int>()};
  p.input.slot = slot_from_json(j.at("slot"));
  p.expected_type = j.at("expected_type").get<std::string>();
  p.category = category_from_string(j.at("category").get<std::string>());
  return p;
}

TestCase test_case_from_record(const json& j) {
  TrainingPair p = pair_from_record(j);
  TestCase c;
  c.id = j.at("id").get<std::string>();
  c.func = std::move(p.input);
  for (const auto& name : j.at("visible_types")) c.visible.add(name.get<std::string>(), Provenance::Imported);
  c.expected_type = std::move(p.expected_type);
  c.category = p.category;
  c.unseen = j.value("unseen", false);
  return c;
}

json prediction_record(const std::string& id, const std::string& file_path, const RankedPrediction& prediction) {
  json ranked = json::array();
  for (const auto& c : prediction.candidates)
    ranked.push_back({{"type", c.text}, {"score", c.score}, {"lik", c.lik}, {"sim", c.sim}, {"origin", to_string(c.origin)}});
  return {{"id", id}, {"file_path", file_path}, {"slot", slot_to_json(prediction.slot)}, {"ranked", ranked}};
}

// ---- stages ----

void run_build_dataset(const RunConfig& config, std::ostream& log) {
  StageTimer timer(log, "build-dataset");
  if (config.corpus_root.empty()) throw MissingPrerequisite("no corpus configured (set paths.corpus_root or --corpus)");
  const Workdir w{config.workdir};
  const LoadedCorpus corpus = load_corpus(config.corpus_root, config.test_fraction, config.seed);
  const auto train_pairs = build_generation_dataset(corpus.train.functions);
  const auto test_pairs = build_generation_dataset(corpus.test.functions);

  std::set<std::string> seen;
  for (const auto& p : train_pairs) seen.insert(canonical_text(p.expected_type));

  auto visible_for = [](const ProjectIndex& index, const std::string& file) {
    return index.files.count(file) ? visible_types(index, file) : VisibleTypeSet{};
  };
  std::vector<json> train_records, test_records;
  char id[32];
  for (std::size_t i = 0; i < train_pairs.size(); ++i) {
    std::snprintf(id, sizeof id, "train-%06zu", i);
    train_records.push_back(
        dataset_record(id, train_pairs[i], visible_for(corpus.train.index, train_pairs[i].input.function.file_path), false));
  }
  std::vector<SummaryItem> test_items;
  for (std::size_t i = 0; i < test_pairs.size(); ++i) {
    const auto& p = test_pairs[i];
    const bool unseen = p.category == TypeCategory::UserDefined && !seen.count(canonical_text(p.expected_type));
    std::snprintf(id, sizeof id, "test-%06zu", i);
    test_records.push_back(dataset_record(id, p, visible_for(corpus.test.index, p.input.function.file_path), unseen));
    test_items.push_back({p.category, p.input.slot.var_kind, unseen});
  }

  const Vocabulary vocab = build_vocabulary(corpus.train.functions, config.vocab_min_count, config.vocab_min_projects);

  std::vector<json> diagnostics;
  for (const auto& d : corpus.diagnostics) diagnostics.push_back({{"file_path", d.file_path}, {"error", d.error}});

  const std::string summary = format_summary(summarize_dataset(train_pairs), "Training set") + "\n" +
                              format_summary(summarize_dataset(test_items), "Test set");
  write_file_atomic(w.train_data(), to_jsonl(train_records));
  write_file_atomic(w.test_data(), to_jsonl(test_records));
  write_file_atomic(w.train_index(), to_json(corpus.train.index).dump(1) + "\n");
  write_file_atomic(w.test_index(), to_json(corpus.test.index).dump(1) + "\n");
  write_file_atomic(w.vocab(), json(vocab.tokens()).dump() + "\n");
  write_file_atomic(w.diagnostics(), to_jsonl(diagnostics));
  write_file_atomic(w.summary(), summary);
  log << "[gtr] " << corpus.train.functions.size() << " training functions, " << corpus.test.functions.size()
      << " test functions, " << diagnostics.size() << " diagnostics, vocabulary " << vocab.size() << "\n"
      << summary;
}

void run_train_generation(const RunConfig& config, std::ostream& log) {
  StageTimer timer(log, "train-gen");
  const Workdir w{config.workdir};
  require(w.train_data(), "gtr build-dataset");
  require(w.vocab(), "gtr build-dataset");
  const auto tokens = json::parse(read_file(w.vocab())).get<std::vector<std::string>>();
  const Vocabulary vocab(tokens);
  std::vector<TrainingPair> pairs;
  for (const auto& r : read_jsonl(w.train_data())) pairs.push_back(pair_from_record(r));

  Hyperparams hyper = config.generation;
  hyper.seed = config.seed;
  TrainingLog tlog;
  tlog.out = &log;
  const SeqModelParams gen = train_generative(init_params(vocab, config.dims, config.seed), pairs, hyper, &tlog);
  write_file_atomic(w.gen_checkpoint(), checkpoint_bytes(gen));
  log << "[gtr] wrote " << w.gen_checkpoint().string() << " (" << gen.num_scalars() << " parameters)\n";
}

void run_train_similarity(const RunConfig& config, std::ostream& log) {
  StageTimer timer(log, "train-sim");
  const Workdir w{config.workdir};
  const SeqModelParams gen = load_model(w.gen_checkpoint(), "gtr train-gen");
  require(w.train_data(), "gtr build-dataset");
  require(w.train_index(), "gtr build-dataset");
  std::vector<TrainingPair> pairs;
  for (const auto& r : read_jsonl(w.train_data())) pairs.push_back(pair_from_record(r));
  const ProjectIndex index = project_index_from_json(json::parse(read_file(w.train_index())));

  const auto instances = build_contrastive_dataset(pairs, gen, index, config.beam_k, config.seed + 1);
  std::vector<json> records;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    TrainingPair p{inst.anchor, inst.positive, classify(parse_type(inst.positive))};
    char id[32];
    std::snprintf(id, sizeof id, "train-%06zu", i);
    json r = dataset_record(id, p, index.files.count(inst.anchor.function.file_path)
                                       ? visible_types(index, inst.anchor.function.file_path)
                                       : VisibleTypeSet{},
                            false);
    r.erase("unseen");
    r["negatives"] = inst.negatives;
    json origins = json::array();
    for (auto o : inst.negative_origins) origins.push_back(to_string(o));
    r["negative_origins"] = origins;
    records.push_back(std::move(r));
  }
  write_file_atomic(w.contrastive(), to_jsonl(records));
  log << "[gtr] built " << instances.size() << " contrastive instances\n";

  Hyperparams hyper = config.similarity;
  hyper.seed = config.seed + 2;
  TrainingLog tlog;
  tlog.out = &log;
  const SeqModelParams simm = train_contrastive(gen, instances, hyper, &tlog);
  write_file_atomic(w.sim_checkpoint(), checkpoint_bytes(simm));
  log << "[gtr] wrote " << w.sim_checkpoint().string() << "\n";
}

namespace {

void write_predictions(const Workdir& w, InferenceMode mode, const std::vector<TestCase>& cases,
                       const std::vector<EvalInstance>& results) {
  std::vector<json> records;
  for (std::size_t i = 0; i < cases.size(); ++i)
    records.push_back(prediction_record(cases[i].id, cases[i].func.function.file_path, results[i].prediction));
  write_file_atomic(w.predictions(mode), to_jsonl(records));
}

}  // namespace

void run_infer(const RunConfig& config, std::ostream& log) {
  StageTimer timer(log, "infer");
  const Workdir w{config.workdir};
  const SeqModelParams gen = load_model(w.gen_checkpoint(), "gtr train-gen");
  const SeqModelParams simm = load_model(w.sim_checkpoint(), "gtr train-sim");
  require(w.test_data(), "gtr build-dataset");
  const auto cases = load_test_cases(w);
  const auto results = run_inference(config.mode, gen, simm, cases, config.beam_k);
  write_predictions(w, config.mode, cases, results);
  log << "[gtr] wrote " << cases.size() << " predictions to " << w.predictions(config.mode).string() << "\n";
}

MetricsReport run_eval(const RunConfig& config, std::ostream& out, std::ostream& log) {
  StageTimer timer(log, "eval");
  const Workdir w{config.workdir};
  require(w.test_data(), "gtr build-dataset");
  require(w.predictions(config.mode), "gtr infer");
  const auto cases = load_test_cases(w);
  const MetricsReport report = evaluate(join_predictions(cases, read_jsonl(w.predictions(config.mode))), config.ks);
  write_report(w, config.mode, report, out);
  return report;
}

std::vector<MetricsReport> run_ablate(const RunConfig& config, const std::vector<InferenceMode>& modes,
                                      std::ostream& out, std::ostream& log) {
  StageTimer timer(log, "ablate");
  const Workdir w{config.workdir};
  const SeqModelParams gen = load_model(w.gen_checkpoint(), "gtr train-gen");
  const SeqModelParams simm = load_model(w.sim_checkpoint(), "gtr train-sim");
  require(w.test_data(), "gtr build-dataset");
  const auto cases = load_test_cases(w);
  std::vector<MetricsReport> reports;
  for (InferenceMode mode : modes) {
    const auto results = run_inference(mode, gen, simm, cases, config.beam_k);
    write_predictions(w, mode, cases, results);
    reports.push_back(evaluate(results, config.ks));
    write_report(w, mode, reports.back(), out);
  }
  return reports;
}

void run_demo(const RunConfig& config, std::ostream& out, std::ostream& log) {
  StageTimer timer(log, "demo");
  RunConfig c = config;
  const Workdir w{c.workdir};
  c.corpus_root = w.corpus();
  SyntheticOptions options = c.synthetic;
  options.seed = c.seed;
  fs::remove_all(w.corpus());
  write_corpus(generate_synthetic_corpus(options), w.corpus());
  run_build_dataset(c, log);
  out << read_file(w.summary()) << "\n";
  run_train_generation(c, log);
  run_train_similarity(c, log);
  run_ablate(c, {InferenceMode::Full, InferenceMode::GeneratingOnly, InferenceMode::RankingOnly}, out, log);
}

// ---- command line ----

RunConfig resolve_config(const CliOptions& o, const char* env_seed) {
  RunConfig config = o.command == "demo" ? demo_config() : RunConfig{};
  if (!o.config_path.empty()) config = load_config(o.config_path, config);
  if (env_seed && *env_seed) config.seed = parse_number<std::uint64_t>("TIGER_SEED", env_seed);
  if (o.seed) config.seed = *o.seed;
  if (o.beam_k) config.beam_k = *o.beam_k;
  if (o.epochs) config.generation.epochs = config.similarity.epochs = *o.epochs;
  if (o.learning_rate) config.generation.learning_rate = config.similarity.learning_rate = *o.learning_rate;
  if (o.batch_size) config.generation.batch_size = config.similarity.batch_size = *o.batch_size;
  if (!o.mode.empty()) config.mode = inference_mode_from_string(o.mode);
  if (!o.workdir.empty()) config.workdir = o.workdir;
  if (!o.corpus.empty()) config.corpus_root = o.corpus;
  return config;
}

int run_cli(int argc, char** argv) {
  CLI::App app("Type inference for Python variables, arguments and returns", "gtr");
  CliOptions o;
  app.add_option("command", o.command, "build-dataset, train-gen, train-sim, infer, eval, ablate or demo")
      ->required()
      ->check(CLI::IsMember({"build-dataset", "train-gen", "train-sim", "infer", "eval", "ablate", "demo"}));
  app.add_option("--config", o.config_path, "settings file (key = value lines with [sections])");
  app.add_option("--seed", o.seed, "random seed (overrides TIGER_SEED and the config)");
  app.add_option("--beam-k", o.beam_k, "beam width / number of generated candidates")->check(CLI::PositiveNumber);
  app.add_option("--epochs", o.epochs, "epochs for both training stages")->check(CLI::NonNegativeNumber);
  app.add_option("--lr", o.learning_rate, "learning rate for both training stages")->check(CLI::PositiveNumber);
  app.add_option("--batch", o.batch_size, "batch size for both training stages")->check(CLI::PositiveNumber);
  app.add_option("--mode", o.mode, "full, generating-only or ranking-only")
      ->check(CLI::IsMember({"full", "generating-only", "ranking-only"}));
  app.add_option("--workdir", o.workdir, "directory for datasets, checkpoints and reports");
  app.add_option("--corpus", o.corpus, "corpus directory or JSONL file");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  const std::string& command = o.command;
  try {
    const RunConfig config = resolve_config(o, std::getenv("TIGER_SEED"));
    std::cerr << "[gtr] " << command << " seed=" << config.seed << " config_hash=" << hex64(config_hash(config))
              << " workdir=" << config.workdir.string() << "\n";
    if (command == "build-dataset") {
      run_build_dataset(config, std::cerr);
    } else if (command == "train-gen") {
      run_train_generation(config, std::cerr);
    } else if (command == "train-sim") {
      run_train_similarity(config, std::cerr);
    } else if (command == "infer") {
      run_infer(config, std::cerr);
    } else if (command == "eval") {
      run_eval(config, std::cout, std::cerr);
    } else if (command == "ablate") {
      std::vector<InferenceMode> modes = {InferenceMode::Full, InferenceMode::GeneratingOnly, InferenceMode::RankingOnly};
      if (!o.mode.empty()) modes = {config.mode};
      run_ablate(config, modes, std::cout, std::cerr);
    } else {
      run_demo(config, std::cout, std::cerr);
    }
  } catch (const ConfigError& e) {
    std::cerr << "gtr: " << e.what() << "\n";
    return 2;
  } catch (const MissingPrerequisite& e) {
    std::cerr << "gtr: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "gtr: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace gtr
