#include "gtr/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "gtr/errors.hpp"

namespace gtr {
namespace {

struct CueGroup {
  const char* type;
  std::vector<const char*> cues;
};

const std::vector<CueGroup>& cue_groups() {
  static const std::vector<CueGroup> groups = {
      {"int", {"count_items", "parse_port", "compute_total"}},
      {"str", {"format_title", "read_label", "join_words"}},
      {"float", {"compute_ratio", "average_score"}},
      {"bool", {"is_enabled", "has_access"}},
      {"bytes", {"encode_payload", "read_blob"}},
      {"List[int]", {"collect_ids", "list_sizes"}},
      {"List[str]", {"split_words", "collect_names"}},
      {"Dict[str, int]", {"count_words", "build_histogram"}},
      {"Dict[str, Any]", {"load_config", "parse_json"}},
      {"Optional[str]", {"find_label", "lookup_name"}},
      {"Optional[int]", {"find_index"}},
      {"Tuple[int, int]", {"get_shape", "read_pair"}},
      {"Set[str]", {"unique_tags"}},
  };
  return groups;
}

const std::vector<std::string> kSeenNames = {
    "Account",  "Invoice", "Customer", "Order",   "Ledger",   "Shipment", "Product",  "Catalog",
    "Payment",  "Receipt", "Vendor",   "Ticket",  "Booking",  "Profile",  "Document", "Report",
    "Schedule", "Channel", "Message",  "Playlist", "Track",   "Sensor",   "Reading",  "Gateway",
    "Device",   "Member",  "Policy",   "Claim",   "Portfolio", "Asset",   "Trade",    "Quote",
    "Route",    "Vehicle", "Driver",   "Lesson",  "Course",   "Tenant",   "Contract", "Budget"};

const std::vector<std::string> kLocalNames = {
    "Aurora", "Beacon",  "Cinder", "Dynamo", "Ember",   "Falcon", "Garnet", "Helix",   "Iris",   "Jasper",
    "Kestrel", "Lumen",  "Magnet", "Nimbus", "Onyx",    "Pylon",  "Quill",  "Raven",   "Saffron", "Talon",
    "Umber",  "Vortex",  "Willow", "Xenon",  "Yarrow",  "Zenith", "Anchor", "Bramble", "Comet",  "Delta",
    "Echo",   "Fjord",   "Geyser", "Hollow", "Ingot",   "Juniper", "Kiln",  "Lagoon",  "Mosaic", "Nectar",
    "Opal",   "Prism",   "Quartz", "Ripple", "Summit",  "Thistle", "Upland", "Vesper"};

const std::vector<std::string> kUnseenNames = {"Nebula", "Quasar", "Lantern", "Orchard", "Glacier", "Harbor"};

const std::vector<std::string> kVerbs = {"handle", "process", "run",     "apply", "update",
                                         "check",  "prepare", "resolve", "sync",  "render"};
const std::vector<std::string> kNouns = {"data",  "request", "batch", "job",    "event",
                                         "task",  "input",   "entry", "record", "message"};
const std::vector<std::string> kArgs = {"data", "raw", "value", "item", "payload", "record", "entry", "text", "source", "blob"};
const std::vector<std::string> kExtras = {"options", "context", "flag", "extra", "limit"};
const std::vector<std::string> kLocals = {"result", "out", "parsed", "current", "found", "answer"};

enum class Kind { Local, Arg, Ret };

class Writer {
 public:
  explicit Writer(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

  Kind kind() {
    const auto r = below(4);
    return r < 2 ? Kind::Local : (r == 2 ? Kind::Arg : Kind::Ret);
  }

  std::string noise(const std::string& arg) {
    std::string out;
    const auto n = below(3);
    for (std::size_t i = 0; i < n; ++i) {
      switch (below(5)) {
        case 0: out += "    if " + arg + " is None:\n        return None\n"; break;
        case 1: out += "    logger.debug(\"" + pick(kVerbs) + "\")\n"; break;
        case 2: out += "    size = len(" + arg + ")\n"; break;
        case 3: out += "    for piece in " + arg + ":\n        pass\n"; break;
        default: out += "    assert " + arg + "\n"; break;
      }
    }
    return out;
  }

  std::vector<std::string> function_names(std::size_t n) {
    std::vector<std::string> all;
    for (const auto& v : kVerbs)
      for (const auto& noun : kNouns) all.push_back(v + "_" + noun);
    for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[below(i)]);
    if (n > all.size()) throw Error("too many functions per file for the synthetic name pool");
    all.resize(n);
    return all;
  }

  // One function whose single annotation is `type`, fixed by `cue`.
  std::string builtin_function(const std::string& name, const std::string& type, const std::string& cue) {
    const std::string a = pick(kArgs);
    switch (kind()) {
      case Kind::Local: {
        const std::string v = pick(kLocals);
        return "def " + name + "(" + a + "):\n" + noise(a) + "    " + v + ": " + type + " = " + cue + "(" + a +
               ")\n    return " + v + "\n";
      }
      case Kind::Arg: {
        const std::string b = pick(kExtras);
        return "def " + name + "(" + a + ": " + type + ", " + b + "):\n" + noise(a) + "    " + cue + "(" + a +
               ")\n    return " + b + "\n";
      }
      case Kind::Ret:
        return "def " + name + "(" + a + ") -> " + type + ":\n" + noise(a) + "    return " + cue + "(" + a + ")\n";
    }
    return {};
  }

  std::string user_function(const std::string& name, const std::string& type) {
    const std::string a = pick(kArgs);
    switch (kind()) {
      case Kind::Local: {
        const std::string v = pick(kLocals);
        return "def " + name + "(" + a + "):\n" + noise(a) + "    " + v + ": " + type + " = " + type + "(" + a +
               ")\n    return " + v + "\n";
      }
      case Kind::Arg:
        return "def " + name + "(" + a + ": " + type + "):\n" + noise(a) + "    assert isinstance(" + a + ", " +
               type + ")\n    return " + a + ".raw\n";
      case Kind::Ret:
        return "def " + name + "(" + a + ") -> " + type + ":\n" + noise(a) + "    return " + type + ".from_raw(" + a +
               ")\n";
    }
    return {};
  }

  std::string builtin_any() {
    const auto& g = pick(cue_groups());
    cue_ = g.cues[below(g.cues.size())];
    return g.type;
  }
  const std::string& last_cue() const { return cue_; }

 private:
  std::mt19937_64 rng_;
  std::string cue_;
};

constexpr const char* kTypingImport = "from typing import Any, Dict, List, Optional, Set, Tuple\n";

std::string models_file(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    out += "class " + n + ":\n    def __init__(self, raw):\n        self.raw = raw\n\n";
    out += "    @classmethod\n    def from_raw(cls, raw):\n        return cls(raw)\n\n\n";
  }
  return out;
}

}  // namespace

const std::map<std::string, std::string>& synthetic_cue_table() {
  static const std::map<std::string, std::string> table = [] {
    std::map<std::string, std::string> t;
    for (const auto& g : cue_groups())
      for (const char* c : g.cues) t[c] = g.type;
    return t;
  }();
  return table;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticOptions& options) {
  if (options.functions_per_project < 8) throw Error("synthetic projects need at least 8 functions");
  if (options.projects_with_unseen > options.test_projects ||
      options.projects_with_unseen > static_cast<int>(kUnseenNames.size()))
    throw Error("too many projects with unseen types");
  Writer w(options.seed);
  SyntheticCorpus corpus;
  corpus.seen_type_names = kSeenNames;
  corpus.unseen_type_names.assign(kUnseenNames.begin(), kUnseenNames.begin() + options.projects_with_unseen);

  const int total = options.train_projects + options.test_projects;
  const std::size_t per = static_cast<std::size_t>(options.functions_per_project);
  const std::size_t user_functions = per / 3;
  const std::size_t service_builtin = per / 12;
  const std::size_t helper_functions = per - user_functions - service_builtin;

  std::vector<std::string> deck = kSeenNames;
  for (std::size_t i = deck.size(); i > 1; --i) std::swap(deck[i - 1], deck[w.below(i)]);

  for (int p = 0; p < total; ++p) {
    const bool test = p >= options.train_projects;
    char dir[32];
    std::snprintf(dir, sizeof dir, "%s/proj_%02d/", test ? "test" : "train", p);

    std::vector<std::string> names;
    if (test) {
      std::set<std::string> taken;
      while (names.size() < 5) {
        const auto& n = w.pick(kSeenNames);
        if (taken.insert(n).second) names.push_back(n);
      }
      const int test_index = p - options.train_projects;
      if (test_index < options.projects_with_unseen) names[0] = kUnseenNames[static_cast<std::size_t>(test_index)];
    } else {
      // Consecutive slices of a shuffled cycle spread the shared names evenly.
      for (std::size_t j = 0; j < 4; ++j) names.push_back(deck[(4 * static_cast<std::size_t>(p) + j) % deck.size()]);
      std::string own = kLocalNames[static_cast<std::size_t>(p) % kLocalNames.size()];
      if (static_cast<std::size_t>(p) >= kLocalNames.size()) own += std::to_string(p / static_cast<int>(kLocalNames.size()));
      corpus.project_type_names.push_back(own);
      names.push_back(own);
    }
    std::sort(names.begin(), names.end());
    corpus.files[std::string(dir) + "models.py"] = models_file(names);

    std::string service = kTypingImport;
    if (w.below(10) < 7) {
      service += "from models import ";
      for (std::size_t i = 0; i < names.size(); ++i) service += (i ? ", " : "") + names[i];
      service += "\n";
    } else {
      service += "from models import *\n";
    }
    service += "\n\n";
    const auto service_names = w.function_names(user_functions + service_builtin);
    for (std::size_t i = 0; i < user_functions; ++i)
      service += w.user_function(service_names[i], names[i % names.size()]) + "\n\n";
    for (std::size_t i = user_functions; i < service_names.size(); ++i) {
      const std::string type = w.builtin_any();
      service += w.builtin_function(service_names[i], type, w.last_cue()) + "\n\n";
    }
    corpus.files[std::string(dir) + "service.py"] = service;

    std::string helpers = kTypingImport + std::string("\n\n");
    const auto helper_names = w.function_names(helper_functions);
    for (const auto& name : helper_names) {
      const std::string type = w.builtin_any();
      helpers += w.builtin_function(name, type, w.last_cue()) + "\n\n";
    }
    corpus.files[std::string(dir) + "helpers.py"] = helpers;
  }
  return corpus;
}

void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& root) {
  for (const auto& [rel, text] : corpus.files) {
    const auto path = root / rel;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
  }
}

}  // namespace gtr
