#include "gtr/import_analysis.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "gtr/errors.hpp"
#include "gtr/type_lang.hpp"

namespace gtr {
namespace fs = std::filesystem;
namespace {

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}

bool starts_with_word(std::string_view s, std::string_view word) {
  return s.substr(0, word.size()) == word && (s.size() == word.size() || !is_ident_char(s[word.size()]));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string strip_comment(std::string_view s) {
  std::string out;
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote) {
      if (c == '\\') {
        out += c;
        if (i + 1 < s.size()) out += s[++i];
        continue;
      }
      if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == '#') {
      // Comments inside a parenthesised import run to the end of the line.
      while (i < s.size() && s[i] != '\n') ++i;
      out += '\n';
      continue;
    }
    out += c;
  }
  return out;
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      parts.emplace_back(trim(cur));
      cur.clear();
    } else if (c != '(' && c != ')' && c != '\\') {
      cur += c;
    }
  }
  parts.emplace_back(trim(cur));
  parts.erase(std::remove(parts.begin(), parts.end(), std::string()), parts.end());
  return parts;
}

// "name as alias" -> (name, alias)
std::pair<std::string, std::string> split_alias(std::string_view item) {
  std::istringstream in{std::string(item)};
  std::string name, as, alias;
  in >> name >> as >> alias;
  if (as == "as" && !alias.empty()) return {name, alias};
  return {name, name};
}

bool is_type_alias(std::string_view name, std::string_view rhs) {
  if (name.empty() || !std::isupper(static_cast<unsigned char>(name.front()))) return false;
  if (std::none_of(name.begin(), name.end(), [](char c) { return std::islower(static_cast<unsigned char>(c)); })) {
    return false;
  }
  rhs = trim(rhs);
  if (rhs.empty() || rhs.front() == '\'' || rhs.front() == '"' ||
      std::isdigit(static_cast<unsigned char>(rhs.front())) || rhs.front() == '-' || rhs.front() == '[') {
    return false;
  }
  const auto parsed = try_parse_type(rhs);
  if (!parsed) return false;
  const TypeExpr t = normalize(*parsed);
  const std::string base = base_of(t);
  if (!t.params.empty() || is_builtin_name(base)) return true;
  const std::string_view last = final_segment(base);
  return !last.empty() && std::isupper(static_cast<unsigned char>(last.front()));
}

bool is_typing_module(std::string_view module) {
  return module == "typing" || module == "typing_extensions" || module == "collections.abc" ||
         module == "builtins" || module == "__future__";
}

std::string parent_dir(const std::string& path) {
  const auto slash = path.rfind('/');
  return slash == std::string::npos ? std::string() : path.substr(0, slash);
}

std::string join(const std::string& dir, const std::string& rest) {
  if (dir.empty()) return rest;
  if (rest.empty()) return dir;
  return dir + "/" + rest;
}

std::string dotted_to_path(std::string_view dotted) {
  std::string out(dotted);
  std::replace(out.begin(), out.end(), '.', '/');
  return out;
}

std::optional<std::string> module_file(const std::map<std::string, FileIndex>& files,
                                       const std::string& base) {
  if (base.empty()) {
    if (files.contains("__init__.py")) return "__init__.py";
    return std::nullopt;
  }
  for (const std::string& candidate : {base + ".py", base + "/__init__.py"}) {
    if (files.contains(candidate)) return candidate;
  }
  return std::nullopt;
}

// Resolves a (possibly relative) dotted module name to an indexed file.
std::optional<std::string> resolve_module(const std::map<std::string, FileIndex>& files,
                                          const std::string& importing_file,
                                          std::string_view module) {
  std::string dir = parent_dir(importing_file);
  if (!module.empty() && module.front() == '.') {
    std::size_t dots = 0;
    while (dots < module.size() && module[dots] == '.') ++dots;
    for (std::size_t up = 1; up < dots; ++up) dir = parent_dir(dir);
    return module_file(files, join(dir, dotted_to_path(module.substr(dots))));
  }
  const std::string rel = dotted_to_path(module);
  std::vector<std::string> roots{dir};
  const auto slash = importing_file.find('/');
  if (slash != std::string::npos) roots.push_back(importing_file.substr(0, slash));
  roots.emplace_back();
  for (const auto& root : roots) {
    if (auto hit = module_file(files, join(root, rel))) return hit;
  }
  return std::nullopt;
}

std::string submodule_name(std::string_view module, std::string_view name) {
  if (!module.empty() && module.back() == '.') return std::string(module) + std::string(name);
  return std::string(module) + "." + std::string(name);
}

void parse_import(std::string_view stmt, std::vector<ImportRecord>& out) {
  const std::string text = strip_comment(stmt);
  std::string_view s = trim(text);
  if (starts_with_word(s, "import")) {
    for (const auto& item : split_commas(s.substr(6))) {
      auto [module, alias] = split_alias(item);
      ImportRecord rec;
      rec.module = module;
      rec.module_alias = alias;
      out.push_back(std::move(rec));
    }
    return;
  }
  if (!starts_with_word(s, "from")) return;
  s = trim(s.substr(4));
  std::size_t mod_end = 0;
  while (mod_end < s.size() && !std::isspace(static_cast<unsigned char>(s[mod_end]))) ++mod_end;
  ImportRecord rec;
  rec.module = std::string(s.substr(0, mod_end));
  s = trim(s.substr(mod_end));
  if (!starts_with_word(s, "import")) return;
  s = trim(s.substr(6));
  if (s == "*") {
    rec.star = true;
  } else {
    for (const auto& item : split_commas(s)) rec.names.push_back(split_alias(item));
  }
  out.push_back(std::move(rec));
}

}  // namespace

FileIndex scan_file(std::string_view source) {
  FileIndex out;
  std::set<std::string> defined;
  const auto lines = pysrc::logical_lines(source);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& ll = lines[i];
    const std::string_view stmt = source.substr(ll.begin, ll.end - ll.begin);
    const bool is_def = starts_with_word(stmt, "def") ||
                        (starts_with_word(stmt, "async") && stmt.find("def") != std::string_view::npos);
    if (is_def) {
      while (i + 1 < lines.size() && lines[i + 1].indent > ll.indent) ++i;
      continue;
    }
    if (starts_with_word(stmt, "class")) {
      std::size_t p = 5;
      while (p < stmt.size() && std::isspace(static_cast<unsigned char>(stmt[p]))) ++p;
      std::size_t e = p;
      while (e < stmt.size() && is_ident_char(stmt[e])) ++e;
      if (e > p) defined.insert(std::string(stmt.substr(p, e - p)));
      continue;
    }
    if (starts_with_word(stmt, "import") || starts_with_word(stmt, "from")) {
      parse_import(stmt, out.imports);
      continue;
    }
    if (ll.indent == 0) {
      std::size_t e = 0;
      while (e < stmt.size() && is_ident_char(stmt[e])) ++e;
      std::size_t eq = e;
      while (eq < stmt.size() && (stmt[eq] == ' ' || stmt[eq] == '\t')) ++eq;
      if (e > 0 && eq < stmt.size() && stmt[eq] == '=' && (eq + 1 >= stmt.size() || stmt[eq + 1] != '=')) {
        const std::string rhs = strip_comment(stmt.substr(eq + 1));
        const std::string_view name = stmt.substr(0, e);
        if (is_type_alias(name, rhs)) defined.insert(std::string(name));
      }
    }
  }
  out.defined_types.assign(defined.begin(), defined.end());
  return out;
}

ProjectIndex index_sources(const std::map<std::string, std::string>& sources) {
  ProjectIndex index;
  for (const auto& [path, text] : sources) index.files[path] = scan_file(text);
  for (auto& [path, file] : index.files) {
    for (auto& rec : file.imports) rec.resolved = resolve_module(index.files, path, rec.module);
  }
  return index;
}

ProjectIndex index_project(const fs::path& root) {
  std::map<std::string, std::string> sources;
  std::vector<Diagnostic> diagnostics;
  std::vector<fs::path> paths;
  std::error_code ec;
  for (fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec), end;
       it != end; it.increment(ec)) {
    if (ec) break;
    if (it->is_regular_file(ec) && it->path().extension() == ".py") paths.push_back(it->path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    const std::string rel = fs::relative(p, root).generic_string();
    std::ifstream in(p, std::ios::binary);
    if (!in) {
      diagnostics.push_back({rel, "unreadable file"});
      continue;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    sources[rel] = buf.str();
  }
  ProjectIndex index = index_sources(sources);
  index.diagnostics = std::move(diagnostics);
  return index;
}

VisibleTypeSet visible_types(const ProjectIndex& index, const std::string& file) {
  const auto it = index.files.find(file);
  if (it == index.files.end()) throw FileNotIndexed("file not indexed: " + file);
  VisibleTypeSet visible;
  for (const auto& name : it->second.defined_types) visible.add(name, Provenance::SameFile);

  auto add_module_types = [&](const std::string& target, const std::string& prefix) {
    for (const auto& t : index.files.at(target).defined_types) {
      visible.add(prefix.empty() ? t : prefix + "." + t, Provenance::Imported);
    }
  };

  for (const auto& rec : it->second.imports) {
    if (!rec.names.empty() || rec.star) {
      if (rec.star) {
        if (rec.resolved) add_module_types(*rec.resolved, "");
        continue;
      }
      for (const auto& [name, alias] : rec.names) {
        if (rec.resolved) {
          const auto& defined = index.files.at(*rec.resolved).defined_types;
          if (std::binary_search(defined.begin(), defined.end(), name)) {
            visible.add(alias, Provenance::Imported);
            continue;
          }
        }
        if (auto sub = resolve_module(index.files, file, submodule_name(rec.module, name))) {
          add_module_types(*sub, alias);
          continue;
        }
        // External module: keep class-like names as opaque user-defined types.
        if (!rec.resolved && !is_typing_module(rec.module) && !alias.empty() &&
            std::isupper(static_cast<unsigned char>(alias.front())) && !is_builtin_name(alias)) {
          visible.add(alias, Provenance::Imported);
        }
      }
    } else if (rec.resolved) {
      add_module_types(*rec.resolved, rec.module_alias);
    }
  }
  return visible;
}

nlohmann::json to_json(const ProjectIndex& index) {
  nlohmann::json files = nlohmann::json::object();
  for (const auto& [path, file] : index.files) {
    nlohmann::json imports = nlohmann::json::array();
    for (const auto& rec : file.imports) {
      nlohmann::json names = nlohmann::json::array();
      for (const auto& [name, alias] : rec.names) names.push_back({name, alias});
      imports.push_back({{"module", rec.module},
                         {"names", names},
                         {"star", rec.star},
                         {"alias", rec.module_alias},
                         {"resolved", rec.resolved ? nlohmann::json(*rec.resolved) : nlohmann::json()}});
    }
    files[path] = {{"defined_types", file.defined_types}, {"imports", imports}};
  }
  return {{"files", files}};
}

ProjectIndex project_index_from_json(const nlohmann::json& j) {
  ProjectIndex index;
  for (const auto& [path, file] : j.at("files").items()) {
    FileIndex fi;
    fi.defined_types = file.at("defined_types").get<std::vector<std::string>>();
    for (const auto& r : file.at("imports")) {
      ImportRecord rec;
      rec.module = r.at("module").get<std::string>();
      for (const auto& n : r.at("names")) rec.names.emplace_back(n.at(0).get<std::string>(), n.at(1).get<std::string>());
      rec.star = r.at("star").get<bool>();
      rec.module_alias = r.at("alias").get<std::string>();
      if (!r.at("resolved").is_null()) rec.resolved = r.at("resolved").get<std::string>();
      fi.imports.push_back(std::move(rec));
    }
    index.files[path] = std::move(fi);
  }
  return index;
}

}  // namespace gtr
