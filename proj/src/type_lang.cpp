#include "gtr/type_lang.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "gtr/errors.hpp"

namespace gtr {
namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}

bool is_ident_char(char c) {
  return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

class TypeParser {
 public:
  explicit TypeParser(std::string_view text) : text_(text) {}

  TypeExpr parse_all() {
    TypeExpr t = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character");
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("type '" + std::string(text_) + "': " + what + " at offset " +
                     std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::vector<TypeExpr> parse_list(char close) {
    std::vector<TypeExpr> items;
    if (peek(close)) return items;
    while (true) {
      if (peek(',') || peek(close)) fail("empty parameter");
      items.push_back(parse_expr());
      if (peek(',')) {
        ++pos_;
        continue;
      }
      break;
    }
    return items;
  }

  TypeExpr parse_expr() {
    TypeExpr t = parse_atom();
    if (peek('[')) {
      if (t.base == "[]") fail("subscripted list literal");
      ++pos_;
      t.params = parse_list(']');
      if (t.params.empty()) fail("empty parameter list");
      expect(']');
    }
    return t;
  }

  TypeExpr parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end");
    const char c = text_[pos_];
    if (c == '[') {
      ++pos_;
      TypeExpr list{"[]", parse_list(']')};
      expect(']');
      return list;
    }
    if (c == '\'' || c == '"') {
      const std::size_t close = text_.find(c, pos_ + 1);
      if (close == std::string_view::npos) fail("unterminated string");
      const std::string_view inner = text_.substr(pos_ + 1, close - pos_ - 1);
      pos_ = close + 1;
      return TypeParser(inner).parse_all();
    }
    if (text_.substr(pos_, 3) == "...") {
      pos_ += 3;
      return TypeExpr{"...", {}};
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
      const std::size_t start = pos_++;
      while (pos_ < text_.size() && (is_ident_char(text_[pos_]) || text_[pos_] == '.')) ++pos_;
      return TypeExpr{std::string(text_.substr(start, pos_ - start)), {}};
    }
    if (!is_ident_start(c)) fail("expected a name");
    const std::size_t start = pos_;
    while (true) {
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      if (pos_ + 1 < text_.size() && text_[pos_] == '.' && is_ident_start(text_[pos_ + 1])) {
        ++pos_;
        continue;
      }
      break;
    }
    return TypeExpr{std::string(text_.substr(start, pos_ - start)), {}};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

const std::unordered_map<std::string_view, std::string_view>& alias_table() {
  static const std::unordered_map<std::string_view, std::string_view> table = {
      {"List", "list"},         {"Dict", "dict"},   {"Set", "set"},
      {"FrozenSet", "frozenset"}, {"Tuple", "tuple"}, {"Type", "type"},
      {"NoneType", "None"},
  };
  return table;
}

std::string normalize_name(std::string_view name) {
  for (std::string_view prefix : {"typing_extensions.", "typing.", "builtins."}) {
    if (name.substr(0, prefix.size()) == prefix) {
      name.remove_prefix(prefix.size());
      break;
    }
  }
  const auto& aliases = alias_table();
  if (auto it = aliases.find(name); it != aliases.end()) return std::string(it->second);
  return std::string(name);
}

const std::unordered_set<std::string_view>& builtin_names() {
  static const std::unordered_set<std::string_view> names = {
      "int",        "str",           "float",          "bool",       "bytes",
      "None",       "complex",       "object",         "bytearray",  "list",
      "dict",       "set",           "tuple",          "frozenset",  "type",
      "Optional",   "Union",         "Any",            "Callable",   "Iterable",
      "Iterator",   "Sequence",      "Mapping",        "MutableMapping",
      "MutableSequence", "MutableSet", "Generator",    "AsyncIterator",
      "AsyncGenerator",  "AsyncIterable", "Awaitable", "Coroutine",  "Literal",
      "NoReturn",   "Collection",    "Container",      "Hashable",   "Sized",
      "Reversible", "DefaultDict",   "OrderedDict",    "Counter",    "Deque",
      "ChainMap",   "ClassVar",      "Final",          "Annotated",  "TypeVar",
      "Pattern",    "Match",         "IO",             "TextIO",     "BinaryIO",
      "AnyStr",     "Text",          "SupportsInt",    "SupportsFloat",
      "defaultdict", "deque",        "[]",             "...",
  };
  return names;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

const char* to_string(TypeCategory c) {
  switch (c) {
    case TypeCategory::Elementary: return "Elementary";
    case TypeCategory::Generic: return "Generic";
    case TypeCategory::UserDefined: return "UserDefined";
  }
  return "?";
}

TypeCategory category_from_string(std::string_view s) {
  if (s == "Elementary") return TypeCategory::Elementary;
  if (s == "Generic") return TypeCategory::Generic;
  if (s == "UserDefined") return TypeCategory::UserDefined;
  throw ParseError("unknown type category '" + std::string(s) + "'");
}

TypeExpr parse_type(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ParseError("empty type text");
  }
  return TypeParser(text).parse_all();
}

std::optional<TypeExpr> try_parse_type(std::string_view text) {
  try {
    return parse_type(text);
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

TypeExpr normalize(const TypeExpr& t) {
  TypeExpr out;
  out.base = normalize_name(t.base);
  out.params.reserve(t.params.size());
  for (const auto& p : t.params) out.params.push_back(normalize(p));
  return out;
}

std::string render(const TypeExpr& t) {
  std::string out;
  const bool list_literal = t.base == "[]";
  if (!list_literal) out = t.base;
  if (!t.params.empty() || list_literal) {
    out += '[';
    for (std::size_t i = 0; i < t.params.size(); ++i) {
      if (i) out += ", ";
      out += render(t.params[i]);
    }
    out += ']';
  }
  return out;
}

std::string canonical_text(std::string_view text) { return render(normalize(parse_type(text))); }

std::string normalize_type_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space && is_ident_char(out.back()) && is_ident_char(c)) out += ' ';
    pending_space = false;
    if (!out.empty() && out.back() == ' ' && c == ']') out.pop_back();
    out += c;
    if (c == ',') out += ' ';
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string_view final_segment(std::string_view name) {
  const std::size_t dot = name.rfind('.');
  if (dot == std::string_view::npos || name == "...") return name;
  return name.substr(dot + 1);
}

std::string base_of(const TypeExpr& t) { return normalize_name(t.base); }

bool is_builtin_name(std::string_view normalized_name) {
  const auto& names = builtin_names();
  if (names.contains(normalized_name)) return true;
  for (std::string_view module : {"collections.abc.", "collections."}) {
    if (normalized_name.substr(0, module.size()) == module) {
      return names.contains(normalized_name.substr(module.size()));
    }
  }
  return false;
}

TypeCategory classify(const TypeExpr& t) {
  if (!t.params.empty()) return TypeCategory::Generic;
  if (is_builtin_name(base_of(t))) return TypeCategory::Elementary;
  return TypeCategory::UserDefined;
}

bool is_admissible(const TypeExpr& t, const VisibleTypeSet& visible) {
  const std::string base = base_of(t);
  if (is_builtin_name(base)) return true;
  return visible.contains(base);
}

namespace {

bool names_equal(std::string_view a, std::string_view b) {
  return final_segment(a) == final_segment(b);
}

bool trees_equal(const TypeExpr& a, const TypeExpr& b) {
  if (!names_equal(a.base, b.base) || a.params.size() != b.params.size()) return false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    if (!trees_equal(a.params[i], b.params[i])) return false;
  }
  return true;
}

}  // namespace

MatchResult match(const TypeExpr& pred, const TypeExpr& gold) {
  const TypeExpr p = normalize(pred);
  const TypeExpr g = normalize(gold);
  MatchResult r;
  r.base = names_equal(p.base, g.base);
  r.exact = r.base && trees_equal(p, g);
  return r;
}

// VisibleTypeSet ------------------------------------------------------------

void VisibleTypeSet::add(const std::string& name, Provenance origin) {
  auto [it, inserted] = provenance.emplace(name, origin);
  if (!inserted && origin == Provenance::SameFile) it->second = Provenance::SameFile;
}

bool VisibleTypeSet::contains(const std::string& name) const {
  if (provenance.contains(name)) return true;
  const std::string_view tail = final_segment(name);
  return std::any_of(provenance.begin(), provenance.end(),
                     [&](const auto& kv) { return final_segment(kv.first) == tail; });
}

std::vector<std::string> VisibleTypeSet::names() const {
  std::vector<std::string> out;
  out.reserve(provenance.size());
  for (const auto& [name, origin] : provenance) out.push_back(name);
  return out;
}

const char* to_string(Provenance p) { return p == Provenance::SameFile ? "SameFile" : "Imported"; }

}  // namespace gtr
