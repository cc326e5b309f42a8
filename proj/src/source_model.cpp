#include "gtr/source_model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>

#include "gtr/errors.hpp"

namespace gtr {
namespace pysrc {
namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}

bool is_ident_char(char c) {
  return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

bool is_hspace(char c) { return c == ' ' || c == '\t' || c == '\f' || c == '\r'; }

constexpr std::array<std::string_view, 37> kKeywords = {
    "False", "None",   "True",     "and",   "as",     "assert", "async", "await",
    "break", "class",  "continue", "def",   "del",    "elif",   "else",  "except",
    "finally", "for",  "from",     "global", "if",    "import", "in",    "is",
    "lambda", "nonlocal", "not",   "or",    "pass",   "raise",  "return", "try",
    "while", "with",   "yield",    "print", "exec"};

bool is_keyword(std::string_view word) {
  // print/exec are included so Python 2 statements are never read as bindings.
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

// Skips a string literal starting at `k` (which holds the quote). Returns the
// offset after the closing quote, or text.size() when unterminated.
std::size_t skip_string(std::string_view text, std::size_t k, bool* unterminated) {
  const char q = text[k];
  const bool triple = text.substr(k, 3) == std::string(3, q);
  std::size_t i = k + (triple ? 3 : 1);
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\\') {
      i += 2;
      continue;
    }
    if (triple) {
      if (text.substr(i, 3) == std::string(3, q)) return i + 3;
    } else {
      if (c == q) return i + 1;
      if (c == '\n') {
        *unterminated = true;
        return i;
      }
    }
    ++i;
  }
  *unterminated = true;
  return text.size();
}

std::size_t skip_hspace(std::string_view text, std::size_t i, std::size_t end) {
  while (i < end && is_hspace(text[i])) ++i;
  return i;
}

std::size_t read_ident(std::string_view text, std::size_t i, std::size_t end) {
  if (i >= end || !is_ident_start(text[i])) return i;
  while (i < end && is_ident_char(text[i])) ++i;
  return i;
}

bool starts_with_word(std::string_view stmt, std::string_view word) {
  return stmt.substr(0, word.size()) == word &&
         (stmt.size() == word.size() || !is_ident_char(stmt[word.size()]));
}

bool is_def_line(std::string_view stmt) {
  if (starts_with_word(stmt, "def")) return true;
  if (starts_with_word(stmt, "async")) {
    std::size_t i = skip_hspace(stmt, 5, stmt.size());
    return starts_with_word(stmt.substr(i), "def");
  }
  return false;
}

bool is_class_line(std::string_view stmt) { return starts_with_word(stmt, "class"); }

// Scans [begin, end) for `target` at bracket depth zero outside strings and
// comments. Returns end when absent. Comparison operators and ":=" never match
// '=' or ':'.
std::size_t find_top_level(std::string_view text, std::size_t begin, std::size_t end, char target) {
  int depth = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const char c = text[i];
    if (c == '\'' || c == '"') {
      bool unterminated = false;
      i = skip_string(text, i, &unterminated) - 1;
      continue;
    }
    if (c == '#') {
      while (i < end && text[i] != '\n') ++i;
      if (i >= end) return end;
      continue;
    }
    if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if (c == ')' || c == ']' || c == '}') {
      depth = std::max(0, depth - 1);
    } else if (depth == 0 && c == target) {
      if (target == '=') {
        const char prev = i > begin ? text[i - 1] : ' ';
        const char next = i + 1 < end ? text[i + 1] : ' ';
        if (next == '=' || prev == '=' || prev == '<' || prev == '>' || prev == '!' ||
            prev == ':') {
          if (next == '=') ++i;
          continue;
        }
      }
      if (target == ':' && i + 1 < end && text[i + 1] == '=') continue;
      return i;
    }
  }
  return end;
}

// Offset of the first '#' outside strings in [begin, end), or end.
std::size_t strip_comment(std::string_view text, std::size_t begin, std::size_t end) {
  for (std::size_t i = begin; i < end; ++i) {
    if (text[i] == '\'' || text[i] == '"') {
      bool unterminated = false;
      i = skip_string(text, i, &unterminated) - 1;
      continue;
    }
    if (text[i] == '#') return i;
  }
  return end;
}

Span trimmed(std::string_view text, std::size_t begin, std::size_t end) {
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return {begin, end};
}

int line_of(std::string_view text, std::size_t offset) {
  return static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

std::vector<Span> split_top_level(std::string_view text, std::size_t begin, std::size_t end,
                                  char sep) {
  std::vector<Span> parts;
  std::size_t start = begin;
  while (true) {
    const std::size_t at = find_top_level(text, start, end, sep);
    parts.push_back({start, at});
    if (at >= end) break;
    start = at + 1;
  }
  return parts;
}

void parse_binding(std::string_view text, Span stmt, FunctionSites& sites) {
  std::size_t i = skip_hspace(text, stmt.begin, stmt.end);
  const std::size_t name_end = read_ident(text, i, stmt.end);
  if (name_end == i) return;
  const std::string name(text.substr(i, name_end - i));
  if (is_keyword(name)) return;
  std::size_t j = skip_hspace(text, name_end, stmt.end);
  if (j >= stmt.end) return;
  LocalSite site{name, name_end, {}, line_of(text, i)};
  if (text[j] == ':' && (j + 1 >= stmt.end || text[j + 1] != '=')) {
    const std::size_t eq = find_top_level(text, j + 1, stmt.end, '=');
    const std::size_t ann_end = strip_comment(text, j + 1, eq);
    site.annotation = trimmed(text, j + 1, ann_end);
    if (site.annotation.empty()) return;
  } else if (text[j] == '=' && (j + 1 >= stmt.end || text[j + 1] != '=')) {
    // plain binding
  } else {
    return;
  }
  sites.locals.push_back(std::move(site));
}

}  // namespace

std::vector<LogicalLine> logical_lines(std::string_view src) {
  std::vector<LogicalLine> out;
  std::size_t i = 0;
  int line = 0;
  while (i < src.size()) {
    std::size_t j = i;
    int indent = 0;
    while (j < src.size() && (src[j] == ' ' || src[j] == '\t' || src[j] == '\f')) {
      indent = src[j] == '\t' ? (indent / 8 + 1) * 8 : indent + 1;
      ++j;
    }
    if (j >= src.size()) break;
    if (src[j] == '\n' || src[j] == '\r' || src[j] == '#') {
      while (j < src.size() && src[j] != '\n') ++j;
      i = j + 1;
      ++line;
      continue;
    }
    LogicalLine ll;
    ll.begin = j;
    ll.indent = indent;
    ll.first_line = line;
    int depth = 0;
    std::size_t k = j;
    while (true) {
      if (k >= src.size()) {
        ll.end = src.size();
        ll.unterminated = ll.unterminated || depth > 0;
        break;
      }
      const char c = src[k];
      if (c == '#') {
        while (k < src.size() && src[k] != '\n') ++k;
        continue;
      }
      if (c == '\'' || c == '"') {
        bool unterminated = false;
        const std::size_t after = skip_string(src, k, &unterminated);
        line += static_cast<int>(std::count(src.begin() + k, src.begin() + after, '\n'));
        if (unterminated) ll.unterminated = true;
        k = after;
        continue;
      }
      if (c == '(' || c == '[' || c == '{') ++depth;
      if (c == ')' || c == ']' || c == '}') depth = std::max(0, depth - 1);
      if (c == '\\' && k + 1 < src.size() && src[k + 1] == '\n') {
        k += 2;
        ++line;
        continue;
      }
      if (c == '\n') {
        if (depth == 0) {
          ll.end = k;
          ++k;
          ++line;
          break;
        }
        // An open bracket followed by a new top-level definition means the
        // bracket was never closed; cut the statement here.
        const std::string_view next = src.substr(k + 1);
        if (is_def_line(next) || is_class_line(next) || next.substr(0, 1) == "@") {
          ll.end = k;
          ll.unterminated = true;
          ++k;
          ++line;
          break;
        }
        ++line;
      }
      ++k;
    }
    while (ll.end > ll.begin && std::isspace(static_cast<unsigned char>(src[ll.end - 1]))) {
      --ll.end;
    }
    ll.last_line = line_of(src.substr(0, ll.end), ll.end);
    out.push_back(ll);
    i = k;
  }
  return out;
}

FunctionSites analyze_function(std::string_view text) {
  FunctionSites sites;
  std::size_t i = skip_hspace(text, 0, text.size());
  if (starts_with_word(text.substr(i), "async")) i = skip_hspace(text, i + 5, text.size());
  if (!starts_with_word(text.substr(i), "def")) throw ParseError("expected 'def'");
  i = skip_hspace(text, i + 3, text.size());
  const std::size_t name_end = read_ident(text, i, text.size());
  if (name_end == i) throw ParseError("expected function name");
  i = skip_hspace(text, name_end, text.size());
  if (i >= text.size() || text[i] != '(') throw ParseError("expected '(' after function name");
  const std::size_t open = i;

  // Matching ')'.
  int depth = 0;
  std::size_t close = std::string_view::npos;
  for (std::size_t k = open; k < text.size(); ++k) {
    const char c = text[k];
    if (c == '\'' || c == '"') {
      bool unterminated = false;
      k = skip_string(text, k, &unterminated) - 1;
      if (unterminated) break;
      continue;
    }
    if (c == '#') {
      while (k < text.size() && text[k] != '\n') ++k;
      continue;
    }
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') {
      if (--depth == 0) {
        if (c != ')') break;
        close = k;
        break;
      }
    }
  }
  if (close == std::string_view::npos) throw ParseError("unbalanced parameter list");
  sites.close_paren = close;

  const auto chunks = split_top_level(text, open + 1, close, ',');
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const std::size_t comment_free_end = strip_comment(text, chunks[c].begin, chunks[c].end);
    Span chunk = trimmed(text, chunks[c].begin, comment_free_end);
    if (chunk.empty()) {
      // `f()` or a trailing comma.
      if (c + 1 == chunks.size()) continue;
      throw ParseError("empty parameter");
    }
    std::size_t p = chunk.begin;
    while (p < chunk.end && text[p] == '*') ++p;
    p = skip_hspace(text, p, chunk.end);
    const std::size_t pname_end = read_ident(text, p, chunk.end);
    if (pname_end == p) {
      const std::string_view bare = text.substr(chunk.begin, chunk.end - chunk.begin);
      if (bare == "*" || bare == "/") continue;
      throw ParseError("malformed parameter");
    }
    ParamSite param{std::string(text.substr(p, pname_end - p)), pname_end, {}};
    std::size_t q = skip_hspace(text, pname_end, chunk.end);
    if (q < chunk.end && text[q] == ':') {
      const std::size_t eq = find_top_level(text, q + 1, chunk.end, '=');
      param.annotation = trimmed(text, q + 1, eq);
      if (param.annotation.empty()) throw ParseError("empty parameter annotation");
    } else if (q < chunk.end && text[q] != '=') {
      throw ParseError("malformed parameter");
    }
    sites.params.push_back(std::move(param));
  }

  i = skip_hspace(text, close + 1, text.size());
  while (i + 1 < text.size() && text[i] == '\\' && text[i + 1] == '\n') {
    i = skip_hspace(text, i + 2, text.size());
  }
  if (text.substr(i, 2) == "->") {
    const std::size_t colon = find_top_level(text, i + 2, text.size(), ':');
    if (colon >= text.size()) throw ParseError("expected ':' after return annotation");
    sites.return_annotation = trimmed(text, i + 2, colon);
    if (sites.return_annotation.empty()) throw ParseError("empty return annotation");
    sites.header_colon = colon;
  } else {
    if (i >= text.size() || text[i] != ':') throw ParseError("expected ':' after parameters");
    sites.header_colon = i;
  }

  const auto lines = logical_lines(text);
  if (lines.empty()) throw ParseError("empty function text");
  if (lines.front().unterminated) throw ParseError("unterminated function header");

  // Statements on the header line after the colon.
  std::vector<Span> statements;
  const std::size_t rest_end = strip_comment(text, sites.header_colon + 1, lines.front().end);
  const Span rest = trimmed(text, sites.header_colon + 1, rest_end);
  if (!rest.empty()) {
    for (Span s : split_top_level(text, rest.begin, rest.end, ';')) statements.push_back(s);
  }
  if (rest.empty() && lines.size() == 1) throw ParseError("expected an indented block");

  for (std::size_t n = 1; n < lines.size(); ++n) {
    const LogicalLine& ll = lines[n];
    if (ll.unterminated) throw ParseError("unterminated statement");
    if (ll.indent <= lines.front().indent) throw ParseError("unexpected dedent in body");
    const std::string_view stmt = text.substr(ll.begin, ll.end - ll.begin);
    if (is_def_line(stmt) || is_class_line(stmt)) {
      while (n + 1 < lines.size() && lines[n + 1].indent > ll.indent) ++n;
      continue;
    }
    for (Span s : split_top_level(text, ll.begin, ll.end, ';')) statements.push_back(s);
  }
  for (Span s : statements) parse_binding(text, s, sites);
  return sites;
}

}  // namespace pysrc

using pysrc::FunctionSites;
using pysrc::Span;
using pysrc::is_class_line;
using pysrc::is_def_line;
using pysrc::is_hspace;
using pysrc::read_ident;

const char* to_string(VarKind k) {
  switch (k) {
    case VarKind::Local: return "Local";
    case VarKind::Arg: return "Arg";
    case VarKind::Ret: return "Ret";
  }
  return "?";
}

VarKind var_kind_from_string(std::string_view s) {
  if (s == "Local") return VarKind::Local;
  if (s == "Arg") return VarKind::Arg;
  if (s == "Ret") return VarKind::Ret;
  throw ParseError("unknown variable kind '" + std::string(s) + "'");
}

namespace {

bool is_receiver(std::string_view name) { return name == "self" || name == "cls"; }

std::string dedent(std::string_view src, std::size_t begin, std::size_t end, int indent) {
  std::string out;
  out.reserve(end - begin);
  std::size_t i = begin;
  while (i < end) {
    int col = 0;
    while (i < end && col < indent && (src[i] == ' ' || src[i] == '\t')) {
      col = src[i] == '\t' ? (col / 8 + 1) * 8 : col + 1;
      ++i;
    }
    const std::size_t nl = src.find('\n', i);
    const std::size_t stop = nl == std::string_view::npos || nl >= end ? end : nl + 1;
    out.append(src.substr(i, stop - i));
    i = stop;
  }
  // Drop carriage returns so offsets stay stable across line endings.
  out.erase(std::remove(out.begin(), out.end(), '\r'), out.end());
  return out;
}

std::string replace_span(std::string_view text, Span span, std::string_view with) {
  std::string out;
  out.reserve(text.size() + with.size());
  out.append(text.substr(0, span.begin));
  out.append(with);
  out.append(text.substr(span.end));
  return out;
}

std::string insert_at(std::string_view text, std::size_t at, std::string_view with) {
  return replace_span(text, Span{at, at}, with);
}

std::string placeholder_annotation() { return std::string(": ") + std::string(kTypePlaceholder); }

}  // namespace

ExtractResult extract_functions(std::string_view src, std::string_view file_path) {
  ExtractResult result;
  try {
    const auto lines = pysrc::logical_lines(src);
    std::vector<std::size_t> line_starts{0};
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i] == '\n') line_starts.push_back(i + 1);
    }
    std::vector<int> class_indents;
    for (std::size_t idx = 0; idx < lines.size(); ++idx) {
      const auto& ll = lines[idx];
      while (!class_indents.empty() && ll.indent <= class_indents.back()) class_indents.pop_back();
      const std::string_view stmt = src.substr(ll.begin, ll.end - ll.begin);
      if (is_class_line(stmt)) {
        class_indents.push_back(ll.indent);
        continue;
      }
      if (!is_def_line(stmt)) continue;

      std::size_t last = idx;
      while (last + 1 < lines.size() && lines[last + 1].indent > ll.indent) ++last;
      PythonFunction fn;
      fn.file_path = std::string(file_path);
      fn.line_span = {ll.first_line + 1, lines[last].last_line + 1};
      fn.source_text = dedent(src, line_starts[ll.first_line], lines[last].end, ll.indent);
      try {
        bool unterminated = false;
        for (std::size_t n = idx; n <= last; ++n) unterminated = unterminated || lines[n].unterminated;
        if (unterminated) throw ParseError("unterminated bracket or string");
        pysrc::analyze_function(fn.source_text);
        std::size_t p = fn.source_text.find("def") + 3;
        while (p < fn.source_text.size() && is_hspace(fn.source_text[p])) ++p;
        const std::size_t e = read_ident(fn.source_text, p, fn.source_text.size());
        fn.name = fn.source_text.substr(p, e - p);
        result.functions.push_back(std::move(fn));
      } catch (const ParseError& err) {
        result.diagnostics.push_back(
            {std::string(file_path), "line " + std::to_string(ll.first_line + 1) + ": " + err.what()});
      }
      idx = last;
    }
  } catch (const std::exception& err) {
    result.diagnostics.push_back({std::string(file_path), err.what()});
  }
  return result;
}

std::vector<TypeSlot> enumerate_slots(const PythonFunction& function) {
  const FunctionSites sites = pysrc::analyze_function(function.source_text);
  std::vector<TypeSlot> slots;
  std::set<std::string> params;
  for (const auto& p : sites.params) {
    params.insert(p.name);
    if (is_receiver(p.name)) continue;
    slots.push_back({VarKind::Arg, p.name, 0});
  }
  std::set<std::string> seen;
  for (const auto& local : sites.locals) {
    if (params.contains(local.name) || !seen.insert(local.name).second) continue;
    slots.push_back({VarKind::Local, local.name, 0});
  }
  slots.push_back({VarKind::Ret, "", 0});
  return slots;
}

TypeMissedFunction insert_placeholder(const PythonFunction& function, const TypeSlot& slot) {
  const auto slots = enumerate_slots(function);
  if (std::find(slots.begin(), slots.end(), slot) == slots.end()) {
    throw SlotNotFound(std::string("slot ") + to_string(slot.var_kind) + "(" + slot.var_name +
                       ") not found in function " + function.name);
  }
  const FunctionSites sites = pysrc::analyze_function(function.source_text);
  const std::string_view text = function.source_text;
  const std::string_view ph = kTypePlaceholder;
  std::string masked;
  switch (slot.var_kind) {
    case VarKind::Arg: {
      const auto it = std::find_if(sites.params.begin(), sites.params.end(),
                                   [&](const auto& p) { return p.name == slot.var_name; });
      masked = it->annotation.empty() ? insert_at(text, it->name_end, placeholder_annotation())
                                      : replace_span(text, it->annotation, ph);
      break;
    }
    case VarKind::Ret:
      masked = sites.return_annotation.empty()
                   ? insert_at(text, sites.close_paren + 1, std::string(" -> ") + std::string(ph))
                   : replace_span(text, sites.return_annotation, ph);
      break;
    case VarKind::Local: {
      const auto it = std::find_if(sites.locals.begin(), sites.locals.end(),
                                   [&](const auto& l) { return l.name == slot.var_name; });
      masked = it->annotation.empty() ? insert_at(text, it->name_end, placeholder_annotation())
                                      : replace_span(text, it->annotation, ph);
      break;
    }
  }
  TypeMissedFunction out{function, slot};
  out.function.source_text = std::move(masked);
  return out;
}

std::vector<TrainingPair> mask_annotations(const PythonFunction& function) {
  const FunctionSites sites = pysrc::analyze_function(function.source_text);
  const std::string_view text = function.source_text;
  std::vector<TrainingPair> pairs;
  auto emit = [&](Span annotation, TypeSlot slot) {
    const std::string expected =
        normalize_type_whitespace(text.substr(annotation.begin, annotation.end - annotation.begin));
    const auto parsed = try_parse_type(expected);
    if (!parsed) return;
    TrainingPair pair;
    pair.input.function = function;
    pair.input.function.source_text = replace_span(text, annotation, kTypePlaceholder);
    pair.input.slot = std::move(slot);
    pair.expected_type = expected;
    pair.category = classify(normalize(*parsed));
    pairs.push_back(std::move(pair));
  };

  std::set<std::string> params;
  for (const auto& p : sites.params) {
    params.insert(p.name);
    if (is_receiver(p.name) || p.annotation.empty()) continue;
    emit(p.annotation, {VarKind::Arg, p.name, 0});
  }
  std::map<std::string, int> binding_count;
  for (const auto& local : sites.locals) {
    if (params.contains(local.name)) continue;
    const int ordinal = binding_count[local.name]++;
    if (local.annotation.empty()) continue;
    emit(local.annotation, {VarKind::Local, local.name, ordinal});
  }
  if (!sites.return_annotation.empty()) emit(sites.return_annotation, {VarKind::Ret, "", 0});
  return pairs;
}

std::string substitute_placeholder(std::string_view masked_text, std::string_view type_text) {
  const std::size_t at = masked_text.find(kTypePlaceholder);
  if (at == std::string_view::npos) return std::string(masked_text);
  return replace_span(masked_text, Span{at, at + kTypePlaceholder.size()}, type_text);
}

int count_placeholders(std::string_view text) {
  int n = 0;
  for (std::size_t at = text.find(kTypePlaceholder); at != std::string_view::npos;
       at = text.find(kTypePlaceholder, at + kTypePlaceholder.size())) {
    ++n;
  }
  return n;
}

std::string normalize_code_whitespace(std::string_view text) {
  std::string out;
  bool pending = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending = !out.empty();
      continue;
    }
    if (pending && pysrc::is_ident_char(out.back()) && pysrc::is_ident_char(c)) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

}  // namespace gtr
