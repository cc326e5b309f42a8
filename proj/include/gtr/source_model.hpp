#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gtr/type_lang.hpp"

namespace gtr {

inline constexpr std::string_view kTypePlaceholder = "<TYPE>";

// One function definition. `source_text` runs from the `def` line through the
// last body line, dedented by the indentation of the `def` line.
struct PythonFunction {
  std::string file_path;
  std::string name;
  std::string source_text;
  std::pair<int, int> line_span{1, 1};  // 1-based, inclusive
};

enum class VarKind { Local, Arg, Ret };

const char* to_string(VarKind k);
VarKind var_kind_from_string(std::string_view s);

struct TypeSlot {
  VarKind var_kind = VarKind::Ret;
  std::string var_name;  // empty for Ret
  int occurrence_index = 0;

  friend bool operator==(const TypeSlot&, const TypeSlot&) = default;
};

struct TypeMissedFunction {
  PythonFunction function;  // contains exactly one <TYPE>
  TypeSlot slot;
};

struct TrainingPair {
  TypeMissedFunction input;
  std::string expected_type;
  TypeCategory category = TypeCategory::Elementary;
};

struct Diagnostic {
  std::string file_path;
  std::string error;
};

struct ExtractResult {
  std::vector<PythonFunction> functions;
  std::vector<Diagnostic> diagnostics;
};

// Returns every module-level and class-level function. Nested functions stay
// inside their enclosing function. Malformed definitions are reported in
// `diagnostics` and skipped; this never throws.
ExtractResult extract_functions(std::string_view source_text, std::string_view file_path);

// Ret last; args in declaration order (self/cls skipped); locals by first
// binding in line order.
std::vector<TypeSlot> enumerate_slots(const PythonFunction& function);

// Throws SlotNotFound when `slot` is not among enumerate_slots(function).
TypeMissedFunction insert_placeholder(const PythonFunction& function, const TypeSlot& slot);

// One pair per existing annotation, each masking exactly that annotation.
// Annotations that do not parse as type expressions are skipped.
std::vector<TrainingPair> mask_annotations(const PythonFunction& function);

// Replaces the single <TYPE> with `type_text`.
std::string substitute_placeholder(std::string_view masked_text, std::string_view type_text);

int count_placeholders(std::string_view text);

// Drops whitespace except a single space between two identifier characters,
// so that two renderings of the same code compare equal.
std::string normalize_code_whitespace(std::string_view text);

namespace pysrc {

// Annotation-bearing sites inside one function, with byte offsets into the
// function's source_text. Exposed for import analysis and tests.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  bool empty() const { return begin == end; }
};

struct ParamSite {
  std::string name;    // without leading stars
  std::size_t name_end = 0;
  Span annotation;  // the type text only; empty when absent
};

struct LocalSite {
  std::string name;
  std::size_t name_end = 0;
  Span annotation;
  int line = 0;  // 0-based line inside the function
};

struct FunctionSites {
  std::vector<ParamSite> params;
  std::size_t close_paren = 0;  // offset of ')' closing the parameter list
  std::size_t header_colon = 0; // offset of ':' ending the header
  Span return_annotation;
  std::vector<LocalSite> locals;  // every simple-name binding in body order
};

// Throws ParseError when the header cannot be parsed.
FunctionSites analyze_function(std::string_view source_text);

// Logical lines of `source` with bracket/string awareness.
struct LogicalLine {
  std::size_t begin = 0;  // byte offset of first non-space character
  std::size_t end = 0;    // byte offset one past the last character (excl. newline)
  int indent = 0;
  int first_line = 0;     // 0-based physical line numbers
  int last_line = 0;
  bool unterminated = false;  // open bracket or string at end of input
};

std::vector<LogicalLine> logical_lines(std::string_view source);

}  // namespace pysrc

}  // namespace gtr
