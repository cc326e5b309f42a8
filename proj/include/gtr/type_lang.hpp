#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gtr/visible_type_set.hpp"

namespace gtr {

// A parsed type expression: a (possibly dotted) base name and ordered
// parameter subtrees. List literals such as the argument list of
// `Callable[[int], str]` use the base "[]".
struct TypeExpr {
  std::string base;
  std::vector<TypeExpr> params;

  bool is_atomic() const { return params.empty(); }
  friend bool operator==(const TypeExpr&, const TypeExpr&) = default;
};

enum class TypeCategory { Elementary, Generic, UserDefined };

const char* to_string(TypeCategory c);
TypeCategory category_from_string(std::string_view s);

// Parses surface type text. Quoted forward references are unquoted. Throws
// ParseError on unbalanced brackets, empty parameters or stray characters.
TypeExpr parse_type(std::string_view text);

// Same as parse_type but returns nullopt instead of throwing.
std::optional<TypeExpr> try_parse_type(std::string_view text);

// Applies the alias table recursively: `typing.` / `builtins.` prefixes are
// dropped and List/Dict/Set/FrozenSet/Tuple/Type become their lowercase
// builtins. Optional and Union are kept as written.
TypeExpr normalize(const TypeExpr& t);

// Canonical text: `base[p1, p2]`.
std::string render(const TypeExpr& t);

// parse + normalize + render.
std::string canonical_text(std::string_view text);

// Collapses whitespace runs to one space and trims; spaces right after `[`
// or before `]` and `,` are removed, and one space follows each comma.
std::string normalize_type_whitespace(std::string_view text);

std::string base_of(const TypeExpr& t);

bool is_builtin_name(std::string_view normalized_name);

TypeCategory classify(const TypeExpr& t);

bool is_admissible(const TypeExpr& t, const VisibleTypeSet& visible);

struct MatchResult {
  bool exact = false;
  bool base = false;
};

// Dotted and bare names compare by their final segment.
MatchResult match(const TypeExpr& pred, const TypeExpr& gold);

// Final dotted segment of a name ("a.b.Foo" -> "Foo").
std::string_view final_segment(std::string_view name);

}  // namespace gtr
