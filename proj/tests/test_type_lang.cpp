#include <random>

#include "doctest.h"
#include "gtr/errors.hpp"
#include "gtr/type_lang.hpp"
#include "random_types.hpp"

using namespace gtr;

TEST_CASE("parse_type builds bracketed trees") {
  const TypeExpr u = parse_type("Union[str,int]");
  CHECK(u.base == "Union");
  REQUIRE(u.params.size() == 2);
  CHECK(u.params[0].base == "str");
  CHECK(u.params[1].base == "int");

  const TypeExpr atom = parse_type("int");
  CHECK(atom.base == "int");
  CHECK(atom.is_atomic());

  // Dict[str, List[int]] is two levels deep below the root.
  const TypeExpr d = parse_type("Dict[str, List[int]]");
  CHECK(d.base == "Dict");
  REQUIRE(d.params.size() == 2);
  CHECK(d.params[0] == TypeExpr{"str", {}});
  CHECK(d.params[1].base == "List");
  REQUIRE(d.params[1].params.size() == 1);
  CHECK(d.params[1].params[0] == TypeExpr{"int", {}});
}

TEST_CASE("parse_type unquotes forward references and handles literals") {
  CHECK(parse_type("'IDMap'") == TypeExpr{"IDMap", {}});
  CHECK(parse_type("List[\"Node\"]").params[0].base == "Node");
  const TypeExpr c = parse_type("Callable[[int, str], None]");
  REQUIRE(c.params.size() == 2);
  CHECK(c.params[0].base == "[]");
  CHECK(c.params[0].params.size() == 2);
  CHECK(render(c) == "Callable[[int, str], None]");
  CHECK(render(parse_type("Tuple[int, ...]")) == "Tuple[int, ...]");
  CHECK(render(parse_type("Callable[[], int]")) == "Callable[[], int]");
}

TEST_CASE("parse_type rejects malformed text") {
  CHECK_THROWS_AS(parse_type(""), ParseError);
  CHECK_THROWS_AS(parse_type("List[int"), ParseError);
  CHECK_THROWS_AS(parse_type("List[]"), ParseError);
  CHECK_THROWS_AS(parse_type("Dict[str,,int]"), ParseError);
  CHECK_THROWS_AS(parse_type("int]"), ParseError);
  CHECK_THROWS_AS(parse_type("int | None"), ParseError);
  CHECK_FALSE(try_parse_type("List[").has_value());
}

TEST_CASE("normalization and canonical text") {
  CHECK(canonical_text("typing.List[ int ]") == "list[int]");
  CHECK(canonical_text("Dict[str,int]") == "dict[str, int]");
  CHECK(canonical_text("Optional[str]") == "Optional[str]");
  CHECK(canonical_text("Union[str, None]") == "Union[str, None]");
  CHECK(normalize_type_whitespace("Dict[ str ,   List[int] ]") == "Dict[str, List[int]]");
  CHECK(normalize_type_whitespace("Dict[str,int]") == "Dict[str, int]");
  CHECK(normalize_type_whitespace("  IDMapKey ") == "IDMapKey");
}

TEST_CASE("base_of returns the outermost normalized name") {
  CHECK(base_of(parse_type("Union[str,list]")) == "Union");
  CHECK(base_of(parse_type("int")) == "int");
  CHECK(base_of(parse_type("list[Foo]")) == "list");
  CHECK(base_of(parse_type("List[Foo]")) == "list");
  CHECK(base_of(parse_type("typing.Optional[int]")) == "Optional");
}

TEST_CASE("classify partitions types into three categories") {
  CHECK(classify(parse_type("int")) == TypeCategory::Elementary);
  CHECK(classify(parse_type("None")) == TypeCategory::Elementary);
  CHECK(classify(parse_type("List[int]")) == TypeCategory::Generic);
  CHECK(classify(parse_type("Foo[int]")) == TypeCategory::Generic);
  CHECK(classify(parse_type("IDMapKey")) == TypeCategory::UserDefined);
  CHECK(classify(parse_type("typing.Any")) == TypeCategory::Elementary);
}

TEST_CASE("is_admissible checks only the base") {
  VisibleTypeSet none;
  VisibleTypeSet with_idmap;
  with_idmap.add("IDMap", Provenance::Imported);
  CHECK_FALSE(is_admissible(parse_type("Foo"), none));
  CHECK(is_admissible(parse_type("list[Foo]"), none));
  CHECK(is_admissible(parse_type("IDMap"), with_idmap));
  CHECK(is_admissible(parse_type("a.b.IDMap"), with_idmap));
  CHECK_FALSE(is_admissible(parse_type("Box[int]"), with_idmap));
  CHECK(is_admissible(parse_type("int"), none));
}

TEST_CASE("match compares exact trees and bases") {
  auto m = match(parse_type("Union[str,list]"), parse_type("Union[str,int]"));
  CHECK_FALSE(m.exact);
  CHECK(m.base);
  m = match(parse_type("int"), parse_type("int"));
  CHECK(m.exact);
  CHECK(m.base);
  m = match(parse_type("List[int]"), parse_type("list[int]"));
  CHECK(m.exact);
  CHECK(m.base);
  m = match(parse_type("a.b.Foo"), parse_type("Foo"));
  CHECK(m.exact);
  m = match(parse_type("Optional[str]"), parse_type("Union[str, None]"));
  CHECK_FALSE(m.exact);
  CHECK_FALSE(m.base);
}

TEST_CASE("property: render/parse round trip and EM implies BM") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const TypeExpr t = normalize(testing::random_type(rng));
    CHECK(normalize(parse_type(render(t))) == t);
    const TypeExpr u = testing::random_type(rng);
    const auto m = match(t, u);
    if (m.exact) CHECK(m.base);
    CHECK(match(t, t).exact);
  }
}

TEST_CASE("property: admissibility is monotone in the visible set") {
  std::mt19937_64 rng(11);
  const std::vector<std::string> extra = {"Foo", "Bar", "Box", "IDMap"};
  for (int i = 0; i < 500; ++i) {
    const TypeExpr t = testing::random_type(rng);
    VisibleTypeSet visible;
    bool before = is_admissible(t, visible);
    for (const auto& name : extra) {
      visible.add(name, Provenance::Imported);
      const bool after = is_admissible(t, visible);
      CHECK((!before || after));
      before = after;
    }
  }
}
