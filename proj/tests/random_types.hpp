#pragma once

// Random type-tree generator shared by the unit and acceptance suites.

#include <random>
#include <string>
#include <vector>

#include "gtr/type_lang.hpp"

namespace gtr::testing {

inline const std::vector<std::string>& atom_pool() {
  static const std::vector<std::string> pool = {
      "int", "str", "float", "bool", "None", "bytes", "Any", "Foo", "Bar", "pkg.Foo", "IDMap"};
  return pool;
}

inline const std::vector<std::string>& generic_pool() {
  static const std::vector<std::string> pool = {
      "List", "list", "Dict", "dict", "Optional", "Union", "Tuple", "typing.List", "Set", "Box"};
  return pool;
}

inline TypeExpr random_type(std::mt19937_64& rng, int depth = 0) {
  std::uniform_int_distribution<int> coin(0, 2);
  if (depth >= 2 || coin(rng) != 0) {
    const auto& atoms = atom_pool();
    return TypeExpr{atoms[rng() % atoms.size()], {}};
  }
  const auto& generics = generic_pool();
  TypeExpr t{generics[rng() % generics.size()], {}};
  const int n = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < n; ++i) t.params.push_back(random_type(rng, depth + 1));
  return t;
}

}  // namespace gtr::testing
