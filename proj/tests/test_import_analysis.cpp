#include <filesystem>

#include "doctest.h"
#include "gtr/errors.hpp"
#include "gtr/import_analysis.hpp"

using namespace gtr;

namespace {

std::filesystem::path project(const std::string& name) {
  return std::filesystem::path(GTR_FIXTURE_DIR) / "projects" / name;
}

std::map<std::string, Provenance> as_map(const VisibleTypeSet& v) { return v.provenance; }

}  // namespace

TEST_CASE("empty directory indexes to nothing") {
  const auto dir = std::filesystem::temp_directory_path() / "gtr_empty_index_test";
  std::filesystem::create_directories(dir);
  const auto index = index_project(dir);
  CHECK(index.files.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("named import resolves to the defining file") {
  const auto index = index_project(project("p1"));
  REQUIRE(index.files.size() == 2);
  CHECK(index.files.at("a.py").defined_types == std::vector<std::string>{"IDMap", "IDMapKey"});
  const auto& b = index.files.at("b.py");
  REQUIRE(b.imports.size() == 1);
  CHECK(b.imports[0].resolved == std::optional<std::string>("a.py"));
  CHECK(as_map(visible_types(index, "b.py")) ==
        std::map<std::string, Provenance>{{"IDMap", Provenance::Imported},
                                          {"LocalThing", Provenance::SameFile}});
}

TEST_CASE("relative and star imports") {
  const auto index = index_project(project("p2"));
  CHECK(index.files.at("pkg/models.py").defined_types ==
        std::vector<std::string>{"Alias", "Group", "User"});
  const auto& views = index.files.at("pkg/views.py");
  REQUIRE(views.imports.size() == 2);
  CHECK(views.imports[1].resolved == std::optional<std::string>("pkg/models.py"));
  CHECK(as_map(visible_types(index, "pkg/views.py")) ==
        std::map<std::string, Provenance>{{"U", Provenance::Imported},
                                          {"View", Provenance::SameFile},
                                          {"models.Alias", Provenance::Imported},
                                          {"models.Group", Provenance::Imported},
                                          {"models.User", Provenance::Imported}});
  const auto star = visible_types(index, "pkg/star.py");
  CHECK(star.size() == 3);
  CHECK(star.contains("User"));
  CHECK(visible_types(index, "empty.py").empty());
}

TEST_CASE("visibility is one hop and keeps external class names") {
  const auto index = index_project(project("p3"));
  CHECK(as_map(visible_types(index, "e.py")) ==
        std::map<std::string, Provenance>{{"D", Provenance::Imported},
                                          {"Session", Provenance::Imported},
                                          {"c.C", Provenance::Imported}});
}

TEST_CASE("own definitions are always visible and SameFile wins") {
  const auto index = index_sources({{"m.py", "class A:\n    pass\n"},
                                    {"n.py", "from m import A\nclass A:\n    pass\n"}});
  const auto v = visible_types(index, "n.py");
  CHECK(v.provenance.at("A") == Provenance::SameFile);
  CHECK_THROWS_AS(visible_types(index, "missing.py"), FileNotIndexed);
}

TEST_CASE("index json round trip and determinism") {
  const auto a = index_project(project("p2"));
  const auto b = index_project(project("p2"));
  CHECK(to_json(a).dump() == to_json(b).dump());
  const auto restored = project_index_from_json(to_json(a));
  CHECK(restored.files == a.files);
}
