#include <algorithm>
#include <random>

#include "doctest.h"
#include "gtr/errors.hpp"
#include "gtr/gtr_inference.hpp"
#include "model_helpers.hpp"

using namespace gtr;
using namespace gtr::testing;

namespace {

VisibleTypeSet visible_of(std::initializer_list<const char*> names) {
  VisibleTypeSet v;
  for (const char* n : names) v.add(n, Provenance::SameFile);
  return v;
}

std::vector<std::string> texts(const std::vector<PoolEntry>& pool) {
  std::vector<std::string> out;
  for (const auto& e : pool) out.push_back(e.text);
  return out;
}

Candidate cand(const std::string& text, double lik, double sim) {
  return Candidate{parse_type(text), text, CandidateOrigin::Generated, lik, sim, lik + sim};
}

const std::vector<std::string> kTokens = {"def", "f", "(", "key", ":", ")", "return", "int", "str", "List",
                                          "[",   "]", ",", "Foo", "Bar", "Optional"};

TypeMissedFunction masked() {
  return TypeMissedFunction{PythonFunction{"a.py", "f", "def f(key: <TYPE>):\n    return key", {1, 2}},
                            TypeSlot{VarKind::Arg, "key", 0}};
}

}  // namespace

TEST_CASE("build_pool filters generated names and appends visible ones") {
  SUBCASE("unknown user name is dropped") {
    CHECK(texts(build_pool({"str", "Foo"}, {})) == std::vector<std::string>{"str"});
  }
  SUBCASE("visible generated name keeps its origin, other visible names follow") {
    const auto pool = build_pool({"IDMap"}, visible_of({"IDMap", "IDMapKey"}));
    REQUIRE(pool.size() == 2);
    CHECK(pool[0].text == "IDMap");
    CHECK(pool[0].origin == CandidateOrigin::Generated);
    CHECK(pool[1].text == "IDMapKey");
    CHECK(pool[1].origin == CandidateOrigin::Visible);
  }
  SUBCASE("nothing generated") {
    const auto pool = build_pool({}, visible_of({"A"}));
    REQUIRE(pool.size() == 1);
    CHECK(pool[0].text == "A");
    CHECK(pool[0].origin == CandidateOrigin::Visible);
  }
  SUBCASE("generics with builtin bases are admitted whatever their parameters") {
    CHECK(texts(build_pool({"List[int]", "List[Foo]", "Foo[int]", "Dict[str, Bar]"}, visible_of({"Bar"}))) ==
          std::vector<std::string>{"List[int]", "List[Foo]", "Dict[str, Bar]", "Bar"});
  }
  SUBCASE("duplicates collapse by canonical text before scoring") {
    CHECK(texts(build_pool({"list[int]", "List[int]", "typing.List[int]", "int"}, {})) ==
          std::vector<std::string>{"list[int]", "int"});
  }
  SUBCASE("empty pool") {
    CHECK_THROWS_AS(build_pool({"Foo", "not a type ["}, {}), EmptyPool);
  }
}

TEST_CASE("sort_candidates orders by score, then likelihood, then canonical text") {
  std::vector<Candidate> c = {cand("str", 0.2, 0.5), cand("int", 0.5, 0.2), cand("bool", 0.1, 0.9),
                              cand("bytes", 0.2, 0.5), cand("float", 0.0, 0.1)};
  // str and bytes tie on score and lik; int ties with both on score only.
  std::vector<std::string> expected = {"bool", "int", "bytes", "str", "float"};
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(c.begin(), c.end(), rng);
    sort_candidates(c);
    std::vector<std::string> got;
    for (const auto& x : c) got.push_back(x.text);
    CHECK(got == expected);
  }
}

TEST_CASE("scores are likelihood plus similarity") {
  const auto gen = random_model(kTokens, tiny_dims(), 31, 2.0);
  const auto simm = random_model(kTokens, tiny_dims(), 32, 2.0);
  const auto f = masked();
  const auto pool = build_pool({"int", "List[str]"}, visible_of({"Foo", "Bar"}));
  const auto ranked = rank(gen, simm, f, pool);
  REQUIRE(ranked.candidates.size() == 4);
  CHECK(ranked.slot == f.slot);
  for (const auto& c : ranked.candidates) {
    CHECK(c.lik == doctest::Approx(likelihood(gen, f, c.text)).epsilon(1e-12));
    CHECK(c.sim == doctest::Approx(similarity(simm, f, c.text)).epsilon(1e-12));
    CHECK(c.score == c.lik + c.sim);
  }
  for (std::size_t i = 1; i < ranked.candidates.size(); ++i)
    CHECK(ranked.candidates[i - 1].score >= ranked.candidates[i].score);

  auto reversed = pool;
  std::reverse(reversed.begin(), reversed.end());
  const auto again = rank(gen, simm, f, reversed);
  for (std::size_t i = 0; i < again.candidates.size(); ++i) CHECK(again.candidates[i].text == ranked.candidates[i].text);
}

TEST_CASE("generate_candidates keeps parseable distinct beam outputs") {
  const auto gen = random_model(kTokens, tiny_dims(), 33, 3.0);
  std::vector<std::string> dropped;
  const auto out = generate_candidates(gen, masked(), 6, &dropped);
  CHECK(out.size() + dropped.size() == 6);
  for (const auto& t : out) CHECK(try_parse_type(t).has_value());
  std::set<std::string> distinct(out.begin(), out.end());
  CHECK(distinct.size() == out.size());
}

TEST_CASE("predict modes") {
  const auto gen = random_model(kTokens, tiny_dims(), 41, 2.0);
  const auto simm = random_model(kTokens, tiny_dims(), 42, 2.0);
  const auto f = masked();
  const auto visible = visible_of({"Foo", "Bar"});

  const auto ranking = predict(gen, simm, f, visible, InferenceMode::RankingOnly, 5);
  REQUIRE(ranking.candidates.size() == 2);
  for (const auto& c : ranking.candidates) {
    CHECK(c.origin == CandidateOrigin::Visible);
    CHECK(c.lik == 0.0);
    CHECK(c.score == c.sim);
  }
  CHECK(predict(gen, simm, f, {}, InferenceMode::RankingOnly, 5).candidates.empty());

  const auto generating = predict(gen, simm, f, visible, InferenceMode::GeneratingOnly, 5);
  CHECK(generating.candidates.size() == generate_candidates(gen, f, 5).size());
  for (const auto& c : generating.candidates) {
    CHECK(c.origin == CandidateOrigin::Generated);
    CHECK(c.sim == 0.0);
    CHECK(c.score == c.lik);
  }

  const auto full = predict(gen, simm, f, visible, InferenceMode::Full, 5);
  const auto pool = build_pool(generate_candidates(gen, f, 5), visible);
  REQUIRE(full.candidates.size() == pool.size());
  const auto expected = rank(gen, simm, f, pool);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    CHECK(full.candidates[i].text == expected.candidates[i].text);
    CHECK(full.candidates[i].score == expected.candidates[i].score);
  }

  CHECK(to_string(InferenceMode::GeneratingOnly) == std::string("generating-only"));
  CHECK(inference_mode_from_string("ranking-only") == InferenceMode::RankingOnly);
  CHECK_THROWS_AS(inference_mode_from_string("both"), Error);
}
