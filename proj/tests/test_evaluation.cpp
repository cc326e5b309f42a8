#include <random>

#include "doctest.h"
#include "gtr/evaluation.hpp"
#include "random_types.hpp"

using namespace gtr;

namespace {

struct Row {
  const char* gold;
  std::vector<std::string> ranked;
  TypeCategory category;
  VarKind kind;
  bool unseen;
};

EvalInstance make(const Row& r) {
  EvalInstance e;
  e.gold = parse_type(r.gold);
  e.type_category = r.category;
  e.var_kind = r.kind;
  e.unseen = r.unseen;
  for (const auto& t : r.ranked) e.prediction.candidates.push_back(Candidate{parse_type(t), t, CandidateOrigin::Generated, 0, 0, 0});
  return e;
}

constexpr auto Ele = TypeCategory::Elementary;
constexpr auto Gen = TypeCategory::Generic;
constexpr auto Usr = TypeCategory::UserDefined;
constexpr auto L = VarKind::Local;
constexpr auto A = VarKind::Arg;
constexpr auto R = VarKind::Ret;

// First exact / first base rank noted per row.
const std::vector<Row> kTally = {
    {"int", {"int"}, Ele, L, false},                                                    // 1 1
    {"str", {"int", "str"}, Ele, A, false},                                             // 2 2
    {"List[int]", {"List[str]", "List[int]"}, Gen, R, false},                           // 2 1
    {"Dict[str, int]", {}, Gen, L, false},                                              // - -
    {"Foo", {"Bar", "Baz", "Qux", "Foo"}, Usr, L, false},                               // 4 4
    {"Foo", {"A", "B", "C", "D", "E", "Foo"}, Usr, A, false},                           // 6 6
    {"Nebula", {"Nebula"}, Usr, R, true},                                               // 1 1
    {"Optional[int]", {"Optional[str]", "int", "Optional[int]"}, Gen, L, false},        // 3 1
    {"bool", {"int", "float", "str", "bytes", "bool"}, Ele, L, false},                  // 5 5
    {"float", {"float", "int"}, Ele, A, false},                                         // 1 1
    {"List[str]", {"Set[str]", "Tuple[str]", "List[str]"}, Gen, L, false},              // 3 3
    {"Tuple[int, int]", {"Tuple[int]", "Tuple[int, int]"}, Gen, R, false},              // 2 1
    {"Bar", {"Foo", "Bar"}, Usr, L, false},                                             // 2 2
    {"Quasar", {"Bar", "Foo"}, Usr, L, true},                                           // - -
    {"bytes", {"str"}, Ele, R, false},                                                  // - -
    {"Set[int]", {"Set[int]"}, Gen, A, false},                                          // 1 1
    {"Dict[str, Any]", {"Dict[str, int]", "Dict[str, Any]"}, Gen, L, false},            // 2 1
    {"Baz", {"Baz"}, Usr, R, false},                                                    // 1 1
    {"int", {"str", "bool", "int"}, Ele, L, false},                                     // 3 3
    {"Qux", {"List[Qux]", "Qux"}, Usr, L, false},                                       // 2 2
};

}  // namespace

TEST_CASE("hand-tallied 20-instance fixture") {
  std::vector<EvalInstance> inst;
  for (const auto& r : kTally) inst.push_back(make(r));
  const auto rep = evaluate(inst);

  const auto& all = rep.buckets.at("All");
  CHECK(all.count == 20);
  CHECK(all.exact.at(1) == 5);
  CHECK(all.exact.at(3) == 14);
  CHECK(all.exact.at(5) == 16);
  CHECK(all.base.at(1) == 9);
  CHECK(all.base.at(3) == 14);
  CHECK(all.base.at(5) == 16);
  CHECK(rep.exact_match("All", 1) == doctest::Approx(0.25));

  CHECK(rep.buckets.at("Ele").count == 6);
  CHECK(rep.buckets.at("Gen").count == 7);
  CHECK(rep.buckets.at("Usr").count == 7);
  CHECK(rep.buckets.at("Var").count == 11);
  CHECK(rep.buckets.at("Arg").count == 4);
  CHECK(rep.buckets.at("Ret").count == 5);
  CHECK(rep.buckets.at("Unseen").count == 2);

  CHECK(rep.buckets.at("Usr").exact.at(1) == 2);
  CHECK(rep.buckets.at("Usr").exact.at(3) == 4);
  CHECK(rep.buckets.at("Usr").exact.at(5) == 5);
  CHECK(rep.buckets.at("Unseen").exact.at(1) == 1);
  CHECK(rep.buckets.at("Ele").exact.at(1) == 2);
  CHECK(rep.buckets.at("Ele").exact.at(3) == 4);
  CHECK(rep.buckets.at("Ele").exact.at(5) == 5);
  CHECK(rep.buckets.at("Gen").exact.at(1) == 1);
  CHECK(rep.buckets.at("Gen").base.at(1) == 5);
  CHECK(rep.buckets.at("Ret").exact.at(1) == 2);
  CHECK(rep.buckets.at("Arg").exact.at(1) == 2);
  CHECK(rep.buckets.at("Var").exact.at(1) == 1);

  const std::string table = format_report(rep);
  CHECK(table.find("All          20       25.0       45.0       70.0       70.0       80.0       80.0") != std::string::npos);
  CHECK(table.find("Usr           7       28.6       28.6       57.1       57.1       71.4       71.4") != std::string::npos);

  const auto j = report_to_json(rep);
  CHECK(j["buckets"]["Usr"]["exact_match"]["3"].get<double>() == 57.1);
  CHECK(j["buckets"]["Gen"]["base_match"]["1"].get<double>() == 71.4);
  CHECK(j["buckets"]["All"]["exact_hits"]["5"].get<long>() == 16);
}

TEST_CASE("bucket partitions and k monotonicity on random predictions") {
  std::mt19937_64 rng(17);
  const std::vector<std::string> pool = {"int", "str", "List[int]", "List[str]", "Optional[int]", "Foo", "Bar",
                                         "Dict[str, int]", "Tuple[int, str]", "bool"};
  std::vector<EvalInstance> inst;
  for (int i = 0; i < 400; ++i) {
    Row r{pool[rng() % pool.size()].c_str(), {}, static_cast<TypeCategory>(rng() % 3), static_cast<VarKind>(rng() % 3),
          rng() % 5 == 0};
    const auto n = rng() % 8;
    for (std::size_t j = 0; j < n; ++j) r.ranked.push_back(pool[rng() % pool.size()]);
    inst.push_back(make(r));
  }
  const auto rep = evaluate(inst, {1, 2, 3, 5, 10});
  const auto count = [&](const char* b) { return rep.buckets.at(b).count; };
  CHECK(count("Ele") + count("Gen") + count("Usr") == count("All"));
  CHECK(count("Var") + count("Arg") + count("Ret") == count("All"));
  for (const auto& name : kBuckets) {
    double prev_em = 0, prev_bm = 0;
    for (int k : rep.ks) {
      CHECK(rep.exact_match(name, k) <= rep.base_match(name, k));
      CHECK(rep.exact_match(name, k) >= prev_em);
      CHECK(rep.base_match(name, k) >= prev_bm);
      prev_em = rep.exact_match(name, k);
      prev_bm = rep.base_match(name, k);
    }
  }
}

TEST_CASE("empty evaluation reports zeros") {
  const auto rep = evaluate({});
  for (const auto& name : kBuckets) {
    CHECK(rep.buckets.at(name).count == 0);
    CHECK(rep.exact_match(name, 5) == 0.0);
  }
}

TEST_CASE("dataset summary") {
  std::vector<SummaryItem> items;
  for (int i = 0; i < 6; ++i) items.push_back({Ele, L, false});
  for (int i = 0; i < 3; ++i) items.push_back({Gen, A, false});
  items.push_back({Usr, R, true});
  const auto s = summarize_dataset(items);
  CHECK(s.total == 10);
  CHECK(s.percent("Ele") == doctest::Approx(60.0));
  CHECK(s.percent("Gen") == doctest::Approx(30.0));
  CHECK(s.percent("Usr") == doctest::Approx(10.0));
  CHECK(s.counts.at("Unseen") == 1);
  CHECK(format_summary(s).find("Gen            3    30.0%") != std::string::npos);
  CHECK(summary_to_json(s)["percent"]["Ele"].get<double>() == 60.0);

  const auto empty = summarize_dataset(std::vector<SummaryItem>{});
  CHECK(empty.total == 0);
  for (const auto& [key, n] : empty.counts) {
    CHECK(n == 0);
    CHECK(empty.percent(key) == 0.0);
  }

  std::vector<TrainingPair> pairs(2);
  pairs[0].category = Usr;
  pairs[0].input.slot.var_kind = A;
  const auto from_pairs = summarize_dataset(pairs);
  CHECK(from_pairs.counts.at("Usr") == 1);
  CHECK(from_pairs.counts.at("Ele") == 1);
  CHECK(from_pairs.counts.at("Arg") == 1);
  CHECK(from_pairs.counts.at("Ret") == 1);
}
