#pragma once

#include <map>
#include <string>
#include <vector>

#include "gtr/gtr_inference.hpp"
#include "gtr/type_lang.hpp"
#include "json.hpp"

namespace gtr {

struct EvalInstance {
  std::string id;
  TypeExpr gold;
  RankedPrediction prediction;
  TypeCategory type_category = TypeCategory::Elementary;
  VarKind var_kind = VarKind::Local;
  // Gold's normalized text never appears among training annotations.
  bool unseen = false;
};

// Buckets in report order.
inline const std::vector<std::string> kBuckets = {"All", "Ele", "Gen", "Usr", "Unseen", "Var", "Arg", "Ret"};

struct BucketScores {
  long count = 0;
  // Hits per k.
  std::map<int, long> exact;
  std::map<int, long> base;
};

struct MetricsReport {
  std::vector<int> ks;
  std::map<std::string, BucketScores> buckets;

  double exact_match(const std::string& bucket, int k) const;
  double base_match(const std::string& bucket, int k) const;
};

// Top-k EM/BM per bucket. Instances with no candidates count as misses.
MetricsReport evaluate(const std::vector<EvalInstance>& instances, const std::vector<int>& ks = {1, 3, 5});

// Aligned table with percentages to one decimal.
std::string format_report(const MetricsReport& report, const std::string& title = "");
nlohmann::json report_to_json(const MetricsReport& report);

// A held-out slot with everything inference needs.
struct TestCase {
  std::string id;
  TypeMissedFunction func;
  VisibleTypeSet visible;
  std::string expected_type;
  TypeCategory category = TypeCategory::Elementary;
  bool unseen = false;
};

std::vector<EvalInstance> run_inference(InferenceMode mode, const SeqModelParams& gen, const SeqModelParams& simm,
                                        const std::vector<TestCase>& cases, int k);

// evaluate(run_inference(mode, ...)).
MetricsReport ablate(InferenceMode mode, const SeqModelParams& gen, const SeqModelParams& simm,
                     const std::vector<TestCase>& cases, int k, const std::vector<int>& ks = {1, 3, 5});

struct DatasetSummary {
  long total = 0;
  std::map<std::string, long> counts;  // Ele, Gen, Usr, Var, Arg, Ret, Unseen
  double percent(const std::string& key) const;
};

struct SummaryItem {
  TypeCategory category;
  VarKind var_kind;
  bool unseen = false;
};

DatasetSummary summarize_dataset(const std::vector<SummaryItem>& items);
DatasetSummary summarize_dataset(const std::vector<TrainingPair>& pairs);
std::string format_summary(const DatasetSummary& summary, const std::string& title = "");
nlohmann::json summary_to_json(const DatasetSummary& summary);

// ManyTypes4Py split sizes from the literature, kept for comparison only.
namespace reference_split {
inline constexpr long kTrainTotal = 242954;
inline constexpr long kTrainElementary = 128006;
inline constexpr long kTrainGeneric = 67185;
inline constexpr long kTrainUser = 47763;
inline constexpr long kTrainVar = 172459;
inline constexpr long kTrainArg = 48461;
inline constexpr long kTrainRet = 22034;
inline constexpr long kTestTotal = 10000;
inline constexpr long kTestElementary = 5199;
inline constexpr long kTestGeneric = 2748;
inline constexpr long kTestUser = 2053;
inline constexpr long kTestUnseen = 579;
inline constexpr long kTestVar = 7091;
inline constexpr long kTestArg = 1995;
inline constexpr long kTestRet = 914;
}  // namespace reference_split

}  // namespace gtr
