#include "gtr/evaluation.hpp"

#include <cstdio>
#include <sstream>

namespace gtr {
namespace {

const char* category_bucket(TypeCategory c) {
  switch (c) {
    case TypeCategory::Elementary: return "Ele";
    case TypeCategory::Generic: return "Gen";
    case TypeCategory::UserDefined: return "Usr";
  }
  return "?";
}

const char* kind_bucket(VarKind k) {
  switch (k) {
    case VarKind::Local: return "Var";
    case VarKind::Arg: return "Arg";
    case VarKind::Ret: return "Ret";
  }
  return "?";
}

double ratio(long hits, long count) { return count == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(count); }

std::string pct(double fraction) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

double MetricsReport::exact_match(const std::string& bucket, int k) const {
  const auto& b = buckets.at(bucket);
  auto it = b.exact.find(k);
  return ratio(it == b.exact.end() ? 0 : it->second, b.count);
}

double MetricsReport::base_match(const std::string& bucket, int k) const {
  const auto& b = buckets.at(bucket);
  auto it = b.base.find(k);
  return ratio(it == b.base.end() ? 0 : it->second, b.count);
}

MetricsReport evaluate(const std::vector<EvalInstance>& instances, const std::vector<int>& ks) {
  MetricsReport report;
  report.ks = ks;
  for (const auto& name : kBuckets) {
    auto& b = report.buckets[name];
    for (int k : ks) b.exact[k] = b.base[k] = 0;
  }
  for (const auto& inst : instances) {
    std::vector<std::string> targets = {"All", category_bucket(inst.type_category), kind_bucket(inst.var_kind)};
    if (inst.unseen) targets.push_back("Unseen");

    // Rank (1-based) of the first exact and first base hit; 0 when absent.
    std::size_t first_exact = 0, first_base = 0;
    const auto& cands = inst.prediction.candidates;
    for (std::size_t r = 0; r < cands.size() && (first_exact == 0 || first_base == 0); ++r) {
      const auto m = match(cands[r].type_expr, inst.gold);
      if (m.exact && first_exact == 0) first_exact = r + 1;
      if (m.base && first_base == 0) first_base = r + 1;
    }
    for (const auto& t : targets) {
      auto& b = report.buckets[t];
      ++b.count;
      for (int k : ks) {
        if (first_exact != 0 && first_exact <= static_cast<std::size_t>(k)) ++b.exact[k];
        if (first_base != 0 && first_base <= static_cast<std::size_t>(k)) ++b.base[k];
      }
    }
  }
  return report;
}

std::string format_report(const MetricsReport& report, const std::string& title) {
  std::ostringstream out;
  if (!title.empty()) out << title << "\n";
  out << pad_right("Bucket", 8) << pad_left("Count", 7);
  for (int k : report.ks) {
    out << pad_left("Top-" + std::to_string(k) + " EM", 11) << pad_left("Top-" + std::to_string(k) + " BM", 11);
  }
  out << "\n";
  for (const auto& name : kBuckets) {
    const auto& b = report.buckets.at(name);
    out << pad_right(name, 8) << pad_left(std::to_string(b.count), 7);
    for (int k : report.ks) {
      out << pad_left(pct(report.exact_match(name, k)), 11) << pad_left(pct(report.base_match(name, k)), 11);
    }
    out << "\n";
  }
  return out.str();
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["ks"] = report.ks;
  nlohmann::json buckets = nlohmann::json::object();
  for (const auto& name : kBuckets) {
    const auto& b = report.buckets.at(name);
    nlohmann::json entry;
    entry["count"] = b.count;
    for (int k : report.ks) {
      const std::string key = std::to_string(k);
      entry["exact_match"][key] = std::stod(pct(report.exact_match(name, k)));
      entry["base_match"][key] = std::stod(pct(report.base_match(name, k)));
      entry["exact_hits"][key] = b.exact.at(k);
      entry["base_hits"][key] = b.base.at(k);
    }
    buckets[name] = entry;
  }
  j["buckets"] = buckets;
  return j;
}

std::vector<EvalInstance> run_inference(InferenceMode mode, const SeqModelParams& gen, const SeqModelParams& simm,
                                        const std::vector<TestCase>& cases, int k) {
  std::vector<EvalInstance> out;
  out.reserve(cases.size());
  for (const auto& c : cases) {
    EvalInstance inst;
    inst.id = c.id;
    inst.gold = parse_type(c.expected_type);
    inst.prediction = predict(gen, simm, c.func, c.visible, mode, k);
    inst.type_category = c.category;
    inst.var_kind = c.func.slot.var_kind;
    inst.unseen = c.unseen;
    out.push_back(std::move(inst));
  }
  return out;
}

MetricsReport ablate(InferenceMode mode, const SeqModelParams& gen, const SeqModelParams& simm,
                     const std::vector<TestCase>& cases, int k, const std::vector<int>& ks) {
  return evaluate(run_inference(mode, gen, simm, cases, k), ks);
}

double DatasetSummary::percent(const std::string& key) const {
  auto it = counts.find(key);
  return total == 0 || it == counts.end() ? 0.0 : 100.0 * static_cast<double>(it->second) / static_cast<double>(total);
}

DatasetSummary summarize_dataset(const std::vector<SummaryItem>& items) {
  DatasetSummary s;
  for (const char* key : {"Ele", "Gen", "Usr", "Unseen", "Var", "Arg", "Ret"}) s.counts[key] = 0;
  for (const auto& item : items) {
    ++s.total;
    ++s.counts[category_bucket(item.category)];
    ++s.counts[kind_bucket(item.var_kind)];
    if (item.unseen) ++s.counts["Unseen"];
  }
  return s;
}

DatasetSummary summarize_dataset(const std::vector<TrainingPair>& pairs) {
  std::vector<SummaryItem> items;
  items.reserve(pairs.size());
  for (const auto& p : pairs) items.push_back({p.category, p.input.slot.var_kind, false});
  return summarize_dataset(items);
}

std::string format_summary(const DatasetSummary& summary, const std::string& title) {
  std::ostringstream out;
  if (!title.empty()) out << title << "\n";
  out << pad_right("Total", 8) << pad_left(std::to_string(summary.total), 8) << "\n";
  for (const char* key : {"Ele", "Gen", "Usr", "Unseen", "Var", "Arg", "Ret"}) {
    out << pad_right(key, 8) << pad_left(std::to_string(summary.counts.at(key)), 8)
        << pad_left(pct(summary.percent(key) / 100.0) + "%", 9) << "\n";
  }
  return out.str();
}

nlohmann::json summary_to_json(const DatasetSummary& summary) {
  nlohmann::json j;
  j["total"] = summary.total;
  for (const auto& [key, n] : summary.counts) {
    j["counts"][key] = n;
    j["percent"][key] = std::stod(pct(summary.percent(key) / 100.0));
  }
  return j;
}

}  // namespace gtr
