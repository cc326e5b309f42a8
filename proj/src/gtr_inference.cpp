#include "gtr/gtr_inference.hpp"

#include <algorithm>
#include <set>

#include "gtr/errors.hpp"

namespace gtr {

const char* to_string(InferenceMode m) {
  switch (m) {
    case InferenceMode::Full: return "full";
    case InferenceMode::GeneratingOnly: return "generating-only";
    case InferenceMode::RankingOnly: return "ranking-only";
  }
  return "?";
}

InferenceMode inference_mode_from_string(std::string_view s) {
  if (s == "full") return InferenceMode::Full;
  if (s == "generating-only" || s == "generating") return InferenceMode::GeneratingOnly;
  if (s == "ranking-only" || s == "ranking") return InferenceMode::RankingOnly;
  throw Error("unknown mode: " + std::string(s));
}

std::vector<std::string> generate_candidates(const SeqModelParams& gen, const HiddenStates& h, int k,
                                             std::vector<std::string>* dropped) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& hyp : beam_generate(gen, h, k, kMaxTypeTokens)) {
    if (!hyp.finished()) {
      if (dropped) dropped->push_back("beam output hit the length limit");
      continue;
    }
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i + 1 < hyp.tokens.size(); ++i) tokens.push_back(gen.vocab.token(hyp.tokens[i]));
    const std::string text = normalize_type_whitespace(detokenize_type(tokens));
    const auto parsed = try_parse_type(text);
    if (!parsed) {
      if (dropped) dropped->push_back("unparseable beam output: " + text);
      continue;
    }
    if (seen.insert(render(normalize(*parsed))).second) out.push_back(text);
  }
  return out;
}

std::vector<std::string> generate_candidates(const SeqModelParams& gen, const TypeMissedFunction& func, int k,
                                             std::vector<std::string>* dropped) {
  return generate_candidates(gen, encode(gen, tokenize(func.function.source_text, gen)), k, dropped);
}

std::vector<PoolEntry> build_pool(const std::vector<std::string>& generated, const VisibleTypeSet& visible) {
  std::vector<PoolEntry> pool;
  std::set<std::string> seen;
  for (const auto& text : generated) {
    const auto parsed = try_parse_type(text);
    if (!parsed || !is_admissible(*parsed, visible)) continue;
    if (seen.insert(render(normalize(*parsed))).second)
      pool.push_back({*parsed, normalize_type_whitespace(text), CandidateOrigin::Generated});
  }
  for (const auto& name : visible.names()) {
    const auto parsed = try_parse_type(name);
    if (!parsed) continue;
    if (seen.insert(render(normalize(*parsed))).second) pool.push_back({*parsed, name, CandidateOrigin::Visible});
  }
  if (pool.empty()) throw EmptyPool("no admissible generated or visible types");
  return pool;
}

Candidate score_candidate(const SeqModelParams& gen, const HiddenStates& gen_h, const SeqModelParams& simm,
                          const HiddenStates& sim_h, const PoolEntry& entry) {
  Candidate c{entry.type_expr, entry.text, entry.origin, 0.0, 0.0, 0.0};
  c.lik = likelihood(gen, gen_h, entry.text);
  c.sim = similarity(simm, sim_h, entry.text);
  c.score = c.lik + c.sim;
  return c;
}

Candidate score_candidate(const SeqModelParams& gen, const SeqModelParams& simm, const TypeMissedFunction& func,
                          const PoolEntry& entry) {
  return score_candidate(gen, encode(gen, tokenize(func.function.source_text, gen)), simm,
                         encode(simm, tokenize(func.function.source_text, simm)), entry);
}

void sort_candidates(std::vector<Candidate>& candidates) {
  std::vector<std::pair<std::string, Candidate>> keyed;
  keyed.reserve(candidates.size());
  for (auto& c : candidates) keyed.emplace_back(render(normalize(c.type_expr)), std::move(c));
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.second.score != b.second.score) return a.second.score > b.second.score;
    if (a.second.lik != b.second.lik) return a.second.lik > b.second.lik;
    return a.first < b.first;
  });
  candidates.clear();
  for (auto& [key, c] : keyed) candidates.push_back(std::move(c));
}

RankedPrediction rank(const SeqModelParams& gen, const SeqModelParams& simm, const TypeMissedFunction& func,
                      const std::vector<PoolEntry>& pool) {
  const HiddenStates gen_h = encode(gen, tokenize(func.function.source_text, gen));
  const HiddenStates sim_h = encode(simm, tokenize(func.function.source_text, simm));
  RankedPrediction out{func.slot, {}};
  for (const auto& entry : pool) out.candidates.push_back(score_candidate(gen, gen_h, simm, sim_h, entry));
  sort_candidates(out.candidates);
  return out;
}

RankedPrediction predict(const SeqModelParams& gen, const SeqModelParams& simm, const TypeMissedFunction& func,
                         const VisibleTypeSet& visible, InferenceMode mode, int k) {
  RankedPrediction out{func.slot, {}};
  switch (mode) {
    case InferenceMode::Full: {
      const HiddenStates gen_h = encode(gen, tokenize(func.function.source_text, gen));
      std::vector<PoolEntry> pool;
      try {
        pool = build_pool(generate_candidates(gen, gen_h, k), visible);
      } catch (const EmptyPool&) {
        return out;
      }
      const HiddenStates sim_h = encode(simm, tokenize(func.function.source_text, simm));
      for (const auto& entry : pool) out.candidates.push_back(score_candidate(gen, gen_h, simm, sim_h, entry));
      break;
    }
    case InferenceMode::GeneratingOnly: {
      const HiddenStates gen_h = encode(gen, tokenize(func.function.source_text, gen));
      for (const auto& text : generate_candidates(gen, gen_h, k)) {
        Candidate c{parse_type(text), text, CandidateOrigin::Generated, 0.0, 0.0, 0.0};
        c.lik = likelihood(gen, gen_h, text);
        c.score = c.lik;
        out.candidates.push_back(std::move(c));
      }
      break;
    }
    case InferenceMode::RankingOnly: {
      if (visible.empty()) return out;
      const HiddenStates sim_h = encode(simm, tokenize(func.function.source_text, simm));
      for (const auto& name : visible.names()) {
        const auto parsed = try_parse_type(name);
        if (!parsed) continue;
        Candidate c{*parsed, name, CandidateOrigin::Visible, 0.0, 0.0, 0.0};
        c.sim = similarity(simm, sim_h, name);
        c.score = c.sim;
        out.candidates.push_back(std::move(c));
      }
      break;
    }
  }
  sort_candidates(out.candidates);
  return out;
}

}  // namespace gtr
