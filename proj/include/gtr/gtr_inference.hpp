#pragma once

#include <string>
#include <vector>

#include "gtr/seq_model.hpp"
#include "gtr/source_model.hpp"
#include "gtr/training.hpp"
#include "gtr/type_lang.hpp"
#include "gtr/visible_type_set.hpp"

namespace gtr {

// Longest type the generator may emit, EOS included.
inline constexpr int kMaxTypeTokens = 16;

enum class InferenceMode { Full, GeneratingOnly, RankingOnly };

const char* to_string(InferenceMode m);
InferenceMode inference_mode_from_string(std::string_view s);

struct Candidate {
  TypeExpr type_expr;
  std::string text;
  CandidateOrigin origin = CandidateOrigin::Generated;
  double lik = 0.0;
  double sim = 0.0;
  double score = 0.0;
};

struct RankedPrediction {
  TypeSlot slot;
  std::vector<Candidate> candidates;
};

struct PoolEntry {
  TypeExpr type_expr;
  std::string text;
  CandidateOrigin origin = CandidateOrigin::Generated;
};

// Beam outputs as whitespace-normalized type text, in beam order. Outputs
// that are truncated, do not parse or repeat an earlier one are dropped;
// their reasons go to `dropped` when given.
std::vector<std::string> generate_candidates(const SeqModelParams& gen, const TypeMissedFunction& func, int k,
                                             std::vector<std::string>* dropped = nullptr);
std::vector<std::string> generate_candidates(const SeqModelParams& gen, const HiddenStates& h, int k,
                                             std::vector<std::string>* dropped = nullptr);

// Admissible generated candidates followed by every visible type, deduplicated
// by canonical text; a type both generated and visible stays Generated.
// Throws EmptyPool.
std::vector<PoolEntry> build_pool(const std::vector<std::string>& generated, const VisibleTypeSet& visible);

Candidate score_candidate(const SeqModelParams& gen, const SeqModelParams& simm, const TypeMissedFunction& func,
                          const PoolEntry& entry);
Candidate score_candidate(const SeqModelParams& gen, const HiddenStates& gen_h, const SeqModelParams& simm,
                          const HiddenStates& sim_h, const PoolEntry& entry);

// Score descending, then lik descending, then canonical text ascending.
void sort_candidates(std::vector<Candidate>& candidates);

RankedPrediction rank(const SeqModelParams& gen, const SeqModelParams& simm, const TypeMissedFunction& func,
                      const std::vector<PoolEntry>& pool);

// Runs one inference mode end to end. An empty pool yields no candidates.
//   Full           generated + visible pool, score = lik + sim
//   GeneratingOnly raw beam candidates, score = lik (sim reported as 0)
//   RankingOnly    visible types only, score = sim (lik reported as 0)
RankedPrediction predict(const SeqModelParams& gen, const SeqModelParams& simm, const TypeMissedFunction& func,
                         const VisibleTypeSet& visible, InferenceMode mode, int k);

}  // namespace gtr
