#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gtr/import_analysis.hpp"
#include "gtr/seq_model.hpp"
#include "gtr/source_model.hpp"

namespace gtr {

struct Hyperparams {
  int epochs = 3;
  double learning_rate = 1e-5;
  int batch_size = 8;
  int beam_k = 5;
  std::uint64_t seed = 0;
};

enum class CandidateOrigin { Generated, Visible };

const char* to_string(CandidateOrigin o);
CandidateOrigin candidate_origin_from_string(std::string_view s);

struct ContrastiveInstance {
  TypeMissedFunction anchor;
  std::string positive;
  std::vector<std::string> negatives;
  std::vector<CandidateOrigin> negative_origins;
};

struct TrainingLog {
  std::vector<double> epoch_losses;
  // Progress lines go here when set.
  std::ostream* out = nullptr;
};

// mask_annotations over every function, in corpus order.
std::vector<TrainingPair> build_generation_dataset(const std::vector<PythonFunction>& corpus);

// Negatives for each pair: the gen model's K beam candidates plus the
// file's visible types, minus the positive, sampled down to K. Files missing
// from the index contribute no visible types.
std::vector<ContrastiveInstance> build_contrastive_dataset(const std::vector<TrainingPair>& pairs,
                                                          const SeqModelParams& gen, const ProjectIndex& index,
                                                          int k, std::uint64_t seed);

// Mean cross-entropy of the gold type tokens and EOS, teacher forced.
nn::Var generative_loss(nn::Tape& tape, ModelGraph& graph, const TokenSequence& x, const std::vector<int>& type_ids);

// InfoNCE over the similarities of the positive and the negatives.
nn::Var contrastive_loss(nn::Tape& tape, ModelGraph& graph, const TokenSequence& x, const std::vector<int>& positive,
                         const std::vector<std::vector<int>>& negatives);

// Adam (0.9, 0.999, 1e-8) over mini-batches; the example order is shuffled
// each epoch from hyper.seed. Throws NonFiniteLoss.
SeqModelParams train_generative(SeqModelParams params, const std::vector<TrainingPair>& pairs,
                                const Hyperparams& hyper, TrainingLog* log = nullptr);

// Instances without negatives carry no signal and are skipped.
SeqModelParams train_contrastive(SeqModelParams params, const std::vector<ContrastiveInstance>& instances,
                                 const Hyperparams& hyper, TrainingLog* log = nullptr);

}  // namespace gtr
