#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gtr/autograd.hpp"
#include "gtr/source_model.hpp"
#include "gtr/tokenizer.hpp"

namespace gtr {

// Vocabulary ids framed by BOS ... EOS.
using TokenSequence = std::vector<int>;

struct ModelDims {
  int d_model = 64;
  int n_heads = 4;
  int d_ff = 256;
  int enc_layers = 2;
  int dec_layers = 2;
  int max_seq_len = 256;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct SeqModelParams {
  Vocabulary vocab;
  ModelDims dims;
  std::uint64_t seed = 0;
  std::vector<nn::Parameter> tensors;

  nn::Parameter& at(const std::string& name);
  const nn::Parameter& at(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  std::size_t num_scalars() const;
  void zero_grad();
  // Must be called after `tensors` is filled or reordered.
  void rebuild_index();

 private:
  std::map<std::string, std::size_t> index_;
};

// Fresh weights: matrices uniform in ±1/sqrt(fan_in), biases zero, layer-norm
// gains one. Tensor order is fixed by the dims.
SeqModelParams init_params(Vocabulary vocab, const ModelDims& dims, std::uint64_t seed);

// Header + little-endian float32 tensors. Reloading and saving again is
// byte-identical.
void save_checkpoint(const SeqModelParams& params, const std::filesystem::path& path);
SeqModelParams load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_bytes(const SeqModelParams& params);
SeqModelParams checkpoint_from_bytes(const std::string& bytes);

// Code text to framed ids. Windows longer than max_seq_len are cut around
// the placeholder so it survives.
TokenSequence tokenize(std::string_view text, const SeqModelParams& params);
// Type text to unframed ids.
std::vector<int> tokenize_type(std::string_view type_text, const Vocabulary& vocab);

// Encoder output plus each decoder layer's cross-attention keys and values.
struct HiddenStates {
  nn::Matrix vectors;
  std::vector<std::pair<nn::Matrix, nn::Matrix>> cross_kv;

  std::size_t size() const { return static_cast<std::size_t>(vectors.rows()); }
};

struct ProbDistribution {
  std::vector<double> probs;
};

struct BeamHypothesis {
  // Generated ids after BOS; ends with EOS unless truncated at max_len.
  std::vector<int> tokens;
  double likelihood = 0.0;
  double log_likelihood = 0.0;

  bool finished() const { return !tokens.empty() && tokens.back() == Vocabulary::kEos; }
};

// Builds the forward graph on a tape. With a mutable params reference the
// tensors are trainable leaves; otherwise they enter as constants.
class ModelGraph {
 public:
  ModelGraph(nn::Tape& tape, SeqModelParams& params);
  ModelGraph(nn::Tape& tape, const SeqModelParams& params);

  nn::Var encode(const TokenSequence& x);
  std::vector<std::pair<nn::Var, nn::Var>> cross_memory(nn::Var encoded);
  std::vector<std::pair<nn::Var, nn::Var>> cross_memory(const HiddenStates& h);
  // Final decoder states for the given decoder inputs (BOS first).
  nn::Var decode(const std::vector<std::pair<nn::Var, nn::Var>>& memory, const std::vector<int>& y_in);
  nn::Var logits(nn::Var decoded);

  nn::Var param(std::size_t index);

 private:
  nn::Var param(const std::string& name) { return param(params_->index_of(name)); }
  nn::Var embed(const std::vector<int>& ids);
  nn::Var attention(nn::Var q_in, nn::Var k, nn::Var v, const std::string& prefix, bool causal);
  nn::Var ffn(nn::Var x, const std::string& prefix);
  nn::Var norm(nn::Var x, const std::string& prefix);

  nn::Tape& tape_;
  const SeqModelParams* params_;
  SeqModelParams* mutable_params_;
  std::vector<nn::Var> cache_;
};

HiddenStates encode(const SeqModelParams& params, const TokenSequence& x);

ProbDistribution decode_step(const SeqModelParams& params, const HiddenStates& h, const std::vector<int>& y_prefix);

// Beam search over raw probability products (no length normalization).
// Results are sorted by likelihood descending, ties by token ids ascending.
std::vector<BeamHypothesis> beam_generate(const SeqModelParams& params, const TokenSequence& x, int k,
                                          int max_len);
std::vector<BeamHypothesis> beam_generate(const SeqModelParams& params, const HiddenStates& h, int k,
                                          int max_len);

// Teacher-forced product of p(tokens[t] | prefix). `tokens` excludes BOS.
double sequence_log_likelihood(const SeqModelParams& params, const HiddenStates& h, const std::vector<int>& tokens);
double sequence_likelihood(const SeqModelParams& params, const HiddenStates& h, const std::vector<int>& tokens);

// Likelihood of the type's tokens followed by EOS.
double likelihood(const SeqModelParams& params, const TypeMissedFunction& func, std::string_view type_text);
double likelihood(const SeqModelParams& params, const HiddenStates& h, std::string_view type_text);

// Cosine of the mean encoder state and the mean decoder state over
// [BOS, type tokens].
double similarity(const SeqModelParams& params, const TypeMissedFunction& func, std::string_view type_text);
double similarity(const SeqModelParams& params, const HiddenStates& h, std::string_view type_text);

double cosine(const std::vector<double>& a, const std::vector<double>& b);

double infonce_loss(double sim_pos, const std::vector<double>& sim_negs);

}  // namespace gtr
