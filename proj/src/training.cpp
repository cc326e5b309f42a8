#include "gtr/training.hpp"

#include <cmath>
#include <ostream>
#include <random>
#include <set>

#include "gtr/errors.hpp"
#include "gtr/gtr_inference.hpp"
#include "gtr/type_lang.hpp"

namespace gtr {

using nn::Matrix;
using nn::Tape;
using nn::Var;

const char* to_string(CandidateOrigin o) { return o == CandidateOrigin::Generated ? "generated" : "visible"; }

CandidateOrigin candidate_origin_from_string(std::string_view s) {
  if (s == "generated") return CandidateOrigin::Generated;
  if (s == "visible") return CandidateOrigin::Visible;
  throw Error("unknown candidate origin: " + std::string(s));
}

std::vector<TrainingPair> build_generation_dataset(const std::vector<PythonFunction>& corpus) {
  std::vector<TrainingPair> out;
  for (const auto& f : corpus) {
    auto pairs = mask_annotations(f);
    out.insert(out.end(), std::make_move_iterator(pairs.begin()), std::make_move_iterator(pairs.end()));
  }
  return out;
}

namespace {

std::string canonical_or_raw(const std::string& text) {
  const auto parsed = try_parse_type(text);
  return parsed ? render(normalize(*parsed)) : text;
}

// Modulo bias is negligible for the small n drawn here.
std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

void shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[draw(rng, i)]);
}

class Adam {
 public:
  Adam(const SeqModelParams& p, double lr) : lr_(lr) {
    for (const auto& t : p.tensors) {
      m_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
      v_.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
    }
  }

  void step(SeqModelParams& p, double grad_scale) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
      auto& tensor = p.tensors[i];
      const Matrix g = tensor.grad * grad_scale;
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g.cwiseProduct(g);
      tensor.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  int t_ = 0;
  std::vector<Matrix> m_, v_;
};

// Shared mini-batch loop. `loss_at(i, tape, graph)` builds example i's loss.
template <typename LossFn>
SeqModelParams optimize(SeqModelParams params, std::size_t n, const Hyperparams& hyper, TrainingLog* log,
                        const char* label, LossFn loss_at) {
  if (hyper.epochs <= 0 || n == 0) return params;
  if (hyper.batch_size <= 0 || !(hyper.learning_rate > 0)) throw Error("batch size and learning rate must be positive");
  Adam adam(params, hyper.learning_rate);
  std::mt19937_64 rng(hyper.seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(hyper.batch_size);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    shuffle(order, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      params.zero_grad();
      for (std::size_t j = start; j < end; ++j) {
        Tape tape;
        ModelGraph graph(tape, params);
        Var loss = loss_at(order[j], tape, graph);
        const double value = tape.scalar(loss);
        if (!std::isfinite(value))
          throw NonFiniteLoss(std::string(label) + " loss became " + std::to_string(value) + " at epoch " +
                              std::to_string(epoch + 1) + ", example " + std::to_string(order[j]));
        total += value;
        tape.backward(loss);
      }
      adam.step(params, 1.0 / static_cast<double>(end - start));
    }
    const double mean = total / static_cast<double>(n);
    if (log) {
      log->epoch_losses.push_back(mean);
      if (log->out) *log->out << label << " epoch " << epoch + 1 << "/" << hyper.epochs << " mean loss " << mean << "\n";
    }
  }
  return params;
}

std::vector<int> type_ids(const std::string& text, const Vocabulary& vocab) { return tokenize_type(text, vocab); }

}  // namespace

std::vector<ContrastiveInstance> build_contrastive_dataset(const std::vector<TrainingPair>& pairs,
                                                          const SeqModelParams& gen, const ProjectIndex& index,
                                                          int k, std::uint64_t seed) {
  if (k < 1) throw Error("K must be at least 1");
  std::vector<ContrastiveInstance> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    const std::string positive = canonical_or_raw(pair.expected_type);
    std::vector<std::pair<std::string, CandidateOrigin>> universe;
    std::set<std::string> seen{positive};
    const auto generated = generate_candidates(gen, pair.input, k);
    VisibleTypeSet visible;
    if (index.files.count(pair.input.function.file_path)) visible = visible_types(index, pair.input.function.file_path);
    if (generated.empty() && visible.empty())
      throw EmptyCandidateUniverse("no beam candidates or visible types for " + pair.input.function.file_path +
                                   ":" + pair.input.function.name);
    for (const auto& g : generated)
      if (seen.insert(canonical_or_raw(g)).second) universe.emplace_back(g, CandidateOrigin::Generated);
    for (const auto& name : visible.names())
      if (seen.insert(canonical_or_raw(name)).second) universe.emplace_back(name, CandidateOrigin::Visible);

    // Partial Fisher-Yates from a per-pair stream keeps each instance
    // independent of the others.
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
    const std::size_t take = std::min(universe.size(), static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < take; ++j) std::swap(universe[j], universe[j + draw(rng, universe.size() - j)]);
    ContrastiveInstance inst{pair.input, pair.expected_type, {}, {}};
    for (std::size_t j = 0; j < take; ++j) {
      inst.negatives.push_back(universe[j].first);
      inst.negative_origins.push_back(universe[j].second);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

Var generative_loss(Tape& tape, ModelGraph& graph, const TokenSequence& x, const std::vector<int>& ids) {
  std::vector<int> y_in{Vocabulary::kBos};
  y_in.insert(y_in.end(), ids.begin(), ids.end());
  std::vector<int> targets = ids;
  targets.push_back(Vocabulary::kEos);
  Var enc = graph.encode(x);
  Var dec = graph.decode(graph.cross_memory(enc), y_in);
  return tape.cross_entropy(graph.logits(dec), targets);
}

Var contrastive_loss(Tape& tape, ModelGraph& graph, const TokenSequence& x, const std::vector<int>& positive,
                     const std::vector<std::vector<int>>& negatives) {
  if (negatives.empty()) throw EmptyNegatives("contrastive loss needs at least one negative");
  Var enc = graph.encode(x);
  const auto memory = graph.cross_memory(enc);
  Var enc_mean = tape.mean_rows(enc);
  auto sim = [&](const std::vector<int>& ids) {
    std::vector<int> y{Vocabulary::kBos};
    y.insert(y.end(), ids.begin(), ids.end());
    return tape.cosine(enc_mean, tape.mean_rows(graph.decode(memory, y)));
  };
  std::vector<Var> sims{sim(positive)};
  for (const auto& n : negatives) sims.push_back(sim(n));
  return tape.info_nce(tape.concat_cols(sims));
}

SeqModelParams train_generative(SeqModelParams params, const std::vector<TrainingPair>& pairs,
                                const Hyperparams& hyper, TrainingLog* log) {
  std::vector<TokenSequence> xs;
  std::vector<std::vector<int>> ys;
  for (const auto& p : pairs) {
    xs.push_back(tokenize(p.input.function.source_text, params));
    ys.push_back(type_ids(p.expected_type, params.vocab));
  }
  return optimize(std::move(params), pairs.size(), hyper, log, "generation",
                  [&](std::size_t i, Tape& tape, ModelGraph& graph) { return generative_loss(tape, graph, xs[i], ys[i]); });
}

SeqModelParams train_contrastive(SeqModelParams params, const std::vector<ContrastiveInstance>& instances,
                                 const Hyperparams& hyper, TrainingLog* log) {
  struct Prepared {
    TokenSequence x;
    std::vector<int> positive;
    std::vector<std::vector<int>> negatives;
  };
  std::vector<Prepared> data;
  for (const auto& inst : instances) {
    if (inst.negatives.empty()) continue;
    Prepared p{tokenize(inst.anchor.function.source_text, params), type_ids(inst.positive, params.vocab), {}};
    for (const auto& n : inst.negatives) p.negatives.push_back(type_ids(n, params.vocab));
    data.push_back(std::move(p));
  }
  return optimize(std::move(params), data.size(), hyper, log, "similarity",
                  [&](std::size_t i, Tape& tape, ModelGraph& graph) {
                    return contrastive_loss(tape, graph, data[i].x, data[i].positive, data[i].negatives);
                  });
}

}  // namespace gtr
