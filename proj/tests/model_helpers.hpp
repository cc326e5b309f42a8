#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gtr/seq_model.hpp"

namespace gtr::testing {

inline ModelDims tiny_dims(int d_model = 8, int heads = 2, int layers = 1, int max_seq_len = 24) {
  ModelDims d;
  d.d_model = d_model;
  d.n_heads = heads;
  d.d_ff = 2 * d_model;
  d.enc_layers = layers;
  d.dec_layers = layers;
  d.max_seq_len = max_seq_len;
  return d;
}

// Random model whose weights are spread wider than the default init so the
// output distributions are far from uniform.
inline SeqModelParams random_model(const std::vector<std::string>& tokens, const ModelDims& dims, std::uint64_t seed,
                                   double spread = 3.0) {
  SeqModelParams p = init_params(Vocabulary(tokens), dims, seed);
  for (auto& t : p.tensors)
    if (t.name.find("norm") == std::string::npos) t.value *= spread;
  return p;
}

inline TokenSequence random_input(std::mt19937_64& rng, const SeqModelParams& p, int len) {
  TokenSequence x{Vocabulary::kBos};
  for (int i = 0; i < len; ++i) x.push_back(static_cast<int>(Vocabulary::kNumSpecial + rng() % (p.vocab.size() - Vocabulary::kNumSpecial)));
  x.push_back(Vocabulary::kEos);
  return x;
}

struct Enumerated {
  std::vector<int> tokens;
  double logp;
};

// Every EOS-terminated sequence of at most max_len tokens plus every
// max_len-long unterminated one, ranked by probability.
inline std::vector<Enumerated> enumerate_all(const SeqModelParams& p, const HiddenStates& h, int max_len) {
  std::vector<Enumerated> out;
  std::function<void(std::vector<int>&, double)> walk = [&](std::vector<int>& prefix, double logp) {
    std::vector<int> y{Vocabulary::kBos};
    y.insert(y.end(), prefix.begin(), prefix.end());
    const auto dist = decode_step(p, h, y).probs;
    for (int tok = 0; tok < static_cast<int>(dist.size()); ++tok) {
      if (tok == Vocabulary::kBos || tok == Vocabulary::kType) continue;
      prefix.push_back(tok);
      const double lp = logp + std::log(dist[static_cast<std::size_t>(tok)]);
      if (tok == Vocabulary::kEos || static_cast<int>(prefix.size()) == max_len)
        out.push_back({prefix, lp});
      else
        walk(prefix, lp);
      prefix.pop_back();
    }
  };
  std::vector<int> start;
  walk(start, 0.0);
  std::sort(out.begin(), out.end(), [](const Enumerated& a, const Enumerated& b) {
    return a.logp != b.logp ? a.logp > b.logp : a.tokens < b.tokens;
  });
  return out;
}

}  // namespace gtr::testing
