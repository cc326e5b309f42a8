#pragma once

// Plain-loop forward pass of the encoder-decoder, written independently of
// the tape so tests can cross-check the library.

#include <cmath>
#include <string>
#include <vector>

#include "gtr/seq_model.hpp"

namespace gtr::testing {

using Mat = std::vector<std::vector<double>>;

inline Mat from_param(const SeqModelParams& p, const std::string& name) {
  const auto& m = p.at(name).value;
  Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (std::size_t r = 0; r < out.size(); ++r)
    for (std::size_t c = 0; c < out[r].size(); ++c) out[r][c] = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return out;
}

inline Mat mul(const Mat& a, const Mat& b) {
  Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline Mat plus(Mat a, const Mat& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
  return a;
}

class ReferenceModel {
 public:
  explicit ReferenceModel(const SeqModelParams& p) : p_(p) {}

  Mat encode(const std::vector<int>& x) const {
    Mat h = embed(x);
    for (int l = 0; l < p_.dims.enc_layers; ++l) {
      const std::string pre = "encoder." + std::to_string(l);
      const Mat n = layer_norm(h, pre + ".attn_norm");
      h = plus(h, attend(n, n, pre + ".attn", false));
      h = plus(h, ffn(layer_norm(h, pre + ".ffn_norm"), pre + ".ffn"));
    }
    return layer_norm(h, "encoder.final_norm");
  }

  Mat decode(const Mat& memory, const std::vector<int>& y) const {
    Mat h = embed(y);
    for (int l = 0; l < p_.dims.dec_layers; ++l) {
      const std::string pre = "decoder." + std::to_string(l);
      const Mat n = layer_norm(h, pre + ".self_norm");
      h = plus(h, attend(n, n, pre + ".self_attn", true));
      h = plus(h, attend(layer_norm(h, pre + ".cross_norm"), memory, pre + ".cross_attn", false));
      h = plus(h, ffn(layer_norm(h, pre + ".ffn_norm"), pre + ".ffn"));
    }
    return layer_norm(h, "decoder.final_norm");
  }

  // Next-token distribution after the given decoder inputs.
  std::vector<double> next_probs(const std::vector<int>& x, const std::vector<int>& y) const {
    const Mat dec = decode(encode(x), y);
    const auto& last = dec.back();
    const Mat emb = from_param(p_, "embed.tokens");
    const Mat bias = from_param(p_, "head.bias");
    std::vector<double> z(emb.size());
    double mx = -1e300;
    for (std::size_t v = 0; v < emb.size(); ++v) {
      double s = bias[0][v];
      for (std::size_t j = 0; j < last.size(); ++j) s += last[j] * emb[v][j];
      z[v] = s;
      mx = std::max(mx, s);
    }
    double total = 0.0;
    for (double& s : z) total += (s = std::exp(s - mx));
    for (double& s : z) s /= total;
    return z;
  }

  double similarity(const std::vector<int>& x, const std::vector<int>& type_ids) const {
    const Mat enc = encode(x);
    std::vector<int> y{Vocabulary::kBos};
    y.insert(y.end(), type_ids.begin(), type_ids.end());
    const Mat dec = decode(enc, y);
    const auto a = mean(enc);
    const auto b = mean(dec);
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
  }

 private:
  static std::vector<double> mean(const Mat& m) {
    std::vector<double> out(m[0].size(), 0.0);
    for (const auto& row : m)
      for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j] / static_cast<double>(m.size());
    return out;
  }

  Mat embed(const std::vector<int>& ids) const {
    const Mat tok = from_param(p_, "embed.tokens");
    const Mat pos = from_param(p_, "embed.positions");
    Mat out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      std::vector<double> row(tok[0].size());
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = tok[static_cast<std::size_t>(ids[i])][j] + pos[i][j];
      out.push_back(row);
    }
    return out;
  }

  Mat layer_norm(const Mat& x, const std::string& pre) const {
    const Mat g = from_param(p_, pre + ".gain");
    const Mat b = from_param(p_, pre + ".bias");
    Mat out = x;
    for (auto& row : out) {
      double mu = 0;
      for (double v : row) mu += v;
      mu /= static_cast<double>(row.size());
      double var = 0;
      for (double v : row) var += (v - mu) * (v - mu);
      var /= static_cast<double>(row.size());
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mu) / std::sqrt(var + 1e-5) * g[0][j] + b[0][j];
    }
    return out;
  }

  Mat attend(const Mat& q_in, const Mat& kv_in, const std::string& pre, bool causal) const {
    const Mat q = mul(q_in, from_param(p_, pre + ".q"));
    const Mat k = mul(kv_in, from_param(p_, pre + ".k"));
    const Mat v = mul(kv_in, from_param(p_, pre + ".v"));
    const std::size_t d = q[0].size();
    const std::size_t heads = static_cast<std::size_t>(p_.dims.n_heads);
    const std::size_t dh = d / heads;
    Mat out(q.size(), std::vector<double>(d, 0.0));
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < q.size(); ++i) {
        const std::size_t n = causal ? i + 1 : k.size();
        std::vector<double> w(n);
        double mx = -1e300;
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0;
          for (std::size_t c = 0; c < dh; ++c) s += q[i][h * dh + c] * k[j][h * dh + c];
          w[j] = s / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, w[j]);
        }
        double total = 0;
        for (double& s : w) total += (s = std::exp(s - mx));
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t c = 0; c < dh; ++c) out[i][h * dh + c] += w[j] / total * v[j][h * dh + c];
      }
    }
    return mul(out, from_param(p_, pre + ".o"));
  }

  Mat ffn(const Mat& x, const std::string& pre) const {
    Mat h = mul(x, from_param(p_, pre + ".in.weight"));
    const Mat b1 = from_param(p_, pre + ".in.bias");
    for (auto& row : h)
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double u = row[j] + b1[0][j];
        row[j] = 0.5 * u * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (u + 0.044715 * u * u * u)));
      }
    Mat out = mul(h, from_param(p_, pre + ".out.weight"));
    const Mat b2 = from_param(p_, pre + ".out.bias");
    for (auto& row : out)
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += b2[0][j];
    return out;
  }

  const SeqModelParams& p_;
};

}  // namespace gtr::testing
