#include "gtr/seq_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "gtr/errors.hpp"
#include "json.hpp"

namespace gtr {

using nn::Matrix;
using nn::Tape;
using nn::Var;

namespace {

constexpr char kMagic[8] = {'G', 'T', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr int kFormatVersion = 1;

struct TensorSpec {
  std::string name;
  int rows;
  int cols;
  enum Init { Uniform, Zero, One } init;
};

void add_norm(std::vector<TensorSpec>& out, const std::string& prefix, int d) {
  out.push_back({prefix + ".gain", 1, d, TensorSpec::One});
  out.push_back({prefix + ".bias", 1, d, TensorSpec::Zero});
}

void add_attention(std::vector<TensorSpec>& out, const std::string& prefix, int d) {
  for (const char* w : {"q", "k", "v", "o"}) out.push_back({prefix + "." + w, d, d, TensorSpec::Uniform});
}

void add_ffn(std::vector<TensorSpec>& out, const std::string& prefix, int d, int ff) {
  out.push_back({prefix + ".in.weight", d, ff, TensorSpec::Uniform});
  out.push_back({prefix + ".in.bias", 1, ff, TensorSpec::Zero});
  out.push_back({prefix + ".out.weight", ff, d, TensorSpec::Uniform});
  out.push_back({prefix + ".out.bias", 1, d, TensorSpec::Zero});
}

std::vector<TensorSpec> layout(const ModelDims& dims, int vocab_size) {
  const int d = dims.d_model;
  std::vector<TensorSpec> out;
  out.push_back({"embed.tokens", vocab_size, d, TensorSpec::Uniform});
  out.push_back({"embed.positions", dims.max_seq_len, d, TensorSpec::Uniform});
  out.push_back({"head.bias", 1, vocab_size, TensorSpec::Zero});
  for (int l = 0; l < dims.enc_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    add_norm(out, p + ".attn_norm", d);
    add_attention(out, p + ".attn", d);
    add_norm(out, p + ".ffn_norm", d);
    add_ffn(out, p + ".ffn", d, dims.d_ff);
  }
  add_norm(out, "encoder.final_norm", d);
  for (int l = 0; l < dims.dec_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l);
    add_norm(out, p + ".self_norm", d);
    add_attention(out, p + ".self_attn", d);
    add_norm(out, p + ".cross_norm", d);
    add_attention(out, p + ".cross_attn", d);
    add_norm(out, p + ".ffn_norm", d);
    add_ffn(out, p + ".ffn", d, dims.d_ff);
  }
  add_norm(out, "decoder.final_norm", d);
  return out;
}

void check_dims(const ModelDims& dims) {
  if (dims.d_model <= 0 || dims.n_heads <= 0 || dims.d_model % dims.n_heads != 0 || dims.d_ff <= 0 ||
      dims.enc_layers < 0 || dims.dec_layers < 0 || dims.max_seq_len < 2)
    throw Error("invalid model dimensions");
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

bool generatable(int id) { return id != Vocabulary::kBos && id != Vocabulary::kType; }

std::vector<double> log_softmax_row(const Matrix& logits, Eigen::Index row) {
  const double mx = logits.row(row).maxCoeff();
  double total = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) total += std::exp(logits(row, c) - mx);
  const double lse = mx + std::log(total);
  std::vector<double> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index c = 0; c < logits.cols(); ++c) out[static_cast<std::size_t>(c)] = logits(row, c) - lse;
  return out;
}

void check_length(std::size_t n, const ModelDims& dims, const char* what) {
  if (n > static_cast<std::size_t>(dims.max_seq_len))
    throw SequenceTooLong(std::string(what) + " has " + std::to_string(n) + " tokens, limit is " +
                          std::to_string(dims.max_seq_len));
}

std::vector<int> decoder_inputs(const std::vector<int>& tokens) {
  std::vector<int> y{Vocabulary::kBos};
  y.insert(y.end(), tokens.begin(), tokens.end());
  return y;
}

}  // namespace

// ---- parameters ----

void SeqModelParams::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < tensors.size(); ++i) index_[tensors[i].name] = i;
}

std::size_t SeqModelParams::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown tensor: " + name);
  return it->second;
}

nn::Parameter& SeqModelParams::at(const std::string& name) { return tensors[index_of(name)]; }
const nn::Parameter& SeqModelParams::at(const std::string& name) const { return tensors[index_of(name)]; }

std::size_t SeqModelParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
  return n;
}

void SeqModelParams::zero_grad() {
  for (auto& t : tensors) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
}

SeqModelParams init_params(Vocabulary vocab, const ModelDims& dims, std::uint64_t seed) {
  check_dims(dims);
  SeqModelParams p;
  p.vocab = std::move(vocab);
  p.dims = dims;
  p.seed = seed;
  std::mt19937_64 rng(seed);
  for (const auto& spec : layout(dims, static_cast<int>(p.vocab.size()))) {
    nn::Parameter t{spec.name, Matrix::Zero(spec.rows, spec.cols), Matrix::Zero(spec.rows, spec.cols)};
    if (spec.init == TensorSpec::One) t.value.setOnes();
    if (spec.init == TensorSpec::Uniform) {
      // Embedding tables use their row width as fan-in.
      const int fan_in = spec.name.rfind("embed.", 0) == 0 ? spec.cols : spec.rows;
      const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = (2.0 * unit_uniform(rng) - 1.0) * a;
    }
    p.tensors.push_back(std::move(t));
  }
  p.rebuild_index();
  return p;
}

// ---- checkpoints ----

std::string checkpoint_bytes(const SeqModelParams& params) {
  static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["dims"] = {{"d_model", params.dims.d_model},       {"n_heads", params.dims.n_heads},
                    {"d_ff", params.dims.d_ff},             {"enc_layers", params.dims.enc_layers},
                    {"dec_layers", params.dims.dec_layers}, {"max_seq_len", params.dims.max_seq_len}};
  header["vocab"] = params.vocab.tokens();
  header["seed"] = params.seed;
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for (const auto& t : params.tensors) tensors.push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}});
  const std::string head = header.dump();

  std::string out(kMagic, sizeof kMagic);
  const std::uint64_t len = head.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += head;
  for (const auto& t : params.tensors) {
    for (Eigen::Index i = 0; i < t.value.size(); ++i) {
      const float f = static_cast<float>(t.value.data()[i]);
      out.append(reinterpret_cast<const char*>(&f), sizeof f);
    }
  }
  return out;
}

SeqModelParams checkpoint_from_bytes(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("not a model checkpoint");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + sizeof kMagic, sizeof len);
  const std::size_t body = sizeof kMagic + sizeof len;
  if (len > bytes.size() - body) throw CheckpointError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(body, len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  if (header.value("format_version", 0) != kFormatVersion) throw CheckpointError("unsupported checkpoint version");

  SeqModelParams p;
  try {
    const auto& d = header.at("dims");
    p.dims = ModelDims{d.at("d_model"), d.at("n_heads"),    d.at("d_ff"),
                       d.at("enc_layers"), d.at("dec_layers"), d.at("max_seq_len")};
    const auto tokens = header.at("vocab").get<std::vector<std::string>>();
    p.vocab = Vocabulary(std::vector<std::string>(tokens.begin() + std::min<std::size_t>(tokens.size(), Vocabulary::kNumSpecial),
                                                  tokens.end()));
    if (p.vocab.tokens() != tokens) throw CheckpointError("checkpoint vocabulary is malformed");
    p.seed = header.at("seed").get<std::uint64_t>();
    check_dims(p.dims);
    const auto expected = layout(p.dims, static_cast<int>(p.vocab.size()));
    const auto& tensors = header.at("tensors");
    if (tensors.size() != expected.size()) throw CheckpointError("tensor count does not match dims");
    std::size_t at = body + len;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const auto& spec = expected[i];
      const auto shape = tensors[i].at("shape").get<std::vector<int>>();
      if (tensors[i].at("name") != spec.name || shape != std::vector<int>{spec.rows, spec.cols})
        throw CheckpointError("tensor " + spec.name + " does not match dims");
      nn::Parameter t{spec.name, Matrix(spec.rows, spec.cols), Matrix::Zero(spec.rows, spec.cols)};
      const std::size_t n = static_cast<std::size_t>(spec.rows) * static_cast<std::size_t>(spec.cols);
      if (bytes.size() - at < n * sizeof(float)) throw CheckpointError("truncated checkpoint data");
      for (std::size_t k = 0; k < n; ++k) {
        float f;
        std::memcpy(&f, bytes.data() + at + k * sizeof f, sizeof f);
        t.value.data()[k] = f;
      }
      at += n * sizeof(float);
      p.tensors.push_back(std::move(t));
    }
    if (at != bytes.size()) throw CheckpointError("trailing bytes after checkpoint data");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  p.rebuild_index();
  return p;
}

void save_checkpoint(const SeqModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  const std::string bytes = checkpoint_bytes(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path.string());
}

SeqModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_bytes(buf.str());
}

// ---- tokenization ----

TokenSequence tokenize(std::string_view text, const SeqModelParams& params) {
  std::vector<int> ids = params.vocab.ids(tokenize_code(text));
  const std::size_t window = static_cast<std::size_t>(params.dims.max_seq_len) - 2;
  if (ids.size() > window) {
    std::size_t start = 0;
    auto it = std::find(ids.begin(), ids.end(), Vocabulary::kType);
    if (it != ids.end()) {
      const std::size_t pos = static_cast<std::size_t>(it - ids.begin());
      start = pos > window / 2 ? pos - window / 2 : 0;
      start = std::min(start, ids.size() - window);
    }
    ids = std::vector<int>(ids.begin() + static_cast<std::ptrdiff_t>(start),
                           ids.begin() + static_cast<std::ptrdiff_t>(start + window));
  }
  TokenSequence out;
  out.reserve(ids.size() + 2);
  out.push_back(Vocabulary::kBos);
  out.insert(out.end(), ids.begin(), ids.end());
  out.push_back(Vocabulary::kEos);
  return out;
}

std::vector<int> tokenize_type(std::string_view type_text, const Vocabulary& vocab) {
  return vocab.ids(tokenize_code(type_text));
}

// ---- graph ----

ModelGraph::ModelGraph(Tape& tape, SeqModelParams& params)
    : tape_(tape), params_(&params), mutable_params_(&params), cache_(params.tensors.size()) {}

ModelGraph::ModelGraph(Tape& tape, const SeqModelParams& params)
    : tape_(tape), params_(&params), mutable_params_(nullptr), cache_(params.tensors.size()) {}

Var ModelGraph::param(std::size_t index) {
  Var& v = cache_[index];
  if (v.id < 0) {
    v = mutable_params_ && tape_.recording() ? tape_.param(mutable_params_->tensors[index])
                                             : tape_.constant_ref(params_->tensors[index].value);
  }
  return v;
}

Var ModelGraph::embed(const std::vector<int>& ids) {
  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);
  return tape_.add(tape_.gather_rows(param("embed.tokens"), ids), tape_.gather_rows(param("embed.positions"), positions));
}

Var ModelGraph::norm(Var x, const std::string& prefix) {
  return tape_.layer_norm(x, param(prefix + ".gain"), param(prefix + ".bias"));
}

Var ModelGraph::attention(Var q_in, Var k, Var v, const std::string& prefix, bool causal) {
  const int heads = params_->dims.n_heads;
  const int dh = params_->dims.d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Var q = tape_.matmul(q_in, param(prefix + ".q"));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = tape_.take_cols(q, h * dh, dh);
    Var kh = tape_.take_cols(k, h * dh, dh);
    Var vh = tape_.take_cols(v, h * dh, dh);
    Var p = tape_.softmax_rows(tape_.scale(tape_.matmul_transposed(qh, kh), scale), causal);
    outs.push_back(tape_.matmul(p, vh));
  }
  Var joined = heads == 1 ? outs[0] : tape_.concat_cols(outs);
  return tape_.matmul(joined, param(prefix + ".o"));
}

Var ModelGraph::ffn(Var x, const std::string& prefix) {
  Var h = tape_.gelu(tape_.add_row(tape_.matmul(x, param(prefix + ".in.weight")), param(prefix + ".in.bias")));
  return tape_.add_row(tape_.matmul(h, param(prefix + ".out.weight")), param(prefix + ".out.bias"));
}

Var ModelGraph::encode(const TokenSequence& x) {
  check_length(x.size(), params_->dims, "input");
  Var h = embed(x);
  for (int l = 0; l < params_->dims.enc_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    Var n = norm(h, p + ".attn_norm");
    h = tape_.add(h, attention(n, tape_.matmul(n, param(p + ".attn.k")), tape_.matmul(n, param(p + ".attn.v")),
                               p + ".attn", false));
    h = tape_.add(h, ffn(norm(h, p + ".ffn_norm"), p + ".ffn"));
  }
  return norm(h, "encoder.final_norm");
}

std::vector<std::pair<Var, Var>> ModelGraph::cross_memory(Var encoded) {
  std::vector<std::pair<Var, Var>> out;
  for (int l = 0; l < params_->dims.dec_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l) + ".cross_attn";
    out.emplace_back(tape_.matmul(encoded, param(p + ".k")), tape_.matmul(encoded, param(p + ".v")));
  }
  return out;
}

std::vector<std::pair<Var, Var>> ModelGraph::cross_memory(const HiddenStates& h) {
  std::vector<std::pair<Var, Var>> out;
  for (const auto& [k, v] : h.cross_kv) out.emplace_back(tape_.constant_ref(k), tape_.constant_ref(v));
  return out;
}

Var ModelGraph::decode(const std::vector<std::pair<Var, Var>>& memory, const std::vector<int>& y_in) {
  check_length(y_in.size(), params_->dims, "decoder input");
  Var h = embed(y_in);
  for (int l = 0; l < params_->dims.dec_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l);
    Var n = norm(h, p + ".self_norm");
    h = tape_.add(h, attention(n, tape_.matmul(n, param(p + ".self_attn.k")),
                               tape_.matmul(n, param(p + ".self_attn.v")), p + ".self_attn", true));
    const auto& [k, v] = memory[static_cast<std::size_t>(l)];
    h = tape_.add(h, attention(norm(h, p + ".cross_norm"), k, v, p + ".cross_attn", false));
    h = tape_.add(h, ffn(norm(h, p + ".ffn_norm"), p + ".ffn"));
  }
  return norm(h, "decoder.final_norm");
}

Var ModelGraph::logits(Var decoded) {
  return tape_.add_row(tape_.matmul_transposed(decoded, param("embed.tokens")), param("head.bias"));
}

// ---- inference ops ----

HiddenStates encode(const SeqModelParams& params, const TokenSequence& x) {
  Tape tape(false);
  ModelGraph g(tape, params);
  Var enc = g.encode(x);
  HiddenStates h;
  h.vectors = tape.value(enc);
  for (const auto& [k, v] : g.cross_memory(enc)) h.cross_kv.emplace_back(tape.value(k), tape.value(v));
  return h;
}

namespace {

std::vector<double> next_log_probs(const SeqModelParams& params, const HiddenStates& h, const std::vector<int>& y_prefix) {
  Tape tape(false);
  ModelGraph g(tape, params);
  Var dec = g.decode(g.cross_memory(h), y_prefix);
  const int last = static_cast<int>(y_prefix.size()) - 1;
  return log_softmax_row(tape.value(g.logits(tape.take_rows(dec, last, 1))), 0);
}

struct Partial {
  std::vector<int> tokens;
  double logp;
};

bool better(const Partial& a, const Partial& b) {
  return a.logp != b.logp ? a.logp > b.logp : a.tokens < b.tokens;
}

}  // namespace

ProbDistribution decode_step(const SeqModelParams& params, const HiddenStates& h, const std::vector<int>& y_prefix) {
  if (y_prefix.empty() || y_prefix.front() != Vocabulary::kBos) throw Error("decoder prefix must start with BOS");
  ProbDistribution out;
  out.probs = next_log_probs(params, h, y_prefix);
  for (double& p : out.probs) p = std::exp(p);
  return out;
}

std::vector<BeamHypothesis> beam_generate(const SeqModelParams& params, const TokenSequence& x, int k, int max_len) {
  return beam_generate(params, encode(params, x), k, max_len);
}

std::vector<BeamHypothesis> beam_generate(const SeqModelParams& params, const HiddenStates& h, int k, int max_len) {
  if (k < 1) throw Error("beam width must be at least 1");
  const auto width = static_cast<std::size_t>(k);
  // The decoder input is BOS plus the generated prefix, so it must fit.
  max_len = std::min(max_len, params.dims.max_seq_len);
  std::vector<Partial> alive{{{}, 0.0}};
  std::vector<Partial> done;
  for (int step = 0; step < max_len && !alive.empty(); ++step) {
    std::vector<Partial> expanded;
    for (const auto& hyp : alive) {
      const auto logp = next_log_probs(params, h, decoder_inputs(hyp.tokens));
      for (std::size_t tok = 0; tok < logp.size(); ++tok) {
        if (!generatable(static_cast<int>(tok))) continue;
        Partial next{hyp.tokens, hyp.logp + logp[tok]};
        next.tokens.push_back(static_cast<int>(tok));
        expanded.push_back(std::move(next));
      }
    }
    const std::size_t keep = std::min(width, expanded.size());
    std::partial_sort(expanded.begin(), expanded.begin() + static_cast<std::ptrdiff_t>(keep), expanded.end(), better);
    expanded.resize(keep);
    alive.clear();
    for (auto& p : expanded) (p.tokens.back() == Vocabulary::kEos ? done : alive).push_back(std::move(p));
    if (step == max_len - 1) {
      for (auto& p : alive) done.push_back(std::move(p));
      alive.clear();
    }
    if (done.size() >= width && !alive.empty()) {
      std::sort(done.begin(), done.end(), better);
      done.resize(width);
      // Extending a hypothesis can only lower its probability.
      const double best_alive = std::max_element(alive.begin(), alive.end(), [](const auto& a, const auto& b) {
                                  return a.logp < b.logp;
                                })->logp;
      if (best_alive < done.back().logp) alive.clear();
    }
  }
  std::sort(done.begin(), done.end(), better);
  if (done.size() > width) done.resize(width);
  std::vector<BeamHypothesis> out;
  out.reserve(done.size());
  for (auto& p : done) out.push_back({std::move(p.tokens), std::exp(p.logp), p.logp});
  return out;
}

double sequence_log_likelihood(const SeqModelParams& params, const HiddenStates& h, const std::vector<int>& tokens) {
  if (tokens.empty()) return 0.0;
  std::vector<int> y_in = decoder_inputs(tokens);
  y_in.pop_back();
  Tape tape(false);
  ModelGraph g(tape, params);
  const Matrix& z = tape.value(g.logits(g.decode(g.cross_memory(h), y_in)));
  double total = 0.0;
  for (std::size_t t = 0; t < tokens.size(); ++t)
    total += log_softmax_row(z, static_cast<Eigen::Index>(t))[static_cast<std::size_t>(tokens[t])];
  return total;
}

double sequence_likelihood(const SeqModelParams& params, const HiddenStates& h, const std::vector<int>& tokens) {
  return std::exp(sequence_log_likelihood(params, h, tokens));
}

double likelihood(const SeqModelParams& params, const HiddenStates& h, std::string_view type_text) {
  std::vector<int> ids = tokenize_type(type_text, params.vocab);
  ids.push_back(Vocabulary::kEos);
  return sequence_likelihood(params, h, ids);
}

double likelihood(const SeqModelParams& params, const TypeMissedFunction& func, std::string_view type_text) {
  return likelihood(params, encode(params, tokenize(func.function.source_text, params)), type_text);
}

double similarity(const SeqModelParams& params, const HiddenStates& h, std::string_view type_text) {
  Tape tape(false);
  ModelGraph g(tape, params);
  Var dec = g.decode(g.cross_memory(h), decoder_inputs(tokenize_type(type_text, params.vocab)));
  Var enc_mean = tape.constant(h.vectors.colwise().mean());
  return tape.scalar(tape.cosine(enc_mean, tape.mean_rows(dec)));
}

double similarity(const SeqModelParams& params, const TypeMissedFunction& func, std::string_view type_text) {
  return similarity(params, encode(params, tokenize(func.function.source_text, params)), type_text);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("cosine of vectors with different lengths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::max(std::sqrt(na), 1e-12) * std::max(std::sqrt(nb), 1e-12));
}

double infonce_loss(double sim_pos, const std::vector<double>& sim_negs) {
  if (sim_negs.empty()) throw EmptyNegatives("InfoNCE needs at least one negative");
  double mx = sim_pos;
  for (double s : sim_negs) mx = std::max(mx, s);
  double total = std::exp(sim_pos - mx);
  for (double s : sim_negs) total += std::exp(s - mx);
  return std::max(0.0, mx + std::log(total) - sim_pos);
}

}  // namespace gtr
