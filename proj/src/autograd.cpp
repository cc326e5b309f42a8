#include "gtr/autograd.hpp"

#include <cassert>
#include <cmath>
#include <limits>

namespace gtr::nn {
namespace {

constexpr double kSqrt2OverPi = 0.7978845608028654;
constexpr double kGeluCubic = 0.044715;

}  // namespace

double gelu_scalar(double x) {
  return 0.5 * x * (1.0 + std::tanh(kSqrt2OverPi * (x + kGeluCubic * x * x * x)));
}

const Matrix& Tape::val(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external ? *n.external : n.owned;
}

const Matrix& Tape::value(Var v) const { return val(v.id); }

const Matrix& Tape::grad(Var v) const { return node(v).grad; }

Var Tape::push(Matrix value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_slot(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) {
    const Matrix& v = val(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::accumulate(int id, const Matrix& g) { grad_slot(id) += g; }

Var Tape::constant(Matrix m) { return push(std::move(m)); }

Var Tape::constant_ref(const Matrix& m) {
  Node n;
  n.external = &m;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Parameter& p) {
  Var v = constant_ref(p.value);
  if (record_) node(v).param = &p;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  Var out = push(val(a.id) * val(b.id));
  if (record_) {
    node(out).back = [this, a, b, out] {
      const Matrix& g = nodes_[out.id].grad;
      accumulate(a.id, g * val(b.id).transpose());
      accumulate(b.id, val(a.id).transpose() * g);
    };
  }
  return out;
}

Var Tape::matmul_transposed(Var a, Var b) {
  Var out = push(val(a.id) * val(b.id).transpose());
  if (record_) {
    node(out).back = [this, a, b, out] {
      const Matrix& g = nodes_[out.id].grad;
      accumulate(a.id, g * val(b.id));
      accumulate(b.id, g.transpose() * val(a.id));
    };
  }
  return out;
}

Var Tape::add(Var a, Var b) {
  Var out = push(val(a.id) + val(b.id));
  if (record_) {
    node(out).back = [this, a, b, out] {
      const Matrix& g = nodes_[out.id].grad;
      accumulate(a.id, g);
      accumulate(b.id, g);
    };
  }
  return out;
}

Var Tape::add_row(Var a, Var row) {
  assert(val(row.id).rows() == 1 && val(row.id).cols() == val(a.id).cols());
  Matrix v = val(a.id);
  v.rowwise() += val(row.id).row(0);
  Var out = push(std::move(v));
  if (record_) {
    node(out).back = [this, a, row, out] {
      const Matrix& g = nodes_[out.id].grad;
      accumulate(a.id, g);
      accumulate(row.id, g.colwise().sum());
    };
  }
  return out;
}

Var Tape::scale(Var a, double s) {
  Var out = push(val(a.id) * s);
  if (record_) {
    node(out).back = [this, a, s, out] { accumulate(a.id, nodes_[out.id].grad * s); };
  }
  return out;
}

Var Tape::gelu(Var a) {
  const Matrix& x = val(a.id);
  Var out = push(x.unaryExpr([](double v) { return gelu_scalar(v); }));
  if (record_) {
    node(out).back = [this, a, out] {
      const Matrix& x = val(a.id);
      const Matrix d = x.unaryExpr([](double v) {
        const double u = kSqrt2OverPi * (v + kGeluCubic * v * v * v);
        const double t = std::tanh(u);
        const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCubic * v * v);
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      });
      accumulate(a.id, nodes_[out.id].grad.cwiseProduct(d));
    };
  }
  return out;
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& in = val(x.id);
  const auto cols = static_cast<double>(in.cols());
  Matrix xhat(in.rows(), in.cols());
  Eigen::VectorXd inv(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mean = in.row(r).mean();
    const double var = (in.row(r).array() - mean).square().sum() / cols;
    inv(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mean) * inv(r);
  }
  Matrix y = xhat;
  y.array().rowwise() *= val(gain.id).row(0).array();
  y.rowwise() += val(bias.id).row(0);
  Var out = push(std::move(y));
  if (record_) {
    node(out).back = [this, x, gain, bias, out, xhat, inv, cols] {
      const Matrix& g = nodes_[out.id].grad;
      accumulate(bias.id, g.colwise().sum());
      accumulate(gain.id, g.cwiseProduct(xhat).colwise().sum());
      Matrix dxhat = g;
      dxhat.array().rowwise() *= val(gain.id).row(0).array();
      Matrix dx(g.rows(), g.cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const double sum_d = dxhat.row(r).sum();
        const double sum_dx = dxhat.row(r).dot(xhat.row(r));
        dx.row(r) = (inv(r) / cols) *
                    (cols * dxhat.row(r).array() - sum_d - xhat.row(r).array() * sum_dx);
      }
      accumulate(x.id, dx);
    };
  }
  return out;
}

Var Tape::softmax_rows(Var a, bool causal) {
  const Matrix& in = val(a.id);
  Matrix p = Matrix::Zero(in.rows(), in.cols());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const Eigen::Index width = causal ? std::min<Eigen::Index>(r + 1, in.cols()) : in.cols();
    const double mx = in.row(r).head(width).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < width; ++c) {
      p(r, c) = std::exp(in(r, c) - mx);
      total += p(r, c);
    }
    p.row(r).head(width) /= total;
  }
  Var out = push(std::move(p));
  if (record_) {
    node(out).back = [this, a, out] {
      const Matrix& g = nodes_[out.id].grad;
      const Matrix& p = val(out.id);
      Matrix d = p.cwiseProduct(g);
      const Eigen::VectorXd row_dot = d.rowwise().sum();
      d -= p.cwiseProduct(row_dot.replicate(1, p.cols()));
      accumulate(a.id, d);
    };
  }
  return out;
}

Var Tape::gather_rows(Var table, std::span<const int> ids) {
  const Matrix& t = val(table.id);
  Matrix out_value(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out_value.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  Var out = push(std::move(out_value));
  if (record_) {
    std::vector<int> rows(ids.begin(), ids.end());
    node(out).back = [this, table, out, rows = std::move(rows)] {
      const Matrix& g = nodes_[out.id].grad;
      Matrix& dt = grad_slot(table.id);
      for (std::size_t i = 0; i < rows.size(); ++i) dt.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    };
  }
  return out;
}

Var Tape::take_rows(Var a, int begin, int count) {
  Var out = push(val(a.id).middleRows(begin, count));
  if (record_) {
    node(out).back = [this, a, out, begin, count] {
      grad_slot(a.id).middleRows(begin, count) += nodes_[out.id].grad;
    };
  }
  return out;
}

Var Tape::take_cols(Var a, int begin, int count) {
  Var out = push(val(a.id).middleCols(begin, count));
  if (record_) {
    node(out).back = [this, a, out, begin, count] {
      grad_slot(a.id).middleCols(begin, count) += nodes_[out.id].grad;
    };
  }
  return out;
}

Var Tape::concat_cols(std::span<const Var> parts) {
  Eigen::Index rows = val(parts[0].id).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) cols += val(p.id).cols();
  Matrix m(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    const Matrix& v = val(p.id);
    m.middleCols(at, v.cols()) = v;
    at += v.cols();
  }
  Var out = push(std::move(m));
  if (record_) {
    std::vector<Var> inputs(parts.begin(), parts.end());
    node(out).back = [this, out, inputs = std::move(inputs)] {
      const Matrix& g = nodes_[out.id].grad;
      Eigen::Index at = 0;
      for (Var p : inputs) {
        const Eigen::Index w = val(p.id).cols();
        accumulate(p.id, g.middleCols(at, w));
        at += w;
      }
    };
  }
  return out;
}

Var Tape::mean_rows(Var a) {
  const Matrix& in = val(a.id);
  Var out = push(in.colwise().mean());
  if (record_) {
    node(out).back = [this, a, out] {
      const Matrix& g = nodes_[out.id].grad;
      const Eigen::Index rows = val(a.id).rows();
      accumulate(a.id, g.replicate(rows, 1) / static_cast<double>(rows));
    };
  }
  return out;
}

Var Tape::cosine(Var a, Var b) {
  const Matrix& x = val(a.id);
  const Matrix& y = val(b.id);
  const double nx = std::max(x.norm(), 1e-12);
  const double ny = std::max(y.norm(), 1e-12);
  const double s = x.cwiseProduct(y).sum() / (nx * ny);
  Matrix m(1, 1);
  m(0, 0) = s;
  Var out = push(std::move(m));
  if (record_) {
    node(out).back = [this, a, b, out, nx, ny, s] {
      const double g = nodes_[out.id].grad(0, 0);
      const Matrix& x = val(a.id);
      const Matrix& y = val(b.id);
      accumulate(a.id, g * (y / (nx * ny) - s * x / (nx * nx)));
      accumulate(b.id, g * (x / (nx * ny) - s * y / (ny * ny)));
    };
  }
  return out;
}

Var Tape::cross_entropy(Var logits, std::span<const int> targets) {
  const Matrix& z = val(logits.id);
  assert(static_cast<std::size_t>(z.rows()) == targets.size());
  Matrix probs(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    const auto e = (z.row(r).array() - mx).exp();
    const double total = e.sum();
    probs.row(r) = e / total;
    loss += std::log(total) + mx - z(r, targets[static_cast<std::size_t>(r)]);
  }
  const double rows = static_cast<double>(z.rows());
  Matrix m(1, 1);
  m(0, 0) = loss / rows;
  Var out = push(std::move(m));
  if (record_) {
    std::vector<int> tgt(targets.begin(), targets.end());
    node(out).back = [this, logits, out, probs = std::move(probs), tgt = std::move(tgt), rows] {
      const double g = nodes_[out.id].grad(0, 0);
      Matrix d = probs;
      for (std::size_t r = 0; r < tgt.size(); ++r) d(static_cast<Eigen::Index>(r), tgt[r]) -= 1.0;
      accumulate(logits.id, d * (g / rows));
    };
  }
  return out;
}

Var Tape::info_nce(Var sims) {
  const Matrix& s = val(sims.id);
  const double mx = s.maxCoeff();
  const Matrix e = (s.array() - mx).exp();
  const double total = e.sum();
  Matrix m(1, 1);
  m(0, 0) = std::log(total) + mx - s(0, 0);
  Var out = push(std::move(m));
  if (record_) {
    Matrix soft = e / total;
    node(out).back = [this, sims, out, soft = std::move(soft)] {
      const double g = nodes_[out.id].grad(0, 0);
      Matrix d = soft;
      d(0, 0) -= 1.0;
      accumulate(sims.id, d * g);
    };
  }
  return out;
}

void Tape::backward(Var root) {
  assert(record_);
  Matrix seed = Matrix::Ones(1, 1);
  accumulate(root.id, seed);
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back();
    if (n.param) {
      if (n.param->grad.size() == 0) n.param->grad = Matrix::Zero(n.param->value.rows(), n.param->value.cols());
      n.param->grad += n.grad;
    }
  }
}

}  // namespace gtr::nn
