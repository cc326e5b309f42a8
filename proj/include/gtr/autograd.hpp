#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gtr::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A learnable tensor. `grad` accumulates across backward passes until the
// optimizer clears it.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

struct Var {
  int id = -1;
};

// Reverse-mode tape over dense matrices. Every op computes its value eagerly;
// when recording, it also stores a backward closure. Not thread-safe; use one
// tape per thread.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  double scalar(Var v) const { return value(v)(0, 0); }

  Var constant(Matrix m);
  // Read-only view of an external matrix; it must outlive the tape.
  Var constant_ref(const Matrix& m);
  // Leaf whose gradient is added to `p.grad` by backward().
  Var param(Parameter& p);

  Var matmul(Var a, Var b);
  Var matmul_transposed(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // adds a 1xC row to every row of a
  Var scale(Var a, double s);
  Var gelu(Var a);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  // Row-wise softmax; with `causal`, column j > row i is masked out.
  Var softmax_rows(Var a, bool causal);
  Var gather_rows(Var table, std::span<const int> ids);
  Var take_rows(Var a, int begin, int count);
  Var take_cols(Var a, int begin, int count);
  Var concat_cols(std::span<const Var> parts);
  Var mean_rows(Var a);
  // Cosine similarity of two 1xD rows, as a 1x1.
  Var cosine(Var a, Var b);
  // Mean over rows of -log softmax(logits)[row, target].
  Var cross_entropy(Var logits, std::span<const int> targets);
  // -log softmax(sims)[0] for a 1xN row whose first entry is the positive.
  Var info_nce(Var sims);

  // Seeds d(root)/d(root) = 1 and propagates. `root` must be 1x1.
  void backward(Var root);

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Parameter* param = nullptr;
    Matrix grad;
    std::function<void()> back;
  };

  Var push(Matrix value);
  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }
  const Matrix& val(int id) const;
  void accumulate(int id, const Matrix& g);
  Matrix& grad_slot(int id);

  bool record_;
  std::vector<Node> nodes_;
};

double gelu_scalar(double x);

}  // namespace gtr::nn
