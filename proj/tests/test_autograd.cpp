#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "gtr/autograd.hpp"

using namespace gtr::nn;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Largest relative disagreement between backward() and central differences.
double max_rel_error(std::vector<Parameter>& params, const Builder& build) {
  for (auto& p : params) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
  {
    Tape tape;
    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(tape.param(p));
    tape.backward(build(tape, vars));
  }
  auto eval = [&] {
    Tape tape(false);
    std::vector<Var> vars;
    for (auto& p : params) vars.push_back(tape.param(p));
    return tape.scalar(build(tape, vars));
  };
  double worst = 0.0;
  const double h = 1e-5;
  for (auto& p : params) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double saved = p.value.data()[i];
      p.value.data()[i] = saved + h;
      const double up = eval();
      p.value.data()[i] = saved - h;
      const double down = eval();
      p.value.data()[i] = saved;
      const double fd = (up - down) / (2 * h);
      const double an = p.grad.data()[i];
      worst = std::max(worst, std::abs(fd - an) / std::max(1e-7, std::abs(fd) + std::abs(an)));
    }
  }
  return worst;
}

// u^T x w with fixed random u, w: touches every entry of x.
struct Reducer {
  Matrix u;
  Matrix w;
  Reducer(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols)
      : u(random_matrix(rng, 1, rows)), w(random_matrix(rng, cols, 1)) {}
  Var operator()(Tape& t, Var x) const { return t.matmul(t.constant(u), t.matmul(x, t.constant(w))); }
};

Parameter make(std::mt19937_64& rng, const char* name, Eigen::Index r, Eigen::Index c) {
  return Parameter{name, random_matrix(rng, r, c), {}};
}

}  // namespace

TEST_CASE("forward values of basic ops") {
  Tape t(false);
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Var va = t.constant(a);
  CHECK(t.value(t.matmul(va, va)) == a * a);
  CHECK(t.value(t.mean_rows(va))(0, 1) == doctest::Approx(3.0));
  Var sm = t.softmax_rows(va, true);
  CHECK(t.value(sm)(0, 0) == doctest::Approx(1.0));
  CHECK(t.value(sm)(0, 1) == 0.0);
  CHECK(t.value(sm).row(1).sum() == doctest::Approx(1.0));
  Matrix r(1, 3);
  r << 0.0, 0.0, 0.0;
  const int tgt[] = {1};
  CHECK(t.scalar(t.cross_entropy(t.constant(r), tgt)) == doctest::Approx(std::log(3.0)));
  CHECK(gelu_scalar(0.0) == 0.0);
  CHECK(gelu_scalar(10.0) == doctest::Approx(10.0));
}

TEST_CASE("gradients of every op match central differences") {
  std::mt19937_64 rng(5);
  const double tol = 1e-6;

  SUBCASE("matmul, matmul_transposed, add, add_row, scale") {
    std::vector<Parameter> ps = {make(rng, "a", 3, 4), make(rng, "b", 4, 2), make(rng, "c", 5, 4),
                                 make(rng, "r", 1, 2)};
    Reducer red(rng, 3, 2);
    CHECK(max_rel_error(ps, [&](Tape& t, const std::vector<Var>& v) {
            Var ab = t.matmul(v[0], v[1]);
            Var ac = t.matmul_transposed(v[0], v[2]);     // 3x5
            Var acb = t.matmul(ac, t.matmul(v[2], v[1]));  // 3x2
            return red(t, t.scale(t.add_row(t.add(ab, acb), v[3]), 0.7));
          }) < tol);
  }
  SUBCASE("gelu and layer_norm") {
    std::vector<Parameter> ps = {make(rng, "x", 3, 6), make(rng, "g", 1, 6), make(rng, "b", 1, 6)};
    Reducer red(rng, 3, 6);
    CHECK(max_rel_error(ps, [&](Tape& t, const std::vector<Var>& v) {
            return red(t, t.gelu(t.layer_norm(v[0], v[1], v[2])));
          }) < tol);
  }
  SUBCASE("softmax, causal and not") {
    std::vector<Parameter> ps = {make(rng, "x", 4, 4)};
    Reducer red(rng, 4, 4);
    CHECK(max_rel_error(ps, [&](Tape& t, const std::vector<Var>& v) {
            return red(t, t.add(t.softmax_rows(v[0], true), t.softmax_rows(v[0], false)));
          }) < tol);
  }
  SUBCASE("gather, slicing, concat, mean") {
    std::vector<Parameter> ps = {make(rng, "table", 5, 4)};
    Reducer red(rng, 1, 6);
    const std::vector<int> ids = {3, 0, 3, 4};
    CHECK(max_rel_error(ps, [&](Tape& t, const std::vector<Var>& v) {
            Var g = t.gather_rows(v[0], ids);
            Var rows = t.take_rows(g, 1, 3);
            const Var parts[] = {t.take_cols(rows, 0, 2), rows};
            return red(t, t.mean_rows(t.concat_cols(parts)));
          }) < tol);
  }
  SUBCASE("cosine, info_nce, cross_entropy") {
    std::vector<Parameter> ps = {make(rng, "a", 1, 5), make(rng, "b", 1, 5), make(rng, "c", 1, 5),
                                 make(rng, "z", 3, 7)};
    const std::vector<int> targets = {2, 6, 0};
    CHECK(max_rel_error(ps, [&](Tape& t, const std::vector<Var>& v) {
            const Var sims[] = {t.cosine(v[0], v[1]), t.cosine(v[0], v[2]), t.cosine(v[1], v[2])};
            Var nce = t.info_nce(t.scale(t.concat_cols(sims), 3.0));
            return t.add(nce, t.cross_entropy(v[3], targets));
          }) < tol);
  }
}

TEST_CASE("a parameter used twice accumulates both paths") {
  Parameter p{"p", Matrix::Constant(1, 1, 3.0), {}};
  Tape t;
  Var v = t.param(p);
  t.backward(t.matmul(v, v));
  CHECK(p.grad(0, 0) == doctest::Approx(6.0));
}
