#include <doctest.h>

#include <functional>
#include <random>
#include <vector>

#include "ec4srec/autodiff.hpp"
#include "oracles.hpp"

using namespace ec4srec;
using ad::Matrix;

namespace {

Matrix random_matrix(int r, int c, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

using Builder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

// Compares the tape's gradients for every input against central finite
// differences of the weighted output sum.
void check_gradients(const Builder& build, std::vector<Matrix> inputs, double tol = 1e-6) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  for (const auto& m : inputs) leaves.push_back(ad::make_leaf(m, true));
  ad::Var out = build(tape, leaves);
  const Matrix w = random_matrix(static_cast<int>(out->value.rows()),
                                 static_cast<int>(out->value.cols()), 777);
  out->accumulate(w);
  tape.backward();

  for (size_t i = 0; i < inputs.size(); ++i) {
    auto fd = oracles::fd_gradient(
        [&](const Matrix& x) {
          ad::Tape t;
          std::vector<ad::Var> ls;
          for (size_t j = 0; j < inputs.size(); ++j)
            ls.push_back(ad::make_leaf(j == i ? x : inputs[j], false));
          ad::Var o = build(t, ls);
          return (o->value.array() * w.array()).sum();
        },
        inputs[i]);
    Matrix got = leaves[i]->has_grad() ? leaves[i]->grad
                                       : Matrix::Zero(inputs[i].rows(), inputs[i].cols());
    CHECK(oracles::max_rel_err(got, fd) < tol);
  }
}

}  // namespace

TEST_CASE("elementwise and linear ops match finite differences") {
  auto a = random_matrix(3, 4, 1), b = random_matrix(3, 4, 2);
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) { return t.add(v[0], v[1]); },
                  {a, b});
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) { return t.sub(v[0], v[1]); },
                  {a, b});
  check_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) { return t.hadamard(v[0], v[1]); }, {a, b});
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) { return t.scale(v[0], -2.5); },
                  {a});
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.add_row_broadcast(v[0], v[1]);
  }, {a, random_matrix(1, 4, 3)});
}

TEST_CASE("matmul family matches finite differences") {
  auto a = random_matrix(3, 4, 4), b = random_matrix(4, 2, 5), c = random_matrix(5, 4, 6);
  check_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) { return t.matmul(v[0], v[1]); }, {a, b});
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.matmul_transposed(v[0], v[1]);
  }, {a, c});
}

TEST_CASE("activations match finite differences") {
  auto a = random_matrix(3, 4, 7);
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) { return t.relu(v[0]); }, {a},
                  1e-5);
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) { return t.sigmoid(v[0]); },
                  {a});
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) { return t.tanh_act(v[0]); },
                  {a});
}

TEST_CASE("layer_norm matches finite differences for input, gain and bias") {
  auto x = random_matrix(3, 6, 8);
  auto gain = random_matrix(1, 6, 9).array().abs().matrix() + Matrix::Constant(1, 6, 0.5);
  auto bias = random_matrix(1, 6, 10);
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.layer_norm(v[0], v[1], v[2]);
  }, {x, gain, bias}, 1e-5);
}

TEST_CASE("softmax_rows with additive mask matches finite differences") {
  auto x = random_matrix(3, 5, 11);
  Matrix mask = Matrix::Zero(3, 5);
  mask(0, 4) = -1e9;  // a masked-out logit
  mask(2, 0) = -1e9;
  check_gradients([mask](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.softmax_rows(v[0], mask);
  }, {x}, 1e-5);
}

TEST_CASE("gather, slice, concat and scale_rows match finite differences") {
  auto x = random_matrix(4, 6, 12);
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.gather_rows(v[0], {3, 0, 0, 2});
  }, {x});
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.slice_cols(v[0], 1, 3);
  }, {x});
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.concat_cols({v[0], v[1]});
  }, {x, random_matrix(4, 2, 13)});
  Eigen::VectorXd f(4);
  f << 0.5, -1.0, 0.0, 2.0;
  check_gradients([f](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.scale_rows(v[0], f);
  }, {x});
}

TEST_CASE("embedding scatter-adds gradients for repeated ids") {
  auto table = random_matrix(5, 3, 14);
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.embedding(v[0], {0, 2, 2, 4, 2});
  }, {table});

  // Explicit scatter-add check: row 2 used three times accumulates 3x.
  ad::Tape tape;
  auto leaf = ad::make_leaf(table, true);
  auto out = tape.embedding(leaf, {2, 2, 2});
  out->accumulate(Matrix::Ones(3, 3));
  tape.backward();
  CHECK(leaf->grad.row(2).isApprox(Eigen::RowVector3d(3, 3, 3)));
  CHECK(leaf->grad.row(0).isZero());
}

TEST_CASE("batched attention helpers match finite differences") {
  const int batch = 2, len = 3, d = 4;
  auto q = random_matrix(batch * len, d, 15);
  auto k = random_matrix(batch * len, d, 16);
  check_gradients([batch, len](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.batched_scores(v[0], v[1], batch, len);
  }, {q, k});

  auto p = random_matrix(batch * len, len, 17);
  auto vv = random_matrix(batch * len, d, 18);
  check_gradients([batch, len](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.batched_weighted_sum(v[0], v[1], batch, len);
  }, {p, vv});
}

TEST_CASE("rows_dot and dot_embedding_rows match finite differences") {
  auto a = random_matrix(4, 3, 19), b = random_matrix(4, 3, 20);
  check_gradients(
      [](ad::Tape& t, const std::vector<ad::Var>& v) { return t.rows_dot(v[0], v[1]); }, {a, b});

  auto h = random_matrix(3, 4, 21);
  auto table = random_matrix(6, 4, 22);
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) {
    return t.dot_embedding_rows(v[0], v[1], {5, 1, 1});
  }, {h, table});
}

TEST_CASE("dropout gradient matches finite differences with a replayed mask") {
  auto x = random_matrix(4, 5, 23);
  check_gradients([](ad::Tape& t, const std::vector<ad::Var>& v) {
    std::mt19937_64 rng(99);  // same mask on every rebuild
    return t.dropout(v[0], 0.4, rng);
  }, {x});
}

TEST_CASE("dropout scales kept entries by 1/(1-rate)") {
  auto x = Matrix::Ones(50, 50);
  ad::Tape tape;
  auto leaf = ad::make_leaf(x, false);
  std::mt19937_64 rng(7);
  auto out = tape.dropout(leaf, 0.25, rng);
  int kept = 0;
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) {
      if (out->value(i, j) != 0.0) {
        ++kept;
        CHECK(out->value(i, j) == doctest::Approx(1.0 / 0.75));
      }
    }
  // Roughly 75% of entries survive.
  CHECK(kept > 50 * 50 * 0.68);
  CHECK(kept < 50 * 50 * 0.82);
}

TEST_CASE("gradients accumulate across repeated use of one leaf") {
  auto x = random_matrix(2, 2, 24);
  auto leaf = ad::make_leaf(x, true);
  Matrix w = Matrix::Ones(2, 2);
  {
    ad::Tape tape;
    auto out = tape.add(leaf, leaf);  // dL/dx = 2W
    out->accumulate(w);
    tape.backward();
  }
  CHECK(leaf->grad.isApprox(2 * w));

  // A later tape touching the same leaf adds on top until the gradient is
  // cleared (shared-parameter contract).
  {
    ad::Tape tape;
    auto out = tape.scale(leaf, 3.0);
    out->accumulate(w);
    tape.backward();
  }
  CHECK(leaf->grad.isApprox(5 * w));
}

TEST_CASE("tape teardown releases interior nodes") {
  auto leaf = ad::make_leaf(Matrix::Ones(2, 2), true);
  std::weak_ptr<ad::Node> probe;
  {
    ad::Tape tape;
    auto mid = tape.scale(leaf, 2.0);
    auto out = tape.add(mid, mid);
    out->accumulate(Matrix::Ones(2, 2));
    tape.backward();
    probe = mid;
  }
  // the backward closures self-reference their nodes; the tape must break
  // that on teardown or long runs leak every step's whole graph
  CHECK(probe.expired());
  CHECK(leaf->grad.isApprox(4 * Matrix::Ones(2, 2)));
}

TEST_CASE("untouched subtrees report no gradient") {
  auto x = random_matrix(2, 2, 25);
  ad::Tape tape;
  auto used = ad::make_leaf(x, true);
  auto unused = ad::make_leaf(x, true);
  auto out = tape.scale(used, 3.0);
  (void)tape.add(unused, unused);  // recorded but never seeded
  out->accumulate(Matrix::Ones(2, 2));
  tape.backward();
  CHECK(used->has_grad());
  CHECK_FALSE(unused->has_grad());
}

TEST_CASE("a deep composite graph matches finite differences") {
  auto x = random_matrix(3, 4, 26);
  auto w1 = random_matrix(4, 4, 27);
  auto w2 = random_matrix(4, 2, 28);
  check_gradients([&](ad::Tape& t, const std::vector<ad::Var>& v) {
    auto h = t.relu(t.matmul(v[0], v[1]));
    h = t.layer_norm(h, t.constant(Matrix::Ones(1, 4)), t.constant(Matrix::Zero(1, 4)));
    h = t.add(h, v[0]);
    return t.matmul(t.sigmoid(h), v[2]);
  }, {x, w1, w2}, 1e-5);
}
