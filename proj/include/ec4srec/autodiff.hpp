#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <random>
#include <vector>

namespace ec4srec::ad {

using Matrix = Eigen::MatrixXd;

// One value in the computation graph. `grad` stays empty (0x0) until the
// backward sweep first touches the node, which doubles as a "this subtree
// received no gradient" marker so untouched closures can be skipped.
struct Node {
  Matrix value;
  Matrix grad;
  std::function<void()> backward;
  std::vector<std::shared_ptr<Node>> parents;
  bool requires_grad = false;

  bool has_grad() const { return grad.size() != 0; }
  Matrix& grad_ref();
  void accumulate(const Matrix& g);
};

using Var = std::shared_ptr<Node>;

// A persistent leaf (parameter or explanation input); never owned by a tape.
Var make_leaf(Matrix value, bool requires_grad);

// Records ops in creation order; backward() replays them in reverse.
// Leaves accumulate gradients across multiple backward() calls until
// their grad is cleared, which is what a shared-parameter step needs.
class Tape {
 public:
  // Backward closures capture their own node, so tearing the tape down must
  // drop them or the self-reference would keep every node alive.
  ~Tape();

  Var constant(Matrix value) { return make_leaf(std::move(value), false); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var add_row_broadcast(Var x, Var row);  // row is 1xC, added to every row of x
  Var hadamard(Var a, Var b);
  Var scale(Var x, double s);
  Var matmul(Var a, Var b);
  Var matmul_transposed(Var a, Var b);  // a * b^T
  Var relu(Var x);
  Var sigmoid(Var x);
  Var tanh_act(Var x);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-12);
  // Inverted dropout; only call in training mode (identity is "don't call").
  Var dropout(Var x, double rate, std::mt19937_64& rng);
  Var gather_rows(Var x, std::vector<int> rows);
  // Row-gather from an embedding table; ids may repeat (scatter-add backward).
  Var embedding(Var table, std::vector<int> ids);
  Var slice_cols(Var x, int first, int count);
  Var concat_cols(const std::vector<Var>& parts);
  Var scale_rows(Var x, Eigen::VectorXd factors);  // row i *= factors(i)
  // Row-wise softmax of (x + additive_mask); masked entries get prob ~0.
  Var softmax_rows(Var x, Matrix additive_mask);
  // q,k: (batch*len) x d. Result row (b,t) holds q_{b,t} . k_{b,j} for all j.
  Var batched_scores(Var q, Var k, int batch, int len);
  // p: (batch*len) x len, v: (batch*len) x d. Row (b,t) = sum_j p[(b,t),j] v_{b,j}.
  Var batched_weighted_sum(Var p, Var v, int batch, int len);
  Var rows_dot(Var a, Var b);  // n x 1 of row-wise dots
  // n x 1 column: h_i . table[ids[i]]; gradients reach both h and the table.
  Var dot_embedding_rows(Var h, Var table, std::vector<int> ids);

  // Runs every recorded closure in reverse creation order. Callers seed
  // gradients beforehand via Node::accumulate on any recorded node.
  void backward();

  size_t size() const { return nodes_.size(); }

 private:
  Var record(Matrix value, std::vector<Var> parents);
  std::vector<Var> nodes_;
};

}  // namespace ec4srec::ad
