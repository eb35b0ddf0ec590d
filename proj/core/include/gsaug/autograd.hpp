#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major double
// matrices. Each op records its parents and a backward closure; `backward`
// walks the recorded graph in reverse topological order.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace gsaug {
class Rng;
}

namespace gsaug::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  static Var constant(Matrix value) { return Var(std::move(value), false); }
  static Var scalar(double x);
  static Var from_node(std::shared_ptr<Node> node);

  const Matrix& value() const { return node_->value; }
  /// Direct write access, for optimizers and finite-difference probes.
  Matrix& mutable_value() { return node_->value; }
  /// Accumulated gradient (zeros when nothing has flowed into this node).
  Matrix grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// While alive, ops on this thread record no graph (results are constants).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Back-propagates from a 1x1 value.
void backward(const Var& loss);

/// Row-compressed sparse matrix used for message passing and attention masks.
struct Csr {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<std::size_t> offsets;  // rows + 1
  std::vector<int> indices;
  std::vector<double> weights;  // empty means all ones
};

Var matmul(const Var& a, const Var& b);
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// Adds a 1 x c row to every row of a.
Var add_row(const Var& a, const Var& row);
/// Multiplies row r of a by w(r, 0).
Var scale_rows(const Var& a, const Var& w);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
Var log_softmax_rows(const Var& a);
Var concat_cols(const Var& a, const Var& b);
Var gather_rows(const Var& a, std::span<const int> index);
/// Per-segment row mean; rows with segment id < 0 are skipped.
Var segment_mean(const Var& a, std::span<const int> segment, int num_segments);
Var segment_sum(const Var& a, std::span<const int> segment, int num_segments);
/// out = A * x for a constant sparse A.
Var spmm(const Csr& a, const Var& x);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
/// Multi-head scaled dot-product attention where row i attends to the column
/// set of row i in `mask`.
Var masked_attention(const Var& q, const Var& k, const Var& v, const Csr& mask, int heads);
/// Elementwise KL(Bernoulli(q) || Bernoulli(p)) with p clamped to
/// [1e-12, 1 - 1e-12] inside the logs and 0 log 0 = 0 on the q side.
Var bernoulli_kl(const Var& q, const Var& p);
Var dropout(const Var& a, double rate, Rng& rng);

}  // namespace gsaug::ag
