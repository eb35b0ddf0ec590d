#include "gsaug/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "gsaug/error.hpp"
#include "gsaug/rng.hpp"

namespace gsaug::ag {
namespace {

thread_local bool g_grad_enabled = true;

constexpr double kProbEps = 1e-12;

using Parents = std::vector<std::shared_ptr<Node>>;

/// Wraps an op result. When no parent needs a gradient (or recording is off)
/// the result is a detached constant.
Var make(Matrix value, Parents parents, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs |= p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var::from_node(std::move(node));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                std::to_string(b.cols()) + ")");
  }
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Var::scalar(double x) {
  Matrix m(1, 1);
  m(0, 0) = x;
  return constant(std::move(m));
}

Var Var::from_node(std::shared_ptr<Node> node) {
  Var v;
  v.node_ = std::move(node);
  return v;
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

double Var::item() const {
  if (rows() != 1 || cols() != 1) throw Error("item() on a non-scalar value");
  return node_->value(0, 0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) throw Error("backward() needs a scalar loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }
  // Interior gradients are not needed after the pass; leaves keep theirs.
  for (Node* node : order) {
    if (node->backward) node->grad.resize(0, 0);
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw Error("matmul: inner dimension mismatch");
  return make(a.value() * b.value(), {a.node(), b.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate(self.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * self.grad);
  });
}

Var operator+(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a.node(), b.node()}, [](Node& self) {
    for (auto& p : self.parents) {
      if (p->requires_grad) p->accumulate(self.grad);
    }
  });
}

Var operator-(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a.node(), b.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate(-self.grad);
  });
}

Var hadamard(const Var& a, const Var& b) {
  check_same_shape(a, b, "hadamard");
  return make(a.value().cwiseProduct(b.value()), {a.node(), b.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate(self.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(self.grad.cwiseProduct(pa.value));
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a.node()}, [s](Node& self) { self.parents[0]->accumulate(self.grad * s); });
}

Var add_scalar(const Var& a, double s) {
  Matrix v = a.value().array() + s;
  return make(std::move(v), {a.node()}, [](Node& self) { self.parents[0]->accumulate(self.grad); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw Error("add_row: bias shape mismatch");
  Matrix v = a.value().rowwise() + row.value().row(0);
  return make(std::move(v), {a.node(), row.node()}, [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate(self.grad.colwise().sum());
  });
}

Var scale_rows(const Var& a, const Var& w) {
  if (w.rows() != a.rows() || w.cols() != 1) throw Error("scale_rows: weight shape mismatch");
  Matrix v = a.value().array().colwise() * w.value().col(0).array();
  return make(std::move(v), {a.node(), w.node()}, [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pw = *self.parents[1];
    if (pa.requires_grad) {
      Matrix g = self.grad.array().colwise() * pw.value.col(0).array();
      pa.accumulate(g);
    }
    if (pw.requires_grad) pw.accumulate(self.grad.cwiseProduct(pa.value).rowwise().sum());
  });
}

Var relu(const Var& a) {
  Matrix v = a.value().cwiseMax(0.0);
  return make(std::move(v), {a.node()}, [](Node& self) {
    Matrix g = (self.parents[0]->value.array() > 0.0).select(self.grad, 0.0);
    self.parents[0]->accumulate(g);
  });
}

Var sigmoid(const Var& a) {
  Matrix v = a.value().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return make(std::move(v), {a.node()}, [](Node& self) {
    Matrix g = self.grad.array() * self.value.array() * (1.0 - self.value.array());
    self.parents[0]->accumulate(g);
  });
}

Var abs(const Var& a) {
  return make(a.value().cwiseAbs(), {a.node()}, [](Node& self) {
    Matrix sign = self.parents[0]->value.unaryExpr([](double x) { return double((x > 0) - (x < 0)); });
    self.parents[0]->accumulate(self.grad.cwiseProduct(sign));
  });
}

Var square(const Var& a) {
  return make(a.value().cwiseAbs2(), {a.node()}, [](Node& self) {
    self.parents[0]->accumulate(2.0 * self.grad.cwiseProduct(self.parents[0]->value));
  });
}

Var sum(const Var& a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return make(std::move(v), {a.node()}, [](Node& self) {
    const auto& p = self.parents[0]->value;
    self.parents[0]->accumulate(Matrix::Constant(p.rows(), p.cols(), self.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const auto count = static_cast<double>(std::max<Eigen::Index>(a.value().size(), 1));
  return scale(sum(a), 1.0 / count);
}

Var log_softmax_rows(const Var& a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    const double lse = mx + std::log((x.row(r).array() - mx).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  return make(std::move(out), {a.node()}, [](Node& self) {
    Matrix soft = self.value.array().exp();
    Matrix g = self.grad - (soft.array().colwise() * self.grad.rowwise().sum().array()).matrix();
    self.parents[0]->accumulate(g);
  });
}

Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw Error("concat_cols: row mismatch");
  Matrix v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  const Eigen::Index ca = a.cols();
  return make(std::move(v), {a.node(), b.node()}, [ca](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.accumulate(self.grad.leftCols(ca));
    if (pb.requires_grad) pb.accumulate(self.grad.rightCols(self.grad.cols() - ca));
  });
}

Var gather_rows(const Var& a, std::span<const int> index) {
  Matrix v(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw Error("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return make(std::move(v), {a.node()}, [idx = std::move(idx)](Node& self) {
    auto& p = *self.parents[0];
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    p.accumulate(g);
  });
}

Var segment_sum(const Var& a, std::span<const int> segment, int num_segments) {
  if (static_cast<Eigen::Index>(segment.size()) != a.rows()) throw Error("segment_sum: size mismatch");
  Matrix v = Matrix::Zero(num_segments, a.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] >= 0) v.row(segment[i]) += a.value().row(static_cast<Eigen::Index>(i));
  }
  std::vector<int> seg(segment.begin(), segment.end());
  return make(std::move(v), {a.node()}, [seg = std::move(seg)](Node& self) {
    auto& p = *self.parents[0];
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < seg.size(); ++i) {
      if (seg[i] >= 0) g.row(static_cast<Eigen::Index>(i)) = self.grad.row(seg[i]);
    }
    p.accumulate(g);
  });
}

Var segment_mean(const Var& a, std::span<const int> segment, int num_segments) {
  Matrix inv = Matrix::Zero(num_segments, 1);
  for (int s : segment) {
    if (s >= 0) inv(s, 0) += 1.0;
  }
  for (Eigen::Index s = 0; s < num_segments; ++s) inv(s, 0) = inv(s, 0) > 0 ? 1.0 / inv(s, 0) : 0.0;
  return scale_rows(segment_sum(a, segment, num_segments), Var::constant(std::move(inv)));
}

Var spmm(const Csr& a, const Var& x) {
  if (a.cols != x.rows()) throw Error("spmm: dimension mismatch");
  Matrix v = Matrix::Zero(a.rows, x.cols());
  const bool weighted = !a.weights.empty();
  for (Eigen::Index r = 0; r < a.rows; ++r) {
    for (std::size_t e = a.offsets[r]; e < a.offsets[r + 1]; ++e) {
      const double w = weighted ? a.weights[e] : 1.0;
      v.row(r) += w * x.value().row(a.indices[e]);
    }
  }
  // The sparse operator is shared by value; it is small relative to activations.
  return make(std::move(v), {x.node()}, [a](Node& self) {
    auto& p = *self.parents[0];
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    const bool weighted = !a.weights.empty();
    for (Eigen::Index r = 0; r < a.rows; ++r) {
      for (std::size_t e = a.offsets[r]; e < a.offsets[r + 1]; ++e) {
        const double w = weighted ? a.weights[e] : 1.0;
        g.row(a.indices[e]) += w * self.grad.row(r);
      }
    }
    p.accumulate(g);
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Matrix& in = x.value();
  const Eigen::Index d = in.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw Error("layer_norm: parameter shape mismatch");
  }
  Matrix xhat(in.rows(), d);
  Eigen::VectorXd inv_std(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double mu = in.row(r).mean();
    const double var = (in.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  return make(std::move(out), {x.node(), gain.node(), bias.node()},
              [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                auto& px = *self.parents[0];
                auto& pg = *self.parents[1];
                auto& pb = *self.parents[2];
                if (pg.requires_grad) pg.accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
                if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
                if (px.requires_grad) {
                  Matrix dxhat = self.grad.array().rowwise() * pg.value.row(0).array();
                  Matrix g(dxhat.rows(), dxhat.cols());
                  for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                    const double m1 = dxhat.row(r).mean();
                    const double m2 = dxhat.row(r).dot(xhat.row(r)) / static_cast<double>(dxhat.cols());
                    g.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                  }
                  px.accumulate(g);
                }
              });
}

Var masked_attention(const Var& q, const Var& k, const Var& v, const Csr& mask, int heads) {
  check_same_shape(q, k, "masked_attention");
  check_same_shape(q, v, "masked_attention");
  const Eigen::Index n = q.rows();
  const Eigen::Index d = q.cols();
  if (heads < 1 || d % heads != 0) throw Error("masked_attention: width not divisible by heads");
  if (mask.rows != n || mask.cols != n) throw Error("masked_attention: mask shape mismatch");
  const Eigen::Index dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  Matrix out = Matrix::Zero(n, d);
  // attention weights, laid out [edge][head]
  std::vector<double> alpha(mask.indices.size() * static_cast<std::size_t>(heads));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t b = mask.offsets[i];
    const std::size_t e = mask.offsets[i + 1];
    for (int h = 0; h < heads; ++h) {
      const Eigen::Index c0 = h * dh;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t t = b; t < e; ++t) {
        const double s = Q.row(i).segment(c0, dh).dot(K.row(mask.indices[t]).segment(c0, dh)) * inv_sqrt;
        alpha[t * heads + h] = s;
        mx = std::max(mx, s);
      }
      double z = 0;
      for (std::size_t t = b; t < e; ++t) {
        double& a = alpha[t * heads + h];
        a = std::exp(a - mx);
        z += a;
      }
      for (std::size_t t = b; t < e; ++t) {
        double& a = alpha[t * heads + h];
        a /= z;
        out.row(i).segment(c0, dh) += a * V.row(mask.indices[t]).segment(c0, dh);
      }
    }
  }

  return make(std::move(out), {q.node(), k.node(), v.node()},
              [mask, alpha = std::move(alpha), heads, dh, inv_sqrt](Node& self) {
                auto& pq = *self.parents[0];
                auto& pk = *self.parents[1];
                auto& pv = *self.parents[2];
                const Matrix& Q = pq.value;
                const Matrix& K = pk.value;
                const Matrix& V = pv.value;
                const Matrix& G = self.grad;
                Matrix dq = Matrix::Zero(Q.rows(), Q.cols());
                Matrix dk = Matrix::Zero(K.rows(), K.cols());
                Matrix dv = Matrix::Zero(V.rows(), V.cols());
                std::vector<double> dalpha;
                for (Eigen::Index i = 0; i < mask.rows; ++i) {
                  const std::size_t b = mask.offsets[i];
                  const std::size_t e = mask.offsets[i + 1];
                  dalpha.assign(e - b, 0.0);
                  for (int h = 0; h < heads; ++h) {
                    const Eigen::Index c0 = h * dh;
                    double weighted = 0;
                    for (std::size_t t = b; t < e; ++t) {
                      const int j = mask.indices[t];
                      const double a = alpha[t * heads + h];
                      dalpha[t - b] = G.row(i).segment(c0, dh).dot(V.row(j).segment(c0, dh));
                      weighted += a * dalpha[t - b];
                      dv.row(j).segment(c0, dh) += a * G.row(i).segment(c0, dh);
                    }
                    for (std::size_t t = b; t < e; ++t) {
                      const int j = mask.indices[t];
                      const double ds = alpha[t * heads + h] * (dalpha[t - b] - weighted) * inv_sqrt;
                      dq.row(i).segment(c0, dh) += ds * K.row(j).segment(c0, dh);
                      dk.row(j).segment(c0, dh) += ds * Q.row(i).segment(c0, dh);
                    }
                  }
                }
                if (pq.requires_grad) pq.accumulate(dq);
                if (pk.requires_grad) pk.accumulate(dk);
                if (pv.requires_grad) pv.accumulate(dv);
              });
}

Var bernoulli_kl(const Var& q, const Var& p) {
  check_same_shape(q, p, "bernoulli_kl");
  auto clamp = [](double x) { return std::clamp(x, kProbEps, 1.0 - kProbEps); };
  const Matrix& Q = q.value();
  const Matrix& P = p.value();
  Matrix out(Q.rows(), Q.cols());
  for (Eigen::Index i = 0; i < Q.size(); ++i) {
    const double qi = Q.data()[i];
    const double pi = clamp(P.data()[i]);
    double kl = 0;
    if (qi > 0) kl += qi * (std::log(qi) - std::log(pi));
    if (qi < 1) kl += (1 - qi) * (std::log(1 - qi) - std::log(1 - pi));
    out.data()[i] = kl;
  }
  return make(std::move(out), {q.node(), p.node()}, [clamp](Node& self) {
    auto& pq = *self.parents[0];
    auto& pp = *self.parents[1];
    const Matrix& Q = pq.value;
    const Matrix& P = pp.value;
    if (pp.requires_grad) {
      Matrix g(P.rows(), P.cols());
      for (Eigen::Index i = 0; i < P.size(); ++i) {
        const double qi = Q.data()[i];
        const double pi = clamp(P.data()[i]);
        g.data()[i] = self.grad.data()[i] * (-qi / pi + (1 - qi) / (1 - pi));
      }
      pp.accumulate(g);
    }
    if (pq.requires_grad) {
      Matrix g(Q.rows(), Q.cols());
      for (Eigen::Index i = 0; i < Q.size(); ++i) {
        const double qi = clamp(Q.data()[i]);
        const double pi = clamp(P.data()[i]);
        g.data()[i] = self.grad.data()[i] *
                      (std::log(qi) - std::log(pi) - std::log(1 - qi) + std::log(1 - pi));
      }
      pq.accumulate(g);
    }
  });
}

Var dropout(const Var& a, double rate, Rng& rng) {
  if (rate <= 0) return a;
  Matrix mask(a.rows(), a.cols());
  const double keep = 1.0 - rate;
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return hadamard(a, Var::constant(std::move(mask)));
}

}  // namespace gsaug::ag
