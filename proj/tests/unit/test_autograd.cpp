#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "gsaug/autograd.hpp"
#include "gsaug/nn.hpp"
#include "gsaug/rng.hpp"

namespace gsaug {
namespace {

using ag::Matrix;
using ag::Var;
using Fn = std::function<Var(const std::vector<Var>&)>;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1, double hi = 1) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * rng.uniform();
  return m;
}

// Max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
double gradient_error(const Fn& f, std::vector<Matrix> inputs, double step = 1e-6) {
  std::vector<Var> leaves;
  for (auto& m : inputs) leaves.emplace_back(m, true);
  ag::backward(f(leaves));
  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix analytic = leaves[k].grad();
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Var> probe;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          Matrix m = inputs[j];
          if (j == k) m.data()[i] += delta;
          probe.push_back(Var::constant(m));
        }
        return f(probe).item();
      };
      const double numeric = (eval(step) - eval(-step)) / (2 * step);
      const double a = analytic.data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)}));
    }
  }
  return worst;
}

ag::Csr ring_csr(int n, bool weighted) {
  ag::Csr c;
  c.rows = c.cols = n;
  c.offsets.push_back(0);
  for (int i = 0; i < n; ++i) {
    for (int j : {(i + n - 1) % n, i, (i + 1) % n}) {
      c.indices.push_back(j);
      if (weighted) c.weights.push_back(0.5 + 0.1 * j);
    }
    c.offsets.push_back(c.indices.size());
  }
  return c;
}

struct Case {
  const char* name;
  Fn f;
  std::vector<std::pair<int, int>> shapes;
  double lo = -1, hi = 1;
};

TEST(Autograd, OpsMatchFiniteDifferences) {
  const std::vector<int> seg{0, 1, 0, 2, -1};
  const std::vector<int> idx{3, 0, 0, 4};
  const auto csr = ring_csr(5, true);
  const auto mask = ring_csr(5, false);
  const std::vector<Case> cases = {
      {"matmul", [](auto& v) { return ag::sum(ag::matmul(v[0], v[1])); }, {{3, 4}, {4, 2}}},
      {"add_sub", [](auto& v) { return ag::sum(ag::square(v[0] - v[1] + v[0])); }, {{3, 3}, {3, 3}}},
      {"hadamard", [](auto& v) { return ag::sum(ag::hadamard(v[0], v[1])); }, {{2, 5}, {2, 5}}},
      {"scale_add", [](auto& v) { return ag::mean(ag::add_scalar(ag::scale(ag::square(v[0]), 3.0), 1.0)); }, {{4, 2}}},
      {"add_row", [](auto& v) { return ag::sum(ag::square(ag::add_row(v[0], v[1]))); }, {{4, 3}, {1, 3}}},
      {"scale_rows", [](auto& v) { return ag::sum(ag::square(ag::scale_rows(v[0], v[1]))); }, {{4, 3}, {4, 1}}},
      {"relu", [](auto& v) { return ag::sum(ag::square(ag::relu(v[0]))); }, {{5, 5}}},
      {"sigmoid", [](auto& v) { return ag::sum(ag::sigmoid(v[0])); }, {{3, 3}}},
      {"abs", [](auto& v) { return ag::sum(ag::abs(v[0])); }, {{3, 3}}},
      {"log_softmax", [](auto& v) { return ag::sum(ag::hadamard(ag::log_softmax_rows(v[0]), v[1])); }, {{3, 4}, {3, 4}}},
      {"concat", [](auto& v) { return ag::sum(ag::square(ag::concat_cols(v[0], v[1]))); }, {{3, 2}, {3, 1}}},
      {"gather", [idx](auto& v) { return ag::sum(ag::square(ag::gather_rows(v[0], idx))); }, {{5, 2}}},
      {"segment_mean", [seg](auto& v) { return ag::sum(ag::square(ag::segment_mean(v[0], seg, 3))); }, {{5, 2}}},
      {"segment_sum", [seg](auto& v) { return ag::sum(ag::square(ag::segment_sum(v[0], seg, 3))); }, {{5, 2}}},
      {"spmm", [csr](auto& v) { return ag::sum(ag::square(ag::spmm(csr, v[0]))); }, {{5, 3}}},
      {"layer_norm", [](auto& v) { return ag::sum(ag::hadamard(ag::layer_norm(v[0], v[1], v[2]), v[3])); },
       {{4, 6}, {1, 6}, {1, 6}, {4, 6}}},
      {"attention", [mask](auto& v) { return ag::sum(ag::hadamard(ag::masked_attention(v[0], v[1], v[2], mask, 2), v[3])); },
       {{5, 4}, {5, 4}, {5, 4}, {5, 4}}},
      {"bernoulli_kl", [](auto& v) { return ag::sum(ag::bernoulli_kl(v[0], v[1])); }, {{3, 3}, {3, 3}}, 0.05, 0.95},
      {"dropout", [](auto& v) {
         Rng r(7);
         return ag::sum(ag::square(ag::dropout(v[0], 0.3, r)));
       }, {{4, 4}}},
  };
  Rng rng(1);
  for (const auto& c : cases) {
    std::vector<Matrix> inputs;
    for (auto [r, k] : c.shapes) inputs.push_back(random_matrix(r, k, rng, c.lo, c.hi));
    EXPECT_LT(gradient_error(c.f, inputs), 1e-6) << c.name;
  }
}

TEST(Autograd, NoGradGuardRecordsNothing) {
  Var x(Matrix::Ones(2, 2), true);
  {
    ag::NoGradGuard guard;
    EXPECT_FALSE(ag::grad_enabled());
    EXPECT_FALSE(ag::sum(x).requires_grad());
  }
  EXPECT_TRUE(ag::grad_enabled());
  EXPECT_TRUE(ag::sum(x).requires_grad());
}

TEST(Autograd, GradientsAccumulateAcrossUses) {
  Var x(Matrix::Constant(1, 1, 3.0), true);
  ag::backward(ag::sum(x + x + ag::square(x)));
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 2.0 + 6.0);
}

TEST(Autograd, BernoulliKlEndpoints) {
  const auto q = Var::constant(Matrix::Constant(1, 1, 1.0));
  const auto p = Var::constant(Matrix::Constant(1, 1, 0.25));
  EXPECT_DOUBLE_EQ(ag::bernoulli_kl(q, p).item(), -std::log(0.25));
  EXPECT_DOUBLE_EQ(ag::bernoulli_kl(p, p).item(), 0.0);
}

TEST(Autograd, LogSoftmaxRowsNormalized) {
  Rng rng(2);
  const auto x = Var::constant(random_matrix(4, 5, rng, -30, 30));
  const Matrix p = ag::log_softmax_rows(x).value().array().exp();
  for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
}

TEST(Adam, MinimizesQuadratic) {
  nn::ParameterStore store;
  Var w = store.add("w", Matrix::Constant(1, 3, 5.0));
  nn::Adam adam(store, {0.1});
  const Var target = Var::constant((Matrix(1, 3) << 1, -2, 0.5).finished());
  for (int i = 0; i < 500; ++i) {
    ag::backward(ag::sum(ag::square(w - target)));
    adam.step();
    store.zero_grad();
  }
  EXPECT_LT((w.value() - target.value()).cwiseAbs().maxCoeff(), 1e-2);
  EXPECT_EQ(adam.steps(), 500);
}

TEST(ParameterStore, FlattenLoadHash) {
  Rng rng(3);
  nn::ParameterStore a;
  a.glorot("x", 3, 4, rng);
  a.zeros("b", 1, 4);
  const auto flat = a.flatten();
  EXPECT_EQ(flat.size(), a.num_values());
  nn::ParameterStore b;
  b.zeros("x", 3, 4);
  b.zeros("b", 1, 4);
  EXPECT_NE(a.hash(), b.hash());
  b.load(flat);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_THROW(b.load(std::vector<double>(3, 0.0)), std::exception);
}

TEST(PairFeatures, SymmetricEncoding) {
  Rng rng(4);
  const auto h = Var::constant(random_matrix(4, 3, rng));
  const std::vector<int> u{0, 2}, v{1, 3};
  const auto a = nn::pair_features(h, u, v).value();
  const auto b = nn::pair_features(h, v, u).value();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.cols(), 6);
  EXPECT_DOUBLE_EQ(a(0, 0), h.value()(0, 0) + h.value()(1, 0));
  EXPECT_DOUBLE_EQ(a(0, 3), std::abs(h.value()(0, 0) - h.value()(1, 0)));
}

}  // namespace
}  // namespace gsaug
