#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gsaug/autograd.hpp"

namespace gsaug {
class Rng;
}

namespace gsaug::nn {

/// Ordered, named set of trainable leaves. Order is registration order and
/// defines the serialized layout.
class ParameterStore {
 public:
  ag::Var add(std::string name, ag::Matrix init);
  ag::Var glorot(std::string name, Eigen::Index rows, Eigen::Index cols, Rng& rng);
  ag::Var zeros(std::string name, Eigen::Index rows, Eigen::Index cols);
  ag::Var normal(std::string name, Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

  const std::vector<std::pair<std::string, ag::Var>>& entries() const { return params_; }
  std::size_t num_values() const;
  void zero_grad();

  /// Flattened values in registration order.
  std::vector<double> flatten() const;
  /// Inverse of flatten; throws DataError on a size mismatch.
  void load(const std::vector<double>& values);
  std::string hash() const;
  bool all_finite() const;

 private:
  std::vector<std::pair<std::string, ag::Var>> params_;
};

struct Linear {
  ag::Var weight;  // in x out
  ag::Var bias;    // 1 x out

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);
  ag::Var operator()(const ag::Var& x) const { return ag::add_row(ag::matmul(x, weight), bias); }
};

/// Linear -> ReLU -> Linear.
struct Mlp2 {
  Linear first;
  Linear second;

  Mlp2() = default;
  Mlp2(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden,
       Eigen::Index out, Rng& rng);
  ag::Var operator()(const ag::Var& x) const { return second(ag::relu(first(x))); }
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class Adam {
 public:
  Adam(const ParameterStore& store, AdamOptions options);
  void step();
  long steps() const { return step_; }

 private:
  std::vector<ag::Var> params_;
  std::vector<ag::Matrix> m_;
  std::vector<ag::Matrix> v_;
  AdamOptions opt_;
  long step_ = 0;
};

/// Symmetric pair encoding [h_u + h_v, |h_u - h_v|] for each pair.
ag::Var pair_features(const ag::Var& h, std::span<const int> us, std::span<const int> vs);

}  // namespace gsaug::nn
