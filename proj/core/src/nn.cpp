#include "gsaug/nn.hpp"

#include <cmath>
#include <string_view>

#include "gsaug/error.hpp"
#include "gsaug/io.hpp"
#include "gsaug/rng.hpp"

namespace gsaug::nn {

ag::Var ParameterStore::add(std::string name, ag::Matrix init) {
  ag::Var v(std::move(init), true);
  params_.emplace_back(std::move(name), v);
  return v;
}

ag::Var ParameterStore::glorot(std::string name, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  ag::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform() - 1.0) * limit;
  return add(std::move(name), std::move(m));
}

ag::Var ParameterStore::zeros(std::string name, Eigen::Index rows, Eigen::Index cols) {
  return add(std::move(name), ag::Matrix::Zero(rows, cols));
}

ag::Var ParameterStore::normal(std::string name, Eigen::Index rows, Eigen::Index cols, double stddev,
                               Rng& rng) {
  ag::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return add(std::move(name), std::move(m));
}

std::size_t ParameterStore::num_values() const {
  std::size_t n = 0;
  for (const auto& [name, v] : params_) n += static_cast<std::size_t>(v.value().size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, v] : params_) v.zero_grad();
}

std::vector<double> ParameterStore::flatten() const {
  std::vector<double> out;
  out.reserve(num_values());
  for (const auto& [name, v] : params_) {
    out.insert(out.end(), v.value().data(), v.value().data() + v.value().size());
  }
  return out;
}

void ParameterStore::load(const std::vector<double>& values) {
  if (values.size() != num_values()) {
    throw DataError("parameter blob has " + std::to_string(values.size()) + " values, model expects " +
                    std::to_string(num_values()));
  }
  std::size_t at = 0;
  for (auto& [name, v] : params_) {
    auto& m = v.mutable_value();
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(at),
              values.begin() + static_cast<std::ptrdiff_t>(at + m.size()), m.data());
    at += static_cast<std::size_t>(m.size());
  }
}

std::string ParameterStore::hash() const {
  const auto flat = flatten();
  return bytes_hash(std::string_view(reinterpret_cast<const char*>(flat.data()), flat.size() * sizeof(double)));
}

bool ParameterStore::all_finite() const {
  for (const auto& [name, v] : params_) {
    if (!v.value().allFinite()) return false;
  }
  return true;
}

Linear::Linear(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng)
    : weight(store.glorot(name + ".weight", in, out, rng)), bias(store.zeros(name + ".bias", 1, out)) {}

Mlp2::Mlp2(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden,
           Eigen::Index out, Rng& rng)
    : first(store, name + ".0", in, hidden, rng), second(store, name + ".1", hidden, out, rng) {}

Adam::Adam(const ParameterStore& store, AdamOptions options) : opt_(options) {
  for (const auto& [name, v] : store.entries()) {
    params_.push_back(v);
    m_.push_back(ag::Matrix::Zero(v.rows(), v.cols()));
    v_.push_back(ag::Matrix::Zero(v.rows(), v.cols()));
  }
}

void Adam::step() {
  ++step_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ag::Matrix g = params_[i].grad();
    auto& w = params_[i].mutable_value();
    if (opt_.weight_decay > 0) g += opt_.weight_decay * w;
    m_[i] = opt_.beta1 * m_[i] + (1 - opt_.beta1) * g;
    v_[i] = opt_.beta2 * v_[i] + (1 - opt_.beta2) * g.cwiseAbs2();
    w.array() -= opt_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + opt_.eps);
  }
}

ag::Var pair_features(const ag::Var& h, std::span<const int> us, std::span<const int> vs) {
  auto hu = ag::gather_rows(h, us);
  auto hv = ag::gather_rows(h, vs);
  return ag::concat_cols(hu + hv, ag::abs(hu - hv));
}

}  // namespace gsaug::nn
