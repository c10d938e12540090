#include "vmf/tensor.hpp"

#include "vmf/errors.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace vmf {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string adamKey(char which, const std::string& name) {
  return std::string(ParameterStore::kAdamPrefix) + which + "/" + name;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (product(shape_) != values_.size())
    throw ShapeError("tensor shape " + shapeString(shape_) + " does not hold " +
                     std::to_string(values_.size()) + " values");
}

Tensor::Tensor(const Matrix& m)
    : shape_{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
      values_(m.data(), m.data() + m.size()) {}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

MatrixMap Tensor::matrix() {
  if (shape_.size() > 2) throw ShapeError("matrix view of rank-3+ tensor " + shapeString(shape_));
  const Eigen::Index rows = shape_.size() == 2 ? shape_[0] : 1;
  const Eigen::Index cols = shape_.empty() ? 1 : shape_.back();
  return MatrixMap(values_.data(), rows, cols);
}

ConstMatrixMap Tensor::matrix() const {
  if (shape_.size() > 2) throw ShapeError("matrix view of rank-3+ tensor " + shapeString(shape_));
  const Eigen::Index rows = shape_.size() == 2 ? shape_[0] : 1;
  const Eigen::Index cols = shape_.empty() ? 1 : shape_.back();
  return ConstMatrixMap(values_.data(), rows, cols);
}

std::string shapeString(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::string shapeString(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

void ParameterStore::set(const std::string& name, Tensor value) {
  slots_.insert_or_assign(name, std::move(value));
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [k, _] : slots_) out.push_back(k);
  return out;
}

bool ParameterStore::isTrainableName(std::string_view name) {
  return !name.starts_with(kAdamPrefix) && !name.starts_with(kStatsPrefix);
}

std::vector<std::string> ParameterStore::trainableNames() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : slots_)
    if (isTrainableName(k)) out.push_back(k);
  return out;
}

std::size_t ParameterStore::trainableSize() const {
  std::size_t n = 0;
  for (const auto& [k, t] : slots_)
    if (isTrainableName(k)) n += t.size();
  return n;
}

void adamwStep(ParameterStore& params, const Gradients& grads, const AdamWOptions& opts,
               long step) {
  if (step < 1) throw std::invalid_argument("adamwStep: step must be >= 1");
  const auto names = params.trainableNames();

  std::vector<std::string> missing;
  for (const auto& n : names)
    if (!grads.count(n)) missing.push_back("gradient for '" + n + "'");
  for (const auto& [n, _] : grads)
    if (!params.contains(n) || !ParameterStore::isTrainableName(n))
      missing.push_back("parameter for '" + n + "'");
  if (!missing.empty()) {
    std::string msg = "adamwStep: key mismatch, missing:";
    for (const auto& m : missing) msg += " " + m + ";";
    throw std::invalid_argument(msg);
  }

  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));

  for (const auto& name : names) {
    auto p = params.get(name).matrix();
    const Matrix& g = grads.at(name);
    if (g.rows() != p.rows() || g.cols() != p.cols())
      throw ShapeError("adamwStep: gradient " + shapeString(g) + " for '" + name +
                       "' does not match parameter " + shapeString(Matrix(p)));
    const std::string mk = adamKey('m', name), vk = adamKey('v', name);
    if (!params.contains(mk)) params.set(mk, Tensor::zeros(params.get(name).shape()));
    if (!params.contains(vk)) params.set(vk, Tensor::zeros(params.get(name).shape()));
    auto m = params.get(mk).matrix();
    auto v = params.get(vk).matrix();
    auto pm = params.get(name).matrix();

    m = opts.beta1 * m + (1.0 - opts.beta1) * g;
    v = opts.beta2 * v + (1.0 - opts.beta2) * g.cwiseProduct(g);
    pm *= (1.0 - opts.lr * opts.weight_decay);
    pm.array() -= opts.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + opts.eps);
  }
  params.setVersion(step);
}

}  // namespace vmf
