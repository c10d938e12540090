#ifndef VMF_TENSOR_HPP
#define VMF_TENSOR_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vmf {

/// Row-major dense matrix used by every learned component.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// Shaped, row-major buffer of doubles.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);
  explicit Tensor(const Matrix& m);

  static Tensor zeros(std::vector<std::size_t> shape);

  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  std::size_t size() const { return values_.size(); }

  /// Rank <= 2 view; a vector is viewed as one row.
  MatrixMap matrix();
  ConstMatrixMap matrix() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

std::string shapeString(const std::vector<std::size_t>& shape);
std::string shapeString(const Matrix& m);

using Gradients = std::map<std::string, Matrix>;

/// Named learnable weights plus optimizer state and fixed statistics.
///
/// Names starting with a reserved prefix ("adam." for moment buffers,
/// "stats." for frozen data statistics) are not trainable. Iteration is in
/// sorted-name order.
class ParameterStore {
 public:
  static constexpr std::string_view kAdamPrefix = "adam.";
  static constexpr std::string_view kStatsPrefix = "stats.";

  void set(const std::string& name, Tensor value);
  void set(const std::string& name, const Matrix& value) { set(name, Tensor(value)); }

  bool contains(const std::string& name) const { return slots_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  std::vector<std::string> names() const;
  std::vector<std::string> trainableNames() const;
  static bool isTrainableName(std::string_view name);

  std::size_t trainableSize() const;

  long version() const { return version_; }
  void setVersion(long v) { version_ = v; }

  const std::map<std::string, Tensor>& slots() const { return slots_; }

  bool operator==(const ParameterStore&) const = default;

 private:
  std::map<std::string, Tensor> slots_;
  long version_ = 0;
};

struct AdamWOptions {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

/// One decoupled-weight-decay Adam update, in place. `step` is the 1-based
/// optimizer step used for bias correction. Moment buffers live in the store
/// under "adam.m/<name>" and "adam.v/<name>"; the store version is set to
/// `step`.
void adamwStep(ParameterStore& params, const Gradients& grads, const AdamWOptions& opts,
               long step);

}  // namespace vmf

#endif  // VMF_TENSOR_HPP
