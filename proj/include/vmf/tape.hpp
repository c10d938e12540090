// Reverse-mode differentiation over a recorded tape of matrix ops.
//
// Each op evaluates eagerly, stores its value on the tape and registers a
// closure that pushes the output gradient back to its inputs. Only nodes that
// depend on a parameter take part in the backward pass.

#ifndef VMF_TAPE_HPP
#define VMF_TAPE_HPP

#include "vmf/tensor.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace vmf {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

class Tape {
 public:
  using Backprop = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);

  /// Leaf bound to a named slot of `store`. Repeated requests for the same
  /// name return the same node.
  Var parameter(const ParameterStore& store, const std::string& name);

  const Matrix& value(int id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradients of a 1x1 `loss` with respect to every parameter leaf on the
  /// tape. Throws std::invalid_argument for a non-scalar loss.
  Gradients backward(Var loss);

  /// Same, but every trainable slot of `store` gets an entry; parameters the
  /// loss does not reach receive zeros.
  Gradients backward(Var loss, const ParameterStore& store);

  // Op-implementation interface.
  Var push(const char* op, Matrix value, std::vector<int> inputs, Backprop backprop);
  bool needsGrad(int id) const { return nodes_[id].needs_grad; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  /// Adds `g` to the gradient buffer of node `id` (allocated on first use).
  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    std::string param;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::map<std::string, int> param_ids_;
};

// ---------------------------------------------------------------------------
// Differentiable ops. Shape mismatches throw ShapeError naming both shapes;
// non-finite results throw NumericError.

Var matmul(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(double s, Var a);
/// Adds a 1 x cols row to every row of `a`.
Var addRow(Var a, Var row);
/// Multiplies every row of `a` elementwise by a 1 x cols row.
Var mulRow(Var a, Var row);
/// Adds a block of `block.rows()` rows to each consecutive group of rows of
/// `a` (e.g. a per-position embedding over a batch of sequences).
Var addTiled(Var a, Var block);
/// Elementwise product.
Var hadamard(Var a, Var b);
Var concatCols(const std::vector<Var>& parts);
Var sliceCols(Var a, Eigen::Index start, Eigen::Index width);
/// Row-major reshape.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
/// x * sigmoid(1.702 x)
Var smoothNonlinearity(Var a);
Var softmaxRows(Var a);
/// Per-row standardization with variance floor `eps` (no affine part).
Var layerNormRows(Var a, double eps = 1e-5);
/// Scaled dot-product attention with `heads` heads. Rows of `q` come in
/// groups of `q_group`; group g attends only to rows
/// [g * k_group, (g + 1) * k_group) of `k` and `v`.
Var attention(Var q, Var k, Var v, int heads, Eigen::Index q_group, Eigen::Index k_group);
/// Mean over all entries of (a - b)^2, as a 1x1 node.
Var meanSquaredError(Var a, Var b);
Var sum(Var a);

// ---------------------------------------------------------------------------
// Forward-only helpers.

/// [sin(t w_0), cos(t w_0), sin(t w_1), cos(t w_1), ...] with
/// w_i = 10000^(-2i/dim). `dim` must be even.
Eigen::RowVectorXd sinusoidalEmbedding(double t, int dim);

double smoothNonlinearity(double x);
Matrix softmaxRows(const Matrix& a);
Matrix layerNormRows(const Matrix& a, double eps = 1e-5);

// ---------------------------------------------------------------------------
// Finite-difference gradient check.

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]" of the worst coordinate
  std::size_t checked = 0;
};

using LossBuilder = std::function<Var(Tape&, const ParameterStore&)>;

/// Compares backward() against central differences with step `h` on
/// `coords` trainable coordinates drawn uniformly with `seed`. The relative
/// error is |a - n| / max(|a|, |n|, abs_floor); the floor keeps coordinates
/// whose gradient is rounding noise from dominating.
GradCheckResult checkGradients(const ParameterStore& store, const LossBuilder& loss,
                               std::size_t coords, std::uint64_t seed, double h = 1e-5,
                               double abs_floor = 1e-6);

}  // namespace vmf

#endif  // VMF_TAPE_HPP
