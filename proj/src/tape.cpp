#include "vmf/tape.hpp"

#include "vmf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>

namespace vmf {

namespace {

void requireSameTape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw std::invalid_argument("operands belong to different tapes");
}

[[noreturn]] void shapeMismatch(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shapeString(a) + " vs " +
                   shapeString(b));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kGeluScale = 1.702;

}  // namespace

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix value) { return push("constant", std::move(value), {}, nullptr); }

Var Tape::parameter(const ParameterStore& store, const std::string& name) {
  if (auto it = param_ids_.find(name); it != param_ids_.end()) return {this, it->second};
  Var v = push("parameter", Matrix(store.get(name).matrix()), {}, nullptr);
  nodes_[v.id].param = name;
  nodes_[v.id].needs_grad = true;
  param_ids_[name] = v.id;
  return v;
}

Var Tape::push(const char* op, Matrix value, std::vector<int> inputs, Backprop backprop) {
  if (!value.allFinite())
    throw NumericError(std::string(op) + ": non-finite output " + shapeString(value));
  Node n;
  n.value = std::move(value);
  for (int i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
  if (n.needs_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Gradients Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss is on another tape");
  const Matrix& l = nodes_[loss.id].value;
  if (l.rows() != 1 || l.cols() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + shapeString(l));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (nodes_[loss.id].needs_grad) nodes_[loss.id].grad = Matrix::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0 || !n.backprop) continue;
    n.backprop(*this, i);
  }
  Gradients out;
  for (const auto& [name, id] : param_ids_) {
    const Node& n = nodes_[id];
    out[name] = n.grad.size() ? n.grad : Matrix::Zero(n.value.rows(), n.value.cols());
  }
  return out;
}

Gradients Tape::backward(Var loss, const ParameterStore& store) {
  Gradients out = backward(loss);
  for (const auto& name : store.trainableNames()) {
    if (!out.count(name)) {
      const auto m = store.get(name).matrix();
      out[name] = Matrix::Zero(m.rows(), m.cols());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  requireSameTape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) shapeMismatch("matmul", av, bv);
  return a.tape->push("matmul", av * bv, {a.id, b.id}, [ai = a.id, bi = b.id](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.needsGrad(ai)) t.accumulate(ai, g * t.value(bi).transpose());
    if (t.needsGrad(bi)) t.accumulate(bi, t.value(ai).transpose() * g);
  });
}

Var operator+(Var a, Var b) {
  requireSameTape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shapeMismatch("add", a.value(), b.value());
  return a.tape->push("add", a.value() + b.value(), {a.id, b.id},
                      [ai = a.id, bi = b.id](Tape& t, int self) {
                        t.accumulate(ai, t.grad(self));
                        t.accumulate(bi, t.grad(self));
                      });
}

Var operator-(Var a, Var b) {
  requireSameTape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shapeMismatch("sub", a.value(), b.value());
  return a.tape->push("sub", a.value() - b.value(), {a.id, b.id},
                      [ai = a.id, bi = b.id](Tape& t, int self) {
                        t.accumulate(ai, t.grad(self));
                        t.accumulate(bi, -t.grad(self));
                      });
}

Var operator*(double s, Var a) {
  return a.tape->push("scale", s * a.value(), {a.id}, [ai = a.id, s](Tape& t, int self) {
    t.accumulate(ai, s * t.grad(self));
  });
}

Var addRow(Var a, Var row) {
  requireSameTape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) shapeMismatch("addRow", a.value(), row.value());
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape->push("addRow", std::move(out), {a.id, row.id},
                      [ai = a.id, ri = row.id](Tape& t, int self) {
                        t.accumulate(ai, t.grad(self));
                        if (t.needsGrad(ri)) t.accumulate(ri, t.grad(self).colwise().sum());
                      });
}

Var mulRow(Var a, Var row) {
  requireSameTape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) shapeMismatch("mulRow", a.value(), row.value());
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return a.tape->push("mulRow", std::move(out), {a.id, row.id},
                      [ai = a.id, ri = row.id](Tape& t, int self) {
                        const Matrix& g = t.grad(self);
                        if (t.needsGrad(ai))
                          t.accumulate(ai, Matrix(g.array().rowwise() *
                                                  t.value(ri).row(0).array()));
                        if (t.needsGrad(ri))
                          t.accumulate(ri, g.cwiseProduct(t.value(ai)).colwise().sum());
                      });
}

Var addTiled(Var a, Var block) {
  requireSameTape(a, block);
  const Eigen::Index br = block.rows();
  if (block.cols() != a.cols() || br == 0 || a.rows() % br != 0)
    shapeMismatch("addTiled", a.value(), block.value());
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); r += br) out.middleRows(r, br) += block.value();
  return a.tape->push("addTiled", std::move(out), {a.id, block.id},
                      [ai = a.id, bi = block.id, br](Tape& t, int self) {
                        const Matrix& g = t.grad(self);
                        t.accumulate(ai, g);
                        if (t.needsGrad(bi)) {
                          Matrix acc = Matrix::Zero(br, g.cols());
                          for (Eigen::Index r = 0; r < g.rows(); r += br) acc += g.middleRows(r, br);
                          t.accumulate(bi, acc);
                        }
                      });
}

Var hadamard(Var a, Var b) {
  requireSameTape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    shapeMismatch("hadamard", a.value(), b.value());
  return a.tape->push("hadamard", a.value().cwiseProduct(b.value()), {a.id, b.id},
                      [ai = a.id, bi = b.id](Tape& t, int self) {
                        const Matrix& g = t.grad(self);
                        if (t.needsGrad(ai)) t.accumulate(ai, g.cwiseProduct(t.value(bi)));
                        if (t.needsGrad(bi)) t.accumulate(bi, g.cwiseProduct(t.value(ai)));
                      });
}

Var concatCols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concatCols: no operands");
  Eigen::Index cols = 0;
  std::vector<int> ids;
  for (const Var& p : parts) {
    requireSameTape(parts.front(), p);
    if (p.rows() != parts.front().rows())
      shapeMismatch("concatCols", parts.front().value(), p.value());
    cols += p.cols();
    ids.push_back(p.id);
  }
  Matrix out(parts.front().rows(), cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  return parts.front().tape->push("concatCols", std::move(out), ids,
                                  [ids, offsets](Tape& t, int self) {
                                    const Matrix& g = t.grad(self);
                                    for (std::size_t i = 0; i < ids.size(); ++i)
                                      if (t.needsGrad(ids[i]))
                                        t.accumulate(ids[i], g.middleCols(offsets[i],
                                                                          t.value(ids[i]).cols()));
                                  });
}

Var sliceCols(Var a, Eigen::Index start, Eigen::Index width) {
  if (start < 0 || width < 0 || start + width > a.cols())
    throw ShapeError("sliceCols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + width) + ") out of range for " +
                     shapeString(a.value()));
  return a.tape->push("sliceCols", a.value().middleCols(start, width), {a.id},
                      [ai = a.id, start, width](Tape& t, int self) {
                        Matrix g = Matrix::Zero(t.value(ai).rows(), t.value(ai).cols());
                        g.middleCols(start, width) = t.grad(self);
                        t.accumulate(ai, g);
                      });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size())
    throw ShapeError("reshape: " + shapeString(a.value()) + " to [" + std::to_string(rows) +
                     "x" + std::to_string(cols) + "]");
  Matrix out = ConstMatrixMap(a.value().data(), rows, cols);
  return a.tape->push("reshape", std::move(out), {a.id}, [ai = a.id](Tape& t, int self) {
    const Matrix& src = t.value(ai);
    t.accumulate(ai, ConstMatrixMap(t.grad(self).data(), src.rows(), src.cols()));
  });
}

double smoothNonlinearity(double x) { return x * sigmoid(kGeluScale * x); }

Var smoothNonlinearity(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return smoothNonlinearity(x); });
  return a.tape->push("smoothNonlinearity", std::move(out), {a.id},
                      [ai = a.id](Tape& t, int self) {
                        Matrix d = t.value(ai).unaryExpr([](double x) {
                          const double s = sigmoid(kGeluScale * x);
                          return s + kGeluScale * x * s * (1.0 - s);
                        });
                        t.accumulate(ai, t.grad(self).cwiseProduct(d));
                      });
}

Matrix softmaxRows(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double mx = a.row(r).maxCoeff();
    out.row(r) = (a.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Var softmaxRows(Var a) {
  return a.tape->push("softmaxRows", softmaxRows(a.value()), {a.id},
                      [ai = a.id](Tape& t, int self) {
                        const Matrix& y = t.value(self);
                        const Matrix& g = t.grad(self);
                        Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
                        t.accumulate(ai, Matrix(y.array() * (g.colwise() - dot).array()));
                      });
}

Matrix layerNormRows(const Matrix& a, double eps) {
  Matrix out(a.rows(), a.cols());
  const double n = static_cast<double>(a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double mean = a.row(r).mean();
    const double var = (a.row(r).array() - mean).square().sum() / n;
    out.row(r) = (a.row(r).array() - mean) / std::sqrt(var + eps);
  }
  return out;
}

Var layerNormRows(Var a, double eps) {
  const Matrix& x = a.value();
  const double n = static_cast<double>(x.cols());
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().sum() / n;
    inv_std(r) = 1.0 / std::sqrt(var + eps);
  }
  return a.tape->push("layerNormRows", layerNormRows(x, eps), {a.id},
                      [ai = a.id, inv_std](Tape& t, int self) {
                        const Matrix& y = t.value(self);
                        const Matrix& g = t.grad(self);
                        Eigen::VectorXd gm = g.rowwise().mean();
                        Eigen::VectorXd gym = g.cwiseProduct(y).rowwise().mean();
                        Matrix dx = (g.colwise() - gm) - (y.array().colwise() * gym.array()).matrix();
                        dx = inv_std.asDiagonal() * dx;
                        t.accumulate(ai, dx);
                      });
}

Var attention(Var q, Var k, Var v, int heads, Eigen::Index q_group, Eigen::Index k_group) {
  requireSameTape(q, k);
  requireSameTape(q, v);
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  const Eigen::Index d = Q.cols();
  if (K.cols() != d || V.cols() != d) shapeMismatch("attention", Q, K.cols() != d ? K : V);
  if (K.rows() != V.rows()) shapeMismatch("attention", K, V);
  if (heads < 1 || d % heads != 0)
    throw ShapeError("attention: width " + std::to_string(d) + " not divisible by " +
                     std::to_string(heads) + " heads");
  if (q_group < 1 || k_group < 1 || Q.rows() % q_group != 0 ||
      K.rows() != (Q.rows() / q_group) * k_group)
    throw ShapeError("attention: query " + shapeString(Q) + " in groups of " +
                     std::to_string(q_group) + " vs keys " + shapeString(K) + " in groups of " +
                     std::to_string(k_group));

  const Eigen::Index groups = Q.rows() / q_group;
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(groups * heads);
  Matrix out(Q.rows(), d);
  for (Eigen::Index g = 0; g < groups; ++g) {
    for (int h = 0; h < heads; ++h) {
      auto qb = Q.block(g * q_group, h * dh, q_group, dh);
      auto kb = K.block(g * k_group, h * dh, k_group, dh);
      auto vb = V.block(g * k_group, h * dh, k_group, dh);
      Matrix p = softmaxRows(Matrix(scale * qb * kb.transpose()));
      out.block(g * q_group, h * dh, q_group, dh) = p * vb;
      probs->push_back(std::move(p));
    }
  }
  return q.tape->push(
      "attention", std::move(out), {q.id, k.id, v.id},
      [qi = q.id, ki = k.id, vi = v.id, probs, groups, heads, dh, q_group, k_group, scale](
          Tape& t, int self) {
        const Matrix& G = t.grad(self);
        const Matrix& Q = t.value(qi);
        const Matrix& K = t.value(ki);
        const Matrix& V = t.value(vi);
        Matrix dQ = Matrix::Zero(Q.rows(), Q.cols());
        Matrix dK = Matrix::Zero(K.rows(), K.cols());
        Matrix dV = Matrix::Zero(V.rows(), V.cols());
        for (Eigen::Index g = 0; g < groups; ++g) {
          for (int h = 0; h < heads; ++h) {
            const Matrix& p = (*probs)[g * heads + h];
            auto gb = G.block(g * q_group, h * dh, q_group, dh);
            auto qb = Q.block(g * q_group, h * dh, q_group, dh);
            auto kb = K.block(g * k_group, h * dh, k_group, dh);
            auto vb = V.block(g * k_group, h * dh, k_group, dh);
            dV.block(g * k_group, h * dh, k_group, dh) += p.transpose() * gb;
            Matrix dp = gb * vb.transpose();
            Eigen::VectorXd dot = dp.cwiseProduct(p).rowwise().sum();
            Matrix ds = p.array() * (dp.colwise() - dot).array();
            dQ.block(g * q_group, h * dh, q_group, dh) += scale * ds * kb;
            dK.block(g * k_group, h * dh, k_group, dh) += scale * ds.transpose() * qb;
          }
        }
        t.accumulate(qi, dQ);
        t.accumulate(ki, dK);
        t.accumulate(vi, dV);
      });
}

Var meanSquaredError(Var a, Var b) {
  requireSameTape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    shapeMismatch("meanSquaredError", a.value(), b.value());
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = (a.value() - b.value()).squaredNorm() / n;
  return a.tape->push("meanSquaredError", std::move(out), {a.id, b.id},
                      [ai = a.id, bi = b.id, n](Tape& t, int self) {
                        const double g = t.grad(self)(0, 0);
                        Matrix d = (2.0 * g / n) * (t.value(ai) - t.value(bi));
                        t.accumulate(ai, d);
                        t.accumulate(bi, -d);
                      });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->push("sum", std::move(out), {a.id}, [ai = a.id](Tape& t, int self) {
    const Matrix& x = t.value(ai);
    t.accumulate(ai, Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

Eigen::RowVectorXd sinusoidalEmbedding(double t, int dim) {
  if (dim < 2 || dim % 2 != 0)
    throw std::invalid_argument("sinusoidalEmbedding: dim must be even and >= 2");
  Eigen::RowVectorXd out(dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double w = std::pow(10000.0, -2.0 * i / dim);
    out(2 * i) = std::sin(t * w);
    out(2 * i + 1) = std::cos(t * w);
  }
  return out;
}

// ---------------------------------------------------------------------------

GradCheckResult checkGradients(const ParameterStore& store, const LossBuilder& loss,
                               std::size_t coords, std::uint64_t seed, double h,
                               double abs_floor) {
  const auto names = store.trainableNames();
  const std::size_t total = store.trainableSize();
  if (total == 0) throw std::invalid_argument("checkGradients: no trainable parameters");

  Gradients analytic;
  {
    Tape tape;
    analytic = tape.backward(loss(tape, store), store);
  }
  auto evaluate = [&](const ParameterStore& s) {
    Tape tape;
    return loss(tape, s).value()(0, 0);
  };

  GradCheckResult out;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  ParameterStore probe = store;
  for (std::size_t c = 0; c < coords; ++c) {
    std::size_t flat = pick(rng);
    std::size_t slot = 0;
    while (flat >= store.get(names[slot]).size()) flat -= store.get(names[slot++]).size();
    const std::string& name = names[slot];
    double& x = probe.get(name).values()[flat];
    const double x0 = x;
    x = x0 + h;
    const double up = evaluate(probe);
    x = x0 - h;
    const double down = evaluate(probe);
    x = x0;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.at(name).data()[flat];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), abs_floor});
    if (rel >= out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst = name + "[" + std::to_string(flat) + "]";
    }
    ++out.checked;
  }
  return out;
}

}  // namespace vmf
