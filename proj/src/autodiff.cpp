#include "mvc/autodiff.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

#include "mvc/errors.hpp"

namespace mvc {

namespace {

using Array = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tape& tape_of(Var a) {
  if (!a.valid()) throw GraphError("operation on an unbound variable");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw GraphError("variables belong to different tapes");
  }
  return *a.tape();
}

void require_same_matrix_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

Tensor like(const Tensor& t) { return Tensor(t.shape(), 0.0); }

Tensor matrix_tensor(std::size_t rows, std::size_t cols) { return Tensor::zeros(rows, cols); }

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "softplus") return Activation::softplus;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

const Tensor& Var::value() const {
  if (!tape_) throw GraphError("unbound variable");
  return tape_->value(*this);
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Var Tape::constant(Tensor value) {
  require_finite(value, "constant input");
  nodes_.push_back(Node{OpKind::constant, std::move(value), {}, nullptr, std::nullopt, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(std::size_t param_id, const Tensor& value) {
  if (auto it = param_nodes_.find(param_id); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  require_finite(value, "parameter " + std::to_string(param_id));
  nodes_.push_back(Node{OpKind::parameter, value, {}, nullptr, param_id, true});
  param_nodes_.emplace(param_id, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

std::vector<Var> Tape::parameters(std::span<const Tensor> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back(parameter(i, values[i]));
  return out;
}

void Tape::check_owned(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw GraphError("variable does not belong to this tape");
  }
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id()].value;
}

const Tape::Node& Tape::node(Var v) const {
  check_owned(v);
  return nodes_[v.id()];
}

Var Tape::record(OpKind kind, Tensor value, std::vector<Var> parents,
                 std::function<void(Tape&, const Node&, const Tensor&)> backward) {
  Node node{kind, std::move(value), {}, nullptr, std::nullopt, false};
  node.parents.reserve(parents.size());
  for (Var p : parents) {
    check_owned(p);
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor* Tape::grad_slot(std::size_t id) {
  if (!nodes_[id].requires_grad) return nullptr;
  Tensor& slot = adjoints_[id];
  if (slot.empty()) slot = like(nodes_[id].value);
  return &slot;
}

Gradients Tape::backward(Var loss) {
  if (loss.tape() != this || loss.id() >= nodes_.size()) {
    throw GraphError("loss node is not on this tape");
  }
  const Node& root = nodes_[loss.id()];
  if (root.value.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(root.value.shape()));
  }
  adjoints_.assign(nodes_.size(), Tensor{});
  adjoints_[loss.id()] = Tensor(root.value.shape(), 1.0);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.backward || adjoints_[i].empty()) continue;
    node.backward(*this, node, adjoints_[i]);
  }

  Gradients grads;
  for (const auto& [param_id, node_id] : param_nodes_) {
    grads.emplace(param_id, adjoints_[node_id].empty() ? like(nodes_[node_id].value)
                                                      : adjoints_[node_id]);
  }
  return grads;
}

Tensor Tape::grad(Var v) const {
  check_owned(v);
  if (v.id() < adjoints_.size() && !adjoints_[v.id()].empty()) return adjoints_[v.id()];
  return like(nodes_[v.id()].value);
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  Tensor out = matrix_tensor(av.rows(), bv.cols());
  out.matrix().noalias() = av.matrix() * bv.matrix();
  return tape.record(OpKind::matmul, std::move(out), {a, b},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       const Tensor& av = t.value_at(n.parents[0]);
                       const Tensor& bv = t.value_at(n.parents[1]);
                       if (Tensor* ga = t.grad_slot(n.parents[0])) {
                         ga->matrix().noalias() += g.matrix() * bv.matrix().transpose();
                       }
                       if (Tensor* gb = t.grad_slot(n.parents[1])) {
                         gb->matrix().noalias() += av.matrix().transpose() * g.matrix();
                       }
                     });
}

Var matmul_nt(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt: " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()) + "^T");
  }
  Tensor out = matrix_tensor(av.rows(), bv.rows());
  out.matrix().noalias() = av.matrix() * bv.matrix().transpose();
  return tape.record(OpKind::matmul_nt, std::move(out), {a, b},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       const Tensor& av = t.value_at(n.parents[0]);
                       const Tensor& bv = t.value_at(n.parents[1]);
                       if (Tensor* ga = t.grad_slot(n.parents[0])) {
                         ga->matrix().noalias() += g.matrix() * bv.matrix();
                       }
                       if (Tensor* gb = t.grad_slot(n.parents[1])) {
                         gb->matrix().noalias() += g.matrix().transpose() * av.matrix();
                       }
                     });
}

// ---------------------------------------------------------------------------
// Elementwise binary
// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_matrix_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out.matrix() += b.value().matrix();
  return tape.record(OpKind::add, std::move(out), {a, b},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       for (std::size_t p : n.parents) {
                         if (Tensor* gp = t.grad_slot(p)) gp->matrix() += g.matrix();
                       }
                     });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_matrix_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  out.matrix() -= b.value().matrix();
  return tape.record(OpKind::sub, std::move(out), {a, b},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(n.parents[0])) ga->matrix() += g.matrix();
                       if (Tensor* gb = t.grad_slot(n.parents[1])) gb->matrix() -= g.matrix();
                     });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  require_same_matrix_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  out.matrix().array() *= b.value().matrix().array();
  return tape.record(OpKind::mul, std::move(out), {a, b},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       const Tensor& av = t.value_at(n.parents[0]);
                       const Tensor& bv = t.value_at(n.parents[1]);
                       if (Tensor* ga = t.grad_slot(n.parents[0])) {
                         ga->matrix().array() += g.matrix().array() * bv.matrix().array();
                       }
                       if (Tensor* gb = t.grad_slot(n.parents[1])) {
                         gb->matrix().array() += g.matrix().array() * av.matrix().array();
                       }
                     });
}

Var add_row(Var a, Var row) {
  Tape& tape = tape_of(a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row: row " + shape_string(rv.shape()) + " vs " + shape_string(av.shape()));
  }
  Tensor out = av;
  out.matrix().rowwise() += rv.matrix().row(0);
  return tape.record(OpKind::add_row, std::move(out), {a, row},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(n.parents[0])) ga->matrix() += g.matrix();
                       if (Tensor* gr = t.grad_slot(n.parents[1])) {
                         gr->matrix().row(0) += g.matrix().colwise().sum();
                       }
                     });
}

Var add_col(Var a, Var col) {
  Tape& tape = tape_of(a, col);
  const Tensor& av = a.value();
  const Tensor& cv = col.value();
  if (cv.cols() != 1 || cv.rows() != av.rows()) {
    throw DimensionError("add_col: col " + shape_string(cv.shape()) + " vs " + shape_string(av.shape()));
  }
  Tensor out = av;
  out.matrix().colwise() += cv.matrix().col(0);
  return tape.record(OpKind::add_col, std::move(out), {a, col},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(n.parents[0])) ga->matrix() += g.matrix();
                       if (Tensor* gc = t.grad_slot(n.parents[1])) {
                         gc->matrix().col(0) += g.matrix().rowwise().sum();
                       }
                     });
}

Var mul_col(Var a, Var col) {
  Tape& tape = tape_of(a, col);
  const Tensor& av = a.value();
  const Tensor& cv = col.value();
  if (cv.cols() != 1 || cv.rows() != av.rows()) {
    throw DimensionError("mul_col: col " + shape_string(cv.shape()) + " vs " + shape_string(av.shape()));
  }
  Tensor out = av;
  out.matrix().array().colwise() *= cv.matrix().col(0).array();
  return tape.record(OpKind::mul_col, std::move(out), {a, col},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       const Tensor& av = t.value_at(n.parents[0]);
                       const Tensor& cv = t.value_at(n.parents[1]);
                       if (Tensor* ga = t.grad_slot(n.parents[0])) {
                         ga->matrix().array() +=
                             g.matrix().array().colwise() * cv.matrix().col(0).array();
                       }
                       if (Tensor* gc = t.grad_slot(n.parents[1])) {
                         gc->matrix().col(0) +=
                             (g.matrix().array() * av.matrix().array()).matrix().rowwise().sum();
                       }
                     });
}

// ---------------------------------------------------------------------------
// Elementwise unary
// ---------------------------------------------------------------------------

Var scale(Var a, double factor) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  out.matrix() *= factor;
  return tape.record(OpKind::scale, std::move(out), {a},
                     [factor](Tape& t, const Tape::Node& n, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(n.parents[0])) ga->matrix() += factor * g.matrix();
                     });
}

Var shift(Var a, double offset) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  out.matrix().array() += offset;
  return tape.record(OpKind::shift, std::move(out), {a},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(n.parents[0])) ga->matrix() += g.matrix();
                     });
}

Var activate(Var a, Activation act) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  auto v = out.values();
  switch (act) {
    case Activation::identity: break;
    case Activation::relu:
      for (auto& x : v) x = x > 0 ? x : 0.0;
      break;
    case Activation::tanh:
      for (auto& x : v) x = std::tanh(x);
      break;
    case Activation::softplus:
      for (auto& x : v) x = softplus(x);
      break;
  }
  return tape.record(OpKind::activation, std::move(out), {a},
                     [act](Tape& t, const Tape::Node& n, const Tensor& g) {
                       Tensor* ga = t.grad_slot(n.parents[0]);
                       if (!ga) return;
                       const auto in = t.value_at(n.parents[0]).values();
                       const auto y = n.value.values();
                       const auto gv = g.values();
                       auto dst = ga->values();
                       switch (act) {
                         case Activation::identity:
                           for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gv[i];
                           break;
                         case Activation::relu:
                           for (std::size_t i = 0; i < dst.size(); ++i) {
                             if (in[i] > 0) dst[i] += gv[i];
                           }
                           break;
                         case Activation::tanh:
                           for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gv[i] * (1.0 - y[i] * y[i]);
                           break;
                         case Activation::softplus:
                           for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gv[i] * sigmoid(in[i]);
                           break;
                       }
                     });
}

Var exp(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  out.matrix() = out.matrix().array().exp().matrix();
  return tape.record(OpKind::exp, std::move(out), {a},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(n.parents[0])) {
                         ga->matrix().array() += g.matrix().array() * n.value.matrix().array();
                       }
                     });
}

Var log(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (auto& x : out.values()) {
    if (!(x > 0)) throw NumericError("log of a non-positive value");
    x = std::log(x);
  }
  return tape.record(OpKind::log, std::move(out), {a},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(n.parents[0])) {
                         ga->matrix().array() +=
                             g.matrix().array() / t.value_at(n.parents[0]).matrix().array();
                       }
                     });
}

Var square(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  out.matrix() = out.matrix().array().square().matrix();
  return tape.record(OpKind::square, std::move(out), {a},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(n.parents[0])) {
                         ga->matrix().array() +=
                             2.0 * g.matrix().array() * t.value_at(n.parents[0]).matrix().array();
                       }
                     });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo > hi");
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (auto& x : out.values()) x = std::clamp(x, lo, hi);
  return tape.record(OpKind::clamp, std::move(out), {a},
                     [lo, hi](Tape& t, const Tape::Node& n, const Tensor& g) {
                       Tensor* ga = t.grad_slot(n.parents[0]);
                       if (!ga) return;
                       const auto in = t.value_at(n.parents[0]).values();
                       const auto gv = g.values();
                       auto dst = ga->values();
                       for (std::size_t i = 0; i < dst.size(); ++i) {
                         if (in[i] >= lo && in[i] <= hi) dst[i] += gv[i];
                       }
                     });
}

Var xlogx(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  for (auto& x : out.values()) {
    if (x < 0) throw NumericError("xlogx of a negative value");
    x = x > 0 ? x * std::log(x) : 0.0;
  }
  return tape.record(OpKind::xlogx, std::move(out), {a},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       Tensor* ga = t.grad_slot(n.parents[0]);
                       if (!ga) return;
                       const auto in = t.value_at(n.parents[0]).values();
                       const auto gv = g.values();
                       auto dst = ga->values();
                       for (std::size_t i = 0; i < dst.size(); ++i) {
                         dst[i] += gv[i] * (std::log(std::max(in[i], DBL_MIN)) + 1.0);
                       }
                     });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping
// ---------------------------------------------------------------------------

Var sum(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = Tensor::scalar(a.value().matrix().sum());
  return tape.record(OpKind::sum, std::move(out), {a},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(n.parents[0])) ga->matrix().array() += g[0];
                     });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var row_sum(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  Tensor out = matrix_tensor(av.rows(), 1);
  out.matrix().col(0) = av.matrix().rowwise().sum();
  return tape.record(OpKind::row_sum, std::move(out), {a},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(n.parents[0])) {
                         ga->matrix().colwise() += g.matrix().col(0);
                       }
                     });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  Tape& tape = tape_of(parts[0]);
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    tape_of(parts[0], p);
    if (p.value().rows() != rows) {
      throw DimensionError("concat_cols: inconsistent row counts " + std::to_string(rows) + " vs " +
                           std::to_string(p.value().rows()));
    }
    cols += p.value().cols();
  }
  Tensor out = matrix_tensor(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& pv = p.value();
    out.matrix().middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(pv.cols())) =
        pv.matrix();
    offset += pv.cols();
  }
  return tape.record(OpKind::concat_cols, std::move(out), {parts.begin(), parts.end()},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       Eigen::Index offset = 0;
                       for (std::size_t p : n.parents) {
                         const auto width = static_cast<Eigen::Index>(t.value_at(p).cols());
                         if (Tensor* gp = t.grad_slot(p)) gp->matrix() += g.matrix().middleCols(offset, width);
                         offset += width;
                       }
                     });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  if (count == 0 || start + count > av.cols()) {
    throw DimensionError("slice_cols out of range");
  }
  Tensor out = matrix_tensor(av.rows(), count);
  out.matrix() = av.matrix().middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count));
  return tape.record(OpKind::slice_cols, std::move(out), {a},
                     [start, count](Tape& t, const Tape::Node& n, const Tensor& g) {
                       if (Tensor* ga = t.grad_slot(n.parents[0])) {
                         ga->matrix().middleCols(static_cast<Eigen::Index>(start),
                                                 static_cast<Eigen::Index>(count)) += g.matrix();
                       }
                     });
}

// ---------------------------------------------------------------------------
// Row-wise normalizers
// ---------------------------------------------------------------------------

Var softmax_rows(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  auto m = out.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp().matrix();
    m.row(r) /= m.row(r).sum();
  }
  return tape.record(OpKind::softmax_rows, std::move(out), {a},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       Tensor* ga = t.grad_slot(n.parents[0]);
                       if (!ga) return;
                       const auto y = n.value.matrix().array();
                       const auto gy = g.matrix().array();
                       const Eigen::VectorXd dot = (gy * y).matrix().rowwise().sum();
                       ga->matrix().array() += y * (gy.colwise() - dot.array());
                     });
}

Var log_softmax_rows(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  auto m = out.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    const double lse = mx + std::log((m.row(r).array() - mx).exp().sum());
    m.row(r).array() -= lse;
  }
  return tape.record(OpKind::log_softmax_rows, std::move(out), {a},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       Tensor* ga = t.grad_slot(n.parents[0]);
                       if (!ga) return;
                       const Array soft = n.value.matrix().array().exp();
                       const Eigen::VectorXd gsum = g.matrix().rowwise().sum();
                       ga->matrix().array() += g.matrix().array() - soft.colwise() * gsum.array();
                     });
}

Var logsumexp_rows(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& av = a.value();
  Tensor out = matrix_tensor(av.rows(), 1);
  const auto m = av.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    out(static_cast<std::size_t>(r), 0) = mx + std::log((m.row(r).array() - mx).exp().sum());
  }
  return tape.record(OpKind::logsumexp_rows, std::move(out), {a},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       Tensor* ga = t.grad_slot(n.parents[0]);
                       if (!ga) return;
                       const auto in = t.value_at(n.parents[0]).matrix().array();
                       const Array soft = (in.colwise() - n.value.matrix().col(0).array()).exp();
                       ga->matrix().array() += soft.colwise() * g.matrix().col(0).array();
                     });
}

Var sq_dist(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DimensionError("sq_dist: " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  }
  const std::size_t n = av.rows(), k = bv.rows(), dim = av.cols();
  Tensor out = matrix_tensor(n, k);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < dim; ++t) {
        const double diff = av(r, t) - bv(c, t);
        acc += diff * diff;
      }
      out(r, c) = acc;
    }
  }
  return tape.record(OpKind::sq_dist, std::move(out), {a, b},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       const Tensor& av = t.value_at(n.parents[0]);
                       const Tensor& bv = t.value_at(n.parents[1]);
                       Tensor* ga = t.grad_slot(n.parents[0]);
                       Tensor* gb = t.grad_slot(n.parents[1]);
                       const std::size_t rows = av.rows(), k = bv.rows(), dim = av.cols();
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t c = 0; c < k; ++c) {
                           const double w = 2.0 * g(r, c);
                           for (std::size_t d = 0; d < dim; ++d) {
                             const double diff = av(r, d) - bv(c, d);
                             if (ga) (*ga)(r, d) += w * diff;
                             if (gb) (*gb)(c, d) -= w * diff;
                           }
                         }
                       }
                     });
}

Var normalize_rows(Var a) {
  Tape& tape = tape_of(a);
  Tensor out = a.value();
  auto m = out.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double norm = m.row(r).norm();
    if (!(norm > 0)) throw NumericError("normalize_rows: zero-norm row " + std::to_string(r));
    m.row(r) /= norm;
  }
  return tape.record(OpKind::normalize_rows, std::move(out), {a},
                     [](Tape& t, const Tape::Node& n, const Tensor& g) {
                       Tensor* ga = t.grad_slot(n.parents[0]);
                       if (!ga) return;
                       const auto in = t.value_at(n.parents[0]).matrix();
                       const auto y = n.value.matrix();
                       const auto gm = g.matrix();
                       for (Eigen::Index r = 0; r < in.rows(); ++r) {
                         const double norm = in.row(r).norm();
                         const double dot = gm.row(r).dot(y.row(r));
                         ga->matrix().row(r) += (gm.row(r) - dot * y.row(r)) / norm;
                       }
                     });
}

Var detach(Var a) {
  Tape& tape = tape_of(a);
  return tape.record(OpKind::constant, a.value(), {}, nullptr);
}

Var dense_forward(Var input, Var weight, Var bias, Activation act) {
  return activate(add_row(matmul(input, weight), bias), act);
}

}  // namespace mvc
