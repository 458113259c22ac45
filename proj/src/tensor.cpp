#include "vfae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vfae {

// ---- ParameterStore ---------------------------------------------------------

ParamId ParameterStore::add(std::string name, Matrix init) {
  if (find(name)) throw ContractError("duplicate parameter name: " + name);
  Parameter p{std::move(name), std::move(init), Matrix()};
  p.zero_grad();
  params_.push_back(std::move(p));
  return ParamId{params_.size() - 1};
}

std::optional<ParamId> ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return ParamId{i};
  }
  return std::nullopt;
}

Parameter& ParameterStore::at(std::string_view name) {
  auto id = find(name);
  if (!id) throw ContractError("unknown parameter: " + std::string(name));
  return params_[id->index];
}

const Parameter& ParameterStore::at(std::string_view name) const {
  auto id = find(name);
  if (!id) throw ContractError("unknown parameter: " + std::string(name));
  return params_[id->index];
}

Index ParameterStore::scalar_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void ParameterStore::assign_values(const ParameterStore& other) {
  if (other.size() != size()) throw ContractError("parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& src = other.params_[i];
    auto& dst = params_[i];
    if (src.name != dst.name || src.value.rows() != dst.value.rows() ||
        src.value.cols() != dst.value.cols()) {
      throw ContractError("parameter layout mismatch at " + dst.name);
    }
    dst.value = src.value;
  }
}

// ---- Var / Tape -------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("scalar() on tensor of shape " + shape_string(v));
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  return record(std::move(value), {}, nullptr, "constant");
}

Var Tape::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::param(Parameter& p) {
  Var v = record(p.value, {}, nullptr, "param");
  nodes_.back().param = &p;
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn fn, const char* op) {
  if (check_finite_ && !value.allFinite()) {
    throw NumericError(std::string("non-finite value produced by ") + op);
  }
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape() != this) throw ContractError(std::string(op) + ": operand from another tape");
    needs = needs || nodes_[v.id()].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Matrix& Tape::grad(std::uint32_t id) const {
  static const Matrix empty;
  return nodes_[id].grad.size() == 0 ? empty : nodes_[id].grad;
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw ContractError("backward on an empty tape");
  if (loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward requires a scalar loss, got " + shape_string(loss.value()));
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (std::int64_t i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, static_cast<std::uint32_t>(i));
    if (n.param) n.param->grad += n.grad;
  }
}

Var Binder::operator()(ParamId id) {
  if (cache_.size() <= id.index) cache_.resize(id.index + 1);
  auto& slot = cache_[id.index];
  if (!slot) slot = mut_ ? tape_->param((*mut_)[id]) : tape_->param((*cst_)[id]);
  return *slot;
}

// ---- helpers ------------------------------------------------------------------

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << "x" << m.cols() << "]";
  return os.str();
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void check_broadcast(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return;
  if (a.size() == 1 || b.size() == 1) return;
  if ((a.rows() == 1 || b.rows() == 1) && a.cols() == b.cols()) return;
  if ((a.cols() == 1 || b.cols() == 1) && a.rows() == b.rows()) return;
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_string(a) + " with " +
                       shape_string(b));
}

Matrix expand(const Matrix& m, Index rows, Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  if (m.size() == 1) return Matrix::Constant(rows, cols, m(0, 0));
  if (m.rows() == 1) return m.replicate(rows, 1);
  return m.replicate(1, cols);
}

/// Sums a gradient of the broadcast shape back down to `like`'s shape.
Matrix reduce_to(const Matrix& g, const Matrix& like) {
  if (g.rows() == like.rows() && g.cols() == like.cols()) return g;
  if (like.size() == 1) return Matrix::Constant(1, 1, g.sum());
  if (like.rows() == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

template <typename F, typename D>
Var unary(Var a, const char* op, F forward, D local_grad) {
  Matrix out = a.value().unaryExpr(forward);
  const Var in[] = {a};
  return a.tape()->record(
      std::move(out), in,
      [a, local_grad](Tape& t, std::uint32_t self) {
        const Matrix& x = t.value(a.id());
        const Matrix& y = t.value(self);
        t.accumulate(a.id(), t.grad(self).cwiseProduct(local_grad(x, y)));
      },
      op);
}

void check_axis(int axis, const char* op) {
  if (axis != 0 && axis != 1) {
    throw ContractError(std::string(op) + ": axis must be 0 or 1, got " + std::to_string(axis));
  }
}

}  // namespace

// ---- binary ops ---------------------------------------------------------------

Var matmul(Var a, Var b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner extents differ, " + shape_string(av) + " x " +
                         shape_string(bv));
  }
  const Var in[] = {a, b};
  return a.tape()->record(
      av * bv, in,
      [a, b](Tape& t, std::uint32_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a.id())) t.accumulate(a.id(), g * t.value(b.id()).transpose());
        if (t.requires_grad(b.id())) t.accumulate(b.id(), t.value(a.id()).transpose() * g);
      },
      "matmul");
}

namespace {

enum class BinaryOp { add, sub, mul };

Var binary(Var a, Var b, BinaryOp kind, const char* op) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  check_broadcast(av, bv, op);
  const Index r = std::max(av.rows(), bv.rows());
  const Index c = std::max(av.cols(), bv.cols());
  Matrix ea = expand(av, r, c);
  Matrix eb = expand(bv, r, c);
  Matrix out;
  switch (kind) {
    case BinaryOp::add: out = ea + eb; break;
    case BinaryOp::sub: out = ea - eb; break;
    case BinaryOp::mul: out = ea.cwiseProduct(eb); break;
  }
  const Var in[] = {a, b};
  return a.tape()->record(
      std::move(out), in,
      [a, b, kind](Tape& t, std::uint32_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& av = t.value(a.id());
        const Matrix& bv = t.value(b.id());
        const bool ga = t.requires_grad(a.id());
        const bool gb = t.requires_grad(b.id());
        switch (kind) {
          case BinaryOp::add:
            if (ga) t.accumulate(a.id(), reduce_to(g, av));
            if (gb) t.accumulate(b.id(), reduce_to(g, bv));
            break;
          case BinaryOp::sub:
            if (ga) t.accumulate(a.id(), reduce_to(g, av));
            if (gb) t.accumulate(b.id(), -reduce_to(g, bv));
            break;
          case BinaryOp::mul:
            if (ga) t.accumulate(a.id(), reduce_to(g.cwiseProduct(expand(bv, g.rows(), g.cols())), av));
            if (gb) t.accumulate(b.id(), reduce_to(g.cwiseProduct(expand(av, g.rows(), g.cols())), bv));
            break;
        }
      },
      op);
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, BinaryOp::add, "add"); }
Var sub(Var a, Var b) { return binary(a, b, BinaryOp::sub, "sub"); }
Var mul(Var a, Var b) { return binary(a, b, BinaryOp::mul, "mul"); }

Var scale(Var a, double k) {
  const Var in[] = {a};
  return a.tape()->record(
      a.value() * k, in,
      [a, k](Tape& t, std::uint32_t self) { t.accumulate(a.id(), t.grad(self) * k); }, "scale");
}

Var shift(Var a, double k) {
  const Var in[] = {a};
  return a.tape()->record(
      a.value().array() + k, in,
      [a](Tape& t, std::uint32_t self) { t.accumulate(a.id(), t.grad(self)); }, "shift");
}

// ---- unary ops ----------------------------------------------------------------

Var exp(Var a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); },
      [](const Matrix&, const Matrix& y) -> Matrix { return y; });
}

Var log(Var a) {
  const Matrix& v = a.value();
  for (Index j = 0; j < v.cols(); ++j) {
    for (Index i = 0; i < v.rows(); ++i) {
      if (!(v(i, j) > 0.0)) {
        throw DomainError("log: non-positive value " + std::to_string(v(i, j)) + " at (" +
                          std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
  return unary(
      a, "log", [](double x) { return std::log(x); },
      [](const Matrix& x, const Matrix&) -> Matrix { return x.cwiseInverse(); });
}

Var tanh(Var a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](const Matrix&, const Matrix& y) -> Matrix { return (1.0 - y.array().square()).matrix(); });
}

Var sigmoid(Var a) {
  return unary(
      a, "sigmoid", [](double x) { return sigmoid(x); },
      [](const Matrix&, const Matrix& y) -> Matrix {
        return (y.array() * (1.0 - y.array())).matrix();
      });
}

Var relu(Var a) {
  return unary(
      a, "relu", [](double x) { return x > 0 ? x : 0.0; },
      [](const Matrix& x, const Matrix&) -> Matrix {
        return (x.array() > 0).cast<double>().matrix();
      });
}

Var softplus(Var a) {
  return unary(
      a, "softplus", [](double x) { return softplus(x); },
      [](const Matrix& x, const Matrix&) -> Matrix {
        return x.unaryExpr([](double v) { return sigmoid(v); });
      });
}

Var square(Var a) {
  return unary(
      a, "square", [](double x) { return x * x; },
      [](const Matrix& x, const Matrix&) -> Matrix { return 2.0 * x; });
}

Var negate(Var a) { return scale(a, -1.0); }

Var cos(Var a) {
  return unary(
      a, "cos", [](double x) { return std::cos(x); },
      [](const Matrix& x, const Matrix&) -> Matrix {
        return x.unaryExpr([](double v) { return -std::sin(v); });
      });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo > hi");
  return unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](const Matrix& x, const Matrix&) -> Matrix {
        return x.unaryExpr([lo, hi](double v) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
      });
}

// ---- reductions -----------------------------------------------------------------

Var sum(Var a) {
  const Var in[] = {a};
  return a.tape()->record(
      Matrix::Constant(1, 1, a.value().sum()), in,
      [a](Tape& t, std::uint32_t self) {
        const Matrix& x = t.value(a.id());
        t.accumulate(a.id(), Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
      },
      "sum");
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var sum(Var a, int axis) {
  check_axis(axis, "sum");
  Matrix out = axis == 0 ? Matrix(a.value().colwise().sum()) : Matrix(a.value().rowwise().sum());
  const Var in[] = {a};
  return a.tape()->record(
      std::move(out), in,
      [a](Tape& t, std::uint32_t self) {
        const Matrix& x = t.value(a.id());
        t.accumulate(a.id(), expand(t.grad(self), x.rows(), x.cols()));
      },
      "sum_axis");
}

Var mean(Var a, int axis) {
  check_axis(axis, "mean");
  const Index n = axis == 0 ? a.rows() : a.cols();
  if (n == 0) throw ContractError("mean over an empty axis");
  return scale(sum(a, axis), 1.0 / static_cast<double>(n));
}

Var logsumexp(Var a, int axis) {
  check_axis(axis, "logsumexp");
  const Matrix& x = a.value();
  Matrix out;
  if (axis == 1) {
    out.resize(x.rows(), 1);
    for (Index i = 0; i < x.rows(); ++i) {
      const double m = x.row(i).maxCoeff();
      out(i, 0) = m + std::log((x.row(i).array() - m).exp().sum());
    }
  } else {
    out.resize(1, x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
      const double m = x.col(j).maxCoeff();
      out(0, j) = m + std::log((x.col(j).array() - m).exp().sum());
    }
  }
  const Var in[] = {a};
  return a.tape()->record(
      std::move(out), in,
      [a](Tape& t, std::uint32_t self) {
        const Matrix& x = t.value(a.id());
        const Matrix& y = t.value(self);
        const Matrix& g = t.grad(self);
        Matrix ey = expand(y, x.rows(), x.cols());
        Matrix eg = expand(g, x.rows(), x.cols());
        t.accumulate(a.id(), eg.cwiseProduct((x - ey).array().exp().matrix()));
      },
      "logsumexp");
}

Var log_softmax(Var a) { return sub(a, logsumexp(a, 1)); }

// ---- structural ops ---------------------------------------------------------------

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row counts differ, " + shape_string(parts.front().value()) +
                           " vs " + shape_string(p.value()));
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts.front().tape()->record(
      std::move(out), parts,
      [ins](Tape& t, std::uint32_t self) {
        const Matrix& g = t.grad(self);
        Index at = 0;
        for (const Var& p : ins) {
          const Index c = t.value(p.id()).cols();
          if (t.requires_grad(p.id())) t.accumulate(p.id(), g.middleCols(at, c));
          at += c;
        }
      },
      "concat_cols");
}

Var slice_cols(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") outside " + shape_string(a.value()));
  }
  const Var in[] = {a};
  return a.tape()->record(
      a.value().middleCols(start, count), in,
      [a, start, count](Tape& t, std::uint32_t self) {
        const Matrix& x = t.value(a.id());
        Matrix g = Matrix::Zero(x.rows(), x.cols());
        g.middleCols(start, count) = t.grad(self);
        t.accumulate(a.id(), g);
      },
      "slice_cols");
}

Var gather_rows(Var a, std::span<const Index> rows) {
  const Matrix& x = a.value();
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                           shape_string(x));
    }
    out.row(static_cast<Index>(i)) = x.row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  const Var in[] = {a};
  return a.tape()->record(
      std::move(out), in,
      [a, idx](Tape& t, std::uint32_t self) {
        const Matrix& x = t.value(a.id());
        const Matrix& g = t.grad(self);
        Matrix acc = Matrix::Zero(x.rows(), x.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) acc.row(idx[i]) += g.row(static_cast<Index>(i));
        t.accumulate(a.id(), acc);
      },
      "gather_rows");
}

}  // namespace vfae
