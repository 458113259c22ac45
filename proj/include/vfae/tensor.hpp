#pragma once

// Dense 2-D tensors on a define-by-run reverse-mode tape.
//
// A Tape is built fresh for every forward pass. Values are Eigen matrices of
// doubles; a Var is a lightweight handle (tape pointer + node index). Nodes
// are appended in evaluation order, so walking indices backwards is a valid
// topological order for gradient propagation.

#include <Eigen/Dense>

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vfae/errors.hpp"

namespace vfae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Strong handle for a parameter inside a ParameterStore.
struct ParamId {
  std::size_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Ordered registry of named parameters. Copying a store deep-copies every
/// value, which is how snapshots are shipped to evaluation threads.
class ParameterStore {
 public:
  ParamId add(std::string name, Matrix init);

  Parameter& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter& operator[](ParamId id) const { return params_.at(id.index); }

  /// Throws ContractError when no parameter carries `name`.
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  std::optional<ParamId> find(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  Index scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();

  /// Copies values (not gradients) from `other`; names and shapes must match.
  void assign_values(const ParameterStore& other);

 private:
  std::vector<Parameter> params_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var scalar(double value);
  /// Leaf whose gradient is accumulated into `p.grad` by backward().
  Var param(Parameter& p);
  /// Leaf treated as a constant (used when evaluating a read-only model).
  Var param(const Parameter& p) { return constant(p.value); }

  /// Records an op output. `inputs` decide whether a gradient is needed.
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn, const char* op);

  /// Reverse pass from a 1x1 loss. Node gradients are recomputed from
  /// scratch on each call; parameter gradients are accumulated.
  void backward(Var loss);

  const Matrix& value(std::uint32_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  bool check_finite() const { return check_finite_; }

  /// Adds `g` into the gradient buffer of node `id` (no-op for constants).
  template <typename Derived>
  void accumulate(std::uint32_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  // deque keeps references from value()/grad() valid while nodes are appended.
  std::deque<Node> nodes_;
  bool check_finite_;
};

/// Binds parameters of a store onto a tape, one leaf per parameter.
/// A mutable store yields tracked leaves; a const store yields constants.
class Binder {
 public:
  Binder(Tape& tape, ParameterStore& store) : tape_(&tape), mut_(&store), cst_(&store) {}
  Binder(Tape& tape, const ParameterStore& store) : tape_(&tape), cst_(&store) {}

  Var operator()(ParamId id);
  Tape& tape() const { return *tape_; }

 private:
  Tape* tape_;
  ParameterStore* mut_ = nullptr;
  const ParameterStore* cst_;
  std::vector<std::optional<Var>> cache_;
};

// ---- ops -------------------------------------------------------------------
//
// Binary elementwise ops broadcast a 1x1 operand against anything, and a
// 1xm row (or nx1 column) against an nxm matrix. Everything else must match.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var scale(Var a, double k);
Var shift(Var a, double k);

Var exp(Var a);
/// Throws DomainError when any input is <= 0.
Var log(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var softplus(Var a);
Var square(Var a);
Var negate(Var a);
Var cos(Var a);
/// Elementwise clamp; gradient is zero where the bound is active.
Var clamp(Var a, double lo, double hi);

/// Full reduction to 1x1.
Var sum(Var a);
Var mean(Var a);
/// axis 0 reduces over rows (result 1xm), axis 1 over columns (result nx1).
Var sum(Var a, int axis);
Var mean(Var a, int axis);
Var logsumexp(Var a, int axis);

/// Row-wise log-softmax.
Var log_softmax(Var a);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Index start, Index count);
Var gather_rows(Var a, std::span<const Index> rows);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return negate(a); }
inline Var operator*(double k, Var a) { return scale(a, k); }
inline Var operator*(Var a, double k) { return scale(a, k); }
inline Var operator+(Var a, double k) { return shift(a, k); }
inline Var operator-(Var a, double k) { return shift(a, -k); }

// Plain-matrix helpers shared with non-tape code.
double softplus(double x);
double sigmoid(double x);
std::string shape_string(const Matrix& m);

}  // namespace vfae
