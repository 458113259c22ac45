#include "vfae/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include "vfae/errors.hpp"
#include "vfae/optim.hpp"
#include "vfae/random.hpp"

namespace vfae {

namespace {

void check_labels(const Matrix& x, std::span<const int> labels, int classes, const char* who) {
  if (static_cast<Index>(labels.size()) != x.rows()) {
    throw DimensionError(std::string(who) + ": " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(x.rows()) + " rows");
  }
  if (classes < 2) throw ContractError(std::string(who) + ": need at least 2 classes");
  std::vector<char> seen(static_cast<std::size_t>(classes), 0);
  for (int l : labels) {
    if (l < 0 || l >= classes) {
      throw ContractError(std::string(who) + ": label " + std::to_string(l) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
    seen[static_cast<std::size_t>(l)] = 1;
  }
  if (std::count(seen.begin(), seen.end(), 1) < 2) {
    throw ContractError(std::string(who) + ": training labels contain a single class");
  }
}

Matrix one_hot_labels(std::span<const int> labels, int classes) {
  Matrix y = Matrix::Zero(static_cast<Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Index>(i), labels[i]) = 1.0;
  return y;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

// Mean cross-entropy + l2/2 |W|^2 for theta = [W; b] against [X 1].
struct LogisticObjective {
  const Matrix& xa;
  const Matrix& y;
  double l2;

  double value(const Matrix& theta) const {
    const Matrix z = xa * theta;
    const Vector m = z.rowwise().maxCoeff();
    const Vector lse = m.array() + (z.colwise() - m).array().exp().rowwise().sum().log();
    const double ce = (lse.sum() - (z.array() * y.array()).sum()) / static_cast<double>(xa.rows());
    return ce + 0.5 * l2 * theta.topRows(theta.rows() - 1).squaredNorm();
  }

  Matrix gradient(const Matrix& theta) const {
    Matrix g = xa.transpose() * (softmax_rows(xa * theta) - y) / static_cast<double>(xa.rows());
    g.topRows(theta.rows() - 1) += l2 * theta.topRows(theta.rows() - 1);
    return g;
  }
};

}  // namespace

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  if (x.rows() == 0) throw ContractError("Standardizer: no rows");
  s.mean = x.colwise().mean();
  const Matrix c = x.rowwise() - s.mean;
  s.scale = (c.colwise().squaredNorm() / static_cast<double>(x.rows())).cwiseSqrt();
  for (Index j = 0; j < s.scale.size(); ++j)
    if (!(s.scale(j) > 1e-12)) s.scale(j) = 1.0;
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) {
    throw DimensionError("Standardizer: fitted on " + std::to_string(mean.size()) + " columns, got " +
                         std::to_string(x.cols()));
  }
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw DimensionError("accuracy: length mismatch");
  if (truth.empty()) throw ContractError("accuracy: no rows");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double majority_share(std::span<const int> labels) {
  if (labels.empty()) throw ContractError("majority_share: no rows");
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  std::size_t best = 0;
  for (const auto& [_, c] : counts) best = std::max(best, c);
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

std::vector<int> argmax_rows(const Matrix& p) {
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Index i = 0; i < p.rows(); ++i) {
    Index k = 0;
    p.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

// ---- linear -----------------------------------------------------------------

LinearProbe LinearProbe::fit(const Matrix& x, std::span<const int> labels, int classes, const LinearProbeConfig& cfg) {
  check_labels(x, labels, classes, "LinearProbe");
  LinearProbe p;
  p.std_ = Standardizer::fit(x);
  const Index n = x.rows(), d = x.cols();
  Matrix xa(n, d + 1);
  xa.leftCols(d) = p.std_.apply(x);
  xa.col(d).setOnes();
  const Matrix y = one_hot_labels(labels, classes);
  const LogisticObjective f{xa, y, cfg.l2};

  Matrix theta = Matrix::Zero(d + 1, classes);
  Matrix prev = theta;
  double f_theta = f.value(theta);
  double t = 1.0;
  double lipschitz = 1.0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    Matrix ya = theta + ((t - 1.0) / t_next) * (theta - prev);
    double f_y = f.value(ya);
    Matrix g = f.gradient(ya);
    p.iterations_ = it + 1;
    if (g.cwiseAbs().maxCoeff() < cfg.tolerance) {
      theta = ya;
      p.converged_ = true;
      break;
    }
    Matrix next;
    double f_next = 0.0;
    for (;;) {
      next = ya - g / lipschitz;
      f_next = f.value(next);
      if (f_next <= f_y - 0.5 * g.squaredNorm() / lipschitz + 1e-15 * std::abs(f_y)) break;
      lipschitz *= 2.0;
    }
    if (f_next > f_theta) {
      // Momentum overshot: restart from the current iterate.
      t = 1.0;
      prev = theta;
      continue;
    }
    prev = std::move(theta);
    theta = std::move(next);
    f_theta = f_next;
    t = t_next;
    lipschitz *= 0.9;
  }
  p.w_ = theta.topRows(d);
  p.b_ = theta.row(d);
  return p;
}

Matrix LinearProbe::predict_proba(const Matrix& x) const {
  return softmax_rows((std_.apply(x) * w_).rowwise() + b_);
}

std::vector<int> LinearProbe::predict(const Matrix& x) const { return argmax_rows(predict_proba(x)); }

double LinearProbe::accuracy(const Matrix& x, std::span<const int> labels) const {
  return vfae::accuracy(predict(x), labels);
}

// ---- mlp --------------------------------------------------------------------

Var MlpProbe::logits(Binder& b, Var x) const { return out_(b, relu(hidden_(b, x))); }

MlpProbe MlpProbe::fit(const Matrix& x, std::span<const int> labels, int classes, const MlpProbeConfig& cfg) {
  check_labels(x, labels, classes, "MlpProbe");
  if (cfg.hidden < 1 || cfg.batch_size < 1 || cfg.max_epochs < 1) {
    throw ContractError("MlpProbe: hidden, batch_size and max_epochs must be >= 1");
  }
  MlpProbe p;
  p.std_ = Standardizer::fit(x);
  const Matrix xs = p.std_.apply(x);
  const Matrix y = one_hot_labels(labels, classes);

  std::mt19937_64 init(derive_seed(cfg.seed, "mlp-probe.init"));
  p.hidden_ = Dense(p.store_, "probe.hidden", x.cols(), cfg.hidden, init);
  p.out_ = Dense(p.store_, "probe.out", cfg.hidden, classes, init);

  std::mt19937_64 rng(derive_seed(cfg.seed, "mlp-probe.order"));
  std::vector<Index> order = shuffled_indices(x.rows(), rng);
  const auto n_hold = x.rows() >= 5 ? static_cast<Index>(std::llround(cfg.holdout * static_cast<double>(x.rows()))) : 0;
  std::vector<Index> hold(order.end() - n_hold, order.end());
  std::vector<Index> train(order.begin(), order.end() - n_hold);

  auto rows_of = [](const Matrix& m, const std::vector<Index>& idx) {
    Matrix out(static_cast<Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(idx[i]);
    return out;
  };
  auto mean_ce = [&](Binder& b, const Matrix& xb, const Matrix& yb) {
    Tape& t = b.tape();
    Var lp = log_softmax(p.logits(b, t.constant(xb)));
    return scale(sum(mul(lp, t.constant(yb))), -1.0 / static_cast<double>(xb.rows()));
  };
  const Matrix x_hold = rows_of(xs, hold), y_hold = rows_of(y, hold);

  Adam adam(p.store_, AdamConfig{cfg.lr});
  ParameterStore best = p.store_;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle_in_place(train, rng);
    for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(train.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<Index> idx(train.begin() + static_cast<std::ptrdiff_t>(start),
                                   train.begin() + static_cast<std::ptrdiff_t>(stop));
      Tape tape;
      Binder b(tape, p.store_);
      tape.backward(mean_ce(b, rows_of(xs, idx), rows_of(y, idx)));
      adam.step(p.store_);
    }
    p.epochs_ = epoch + 1;
    if (n_hold == 0) continue;
    Tape tape;
    Binder b(tape, std::as_const(p.store_));
    const double loss = mean_ce(b, x_hold, y_hold).scalar();
    if (loss < best_loss) {
      best_loss = loss;
      best = p.store_;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  if (n_hold > 0) p.store_.assign_values(best);
  return p;
}

Matrix MlpProbe::predict_proba(const Matrix& x) const {
  Tape tape;
  Binder b(tape, store_);
  return exp(log_softmax(logits(b, tape.constant(std_.apply(x))))).value();
}

std::vector<int> MlpProbe::predict(const Matrix& x) const { return argmax_rows(predict_proba(x)); }

double MlpProbe::accuracy(const Matrix& x, std::span<const int> labels) const {
  return vfae::accuracy(predict(x), labels);
}

}  // namespace vfae
