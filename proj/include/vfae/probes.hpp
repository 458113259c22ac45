#pragma once

// Post-hoc classifiers that measure how much a representation reveals about
// a target. Both standardize features with statistics of their training rows.

#include <cstdint>
#include <span>
#include <vector>

#include "vfae/nn.hpp"
#include "vfae/tensor.hpp"

namespace vfae {

struct Standardizer {
  RowVector mean;
  RowVector scale;

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

double accuracy(std::span<const int> predicted, std::span<const int> truth);
/// Share of the most frequent label.
double majority_share(std::span<const int> labels);
std::vector<int> argmax_rows(const Matrix& p);

/// Multinomial logistic regression, mean cross-entropy + l2/2 |W|^2 (bias
/// unpenalized), minimized by accelerated full-batch gradient descent with
/// backtracking and adaptive restart.
struct LinearProbeConfig {
  double l2 = 1e-4;
  int max_iterations = 5000;
  /// Stop once the largest gradient entry falls below this.
  double tolerance = 1e-6;
};

class LinearProbe {
 public:
  /// Labels must lie in [0, classes); at least two distinct labels required.
  static LinearProbe fit(const Matrix& x, std::span<const int> labels, int classes,
                         const LinearProbeConfig& cfg = {});

  Matrix predict_proba(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;
  double accuracy(const Matrix& x, std::span<const int> labels) const;

  /// Weights on standardized features, [d x C]; bias [1 x C].
  const Matrix& weights() const { return w_; }
  const RowVector& bias() const { return b_; }
  int iterations() const { return iterations_; }
  bool converged() const { return converged_; }

 private:
  Standardizer std_;
  Matrix w_;
  RowVector b_;
  int iterations_ = 0;
  bool converged_ = false;
};

/// One hidden layer perceptron trained with Adam on minibatches, early-stopped
/// on the holdout cross-entropy of a seeded fifth of the training rows.
struct MlpProbeConfig {
  Index hidden = 64;
  int max_epochs = 300;
  Index batch_size = 100;
  double lr = 5e-3;
  int patience = 10;
  double holdout = 0.2;
  std::uint64_t seed = 1;
};

class MlpProbe {
 public:
  static MlpProbe fit(const Matrix& x, std::span<const int> labels, int classes, const MlpProbeConfig& cfg = {});

  Matrix predict_proba(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;
  double accuracy(const Matrix& x, std::span<const int> labels) const;

  int epochs() const { return epochs_; }

 private:
  Var logits(Binder& b, Var x) const;

  Standardizer std_;
  ParameterStore store_;
  Dense hidden_;
  Dense out_;
  int epochs_ = 0;
};

}  // namespace vfae
