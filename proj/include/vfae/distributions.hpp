#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "vfae/tensor.hpp"

namespace vfae {

/// Bounds applied to every log standard deviation before it is used.
inline constexpr double kLogSigmaMin = -7.0;
inline constexpr double kLogSigmaMax = 7.0;

/// Seedable source of i.i.d. standard normal and uniform draws.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : engine_(seed) {}

  Matrix standard_normal(Index rows, Index cols);
  Matrix uniform(Index rows, Index cols, double lo, double hi);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Diagonal Gaussian over rows of a batch. `log_sigma` is already clamped.
struct DiagGaussian {
  Var mu;
  Var log_sigma;

  /// Clamps the raw log-sigma head to [kLogSigmaMin, kLogSigmaMax].
  static DiagGaussian from_heads(Var mu, Var raw_log_sigma);
};

struct CategoricalDist {
  Var logits;

  Var log_probs() const { return log_softmax(logits); }
  Matrix probs() const;
};

enum class LikelihoodKind { bernoulli, poisson, gaussian_sigmoid_mean };

std::string to_string(LikelihoodKind kind);
LikelihoodKind parse_likelihood(const std::string& name);

/// Decoder output for p(x | z1, s).
///   bernoulli:              natural = logits, pi = sigmoid(natural)
///   poisson:                natural = log-rate, lambda = exp(natural)
///   gaussian_sigmoid_mean:  natural = mean pre-activation, mean = sigmoid(natural);
///                           log_sigma holds the (clamped) log standard deviation
struct Likelihood {
  LikelihoodKind kind = LikelihoodKind::bernoulli;
  Var natural;
  Var log_sigma;
};

/// mu + exp(log_sigma) * eps with eps drawn from `noise`.
Var sample_reparam(const DiagGaussian& d, NoiseSource& noise);
Var sample_reparam(const DiagGaussian& d, const Matrix& eps);

/// Per-row KL(N(mu, sigma^2) || N(0, I)), shape [n x 1].
Var kl_diag_gaussian_std(const DiagGaussian& d);

/// Per-row KL(Cat(softmax(logits)) || uniform), shape [n x 1].
Var kl_categorical_uniform(const CategoricalDist& d);

/// Per-row log p(x | decoder output), shape [n x 1]. Throws DomainError
/// naming the first coordinate outside the likelihood's support.
Var log_prob(const Likelihood& l, const Matrix& x);

/// Per-row diagonal Gaussian log density at z, shape [n x 1].
Var gaussian_log_prob(const DiagGaussian& d, Var z);

void check_support(LikelihoodKind kind, const Matrix& x);

}  // namespace vfae
