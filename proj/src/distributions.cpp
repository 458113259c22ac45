#include "vfae/distributions.hpp"

#include <cmath>

namespace vfae {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)
}

Matrix NoiseSource::standard_normal(Index rows, Index cols) {
  Matrix m(rows, cols);
  // Row-major fill so the draw order does not depend on storage order.
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal_(engine_);
  return m;
}

Matrix NoiseSource::uniform(Index rows, Index cols, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(engine_);
  return m;
}

DiagGaussian DiagGaussian::from_heads(Var mu, Var raw_log_sigma) {
  if (mu.rows() != raw_log_sigma.rows() || mu.cols() != raw_log_sigma.cols()) {
    throw DimensionError("DiagGaussian: mu " + shape_string(mu.value()) + " vs log_sigma " +
                         shape_string(raw_log_sigma.value()));
  }
  return {mu, clamp(raw_log_sigma, kLogSigmaMin, kLogSigmaMax)};
}

Matrix CategoricalDist::probs() const {
  const Matrix& l = logits.value();
  Matrix p(l.rows(), l.cols());
  for (Index i = 0; i < l.rows(); ++i) {
    const double m = l.row(i).maxCoeff();
    p.row(i) = (l.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

std::string to_string(LikelihoodKind kind) {
  switch (kind) {
    case LikelihoodKind::bernoulli: return "bernoulli";
    case LikelihoodKind::poisson: return "poisson";
    case LikelihoodKind::gaussian_sigmoid_mean: return "gaussian";
  }
  return "?";
}

LikelihoodKind parse_likelihood(const std::string& name) {
  if (name == "bernoulli") return LikelihoodKind::bernoulli;
  if (name == "poisson") return LikelihoodKind::poisson;
  if (name == "gaussian" || name == "gaussian_sigmoid_mean") return LikelihoodKind::gaussian_sigmoid_mean;
  throw ContractError("unknown likelihood '" + name + "' (bernoulli, poisson, gaussian)");
}

Var sample_reparam(const DiagGaussian& d, const Matrix& eps) {
  Tape& t = *d.mu.tape();
  if (eps.rows() != d.mu.rows() || eps.cols() != d.mu.cols()) {
    throw DimensionError("sample_reparam: noise " + shape_string(eps) + " vs mu " +
                         shape_string(d.mu.value()));
  }
  return d.mu + mul(exp(d.log_sigma), t.constant(eps));
}

Var sample_reparam(const DiagGaussian& d, NoiseSource& noise) {
  return sample_reparam(d, noise.standard_normal(d.mu.rows(), d.mu.cols()));
}

Var kl_diag_gaussian_std(const DiagGaussian& d) {
  // 0.5 * sum(mu^2 + sigma^2 - 1 - 2 log sigma)
  Var terms = square(d.mu) + exp(2.0 * d.log_sigma) - 2.0 * d.log_sigma - 1.0;
  return 0.5 * sum(terms, 1);
}

Var kl_categorical_uniform(const CategoricalDist& d) {
  Var lp = d.log_probs();
  const double log_c = std::log(static_cast<double>(d.logits.cols()));
  return sum(mul(exp(lp), lp + log_c), 1);
}

void check_support(LikelihoodKind kind, const Matrix& x) {
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double v = x(i, j);
      bool ok = std::isfinite(v);
      if (kind == LikelihoodKind::bernoulli) ok = ok && (v == 0.0 || v == 1.0);
      if (kind == LikelihoodKind::poisson) ok = ok && v >= 0.0 && v == std::floor(v);
      if (!ok) {
        throw DomainError(to_string(kind) + " likelihood: value " + std::to_string(v) +
                          " outside support at row " + std::to_string(i) + ", column " +
                          std::to_string(j));
      }
    }
  }
}

Var log_prob(const Likelihood& l, const Matrix& x) {
  if (x.rows() != l.natural.rows() || x.cols() != l.natural.cols()) {
    throw DimensionError("log_prob: data " + shape_string(x) + " vs decoder output " +
                         shape_string(l.natural.value()));
  }
  check_support(l.kind, x);
  Tape& t = *l.natural.tape();
  Var xv = t.constant(x);
  switch (l.kind) {
    case LikelihoodKind::bernoulli:
      // x * logit - log(1 + e^logit)
      return sum(mul(xv, l.natural) - softplus(l.natural), 1);
    case LikelihoodKind::poisson: {
      const Matrix lg = x.unaryExpr([](double v) { return std::lgamma(v + 1.0); });
      return sum(mul(xv, l.natural) - exp(l.natural) - t.constant(lg), 1);
    }
    case LikelihoodKind::gaussian_sigmoid_mean: {
      if (!l.log_sigma.valid()) throw ContractError("gaussian likelihood without log_sigma head");
      DiagGaussian g{sigmoid(l.natural), l.log_sigma};
      return gaussian_log_prob(g, xv);
    }
  }
  throw ContractError("unhandled likelihood kind");
}

Var gaussian_log_prob(const DiagGaussian& d, Var z) {
  if (z.rows() != d.mu.rows() || z.cols() != d.mu.cols()) {
    throw DimensionError("gaussian_log_prob: z " + shape_string(z.value()) + " vs mu " +
                         shape_string(d.mu.value()));
  }
  Var scaled = mul(z - d.mu, exp(-d.log_sigma));
  Var terms = -0.5 * square(scaled) - d.log_sigma - kHalfLog2Pi;
  return sum(terms, 1);
}

}  // namespace vfae
