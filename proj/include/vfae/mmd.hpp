#pragma once

// Maximum Mean Discrepancy between two samples under the Gaussian kernel
// k(x, x') = exp(-gamma * |x - x'|^2).
//
// mmd_exact is the biased V-statistic (diagonal terms included). The
// random-feature path replaces the Gram matrices with the squared distance
// between mean feature vectors, which is linear in the sample size.
//
// Bandwidth convention of the random features:
//   standard  psi(x) = sqrt(2/D) cos(sqrt(2 gamma) x W + b)
//             E<psi(x), psi(x')> = exp(-gamma |x - x'|^2)
//   paper     psi(x) = sqrt(2/D) cos(sqrt(2 / gamma) x W + b)
//             E<psi(x), psi(x')> = exp(-|x - x'|^2 / gamma)
// The two agree only at gamma = 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>

#include "vfae/tensor.hpp"

namespace vfae {

struct GaussianKernel {
  double gamma;

  explicit GaussianKernel(double g) : gamma(g) {
    if (!(g > 0.0) || !std::isfinite(g)) throw ContractError("GaussianKernel: gamma must be > 0");
  }
};

enum class RffConvention { standard, paper };

std::string to_string(RffConvention c);
RffConvention parse_rff_convention(const std::string& name);

inline constexpr Index kDefaultRffFeatures = 500;

/// Pairwise squared Euclidean distances between rows of `a` and rows of `b`.
template <typename DA, typename DB>
Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, Eigen::Dynamic> squared_distances(
    const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (a.cols() != b.cols()) {
    throw DimensionError("squared_distances: widths " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.cols()));
  }
  const Mat ae = a;
  const Mat be = b;
  const auto an = ae.rowwise().squaredNorm();
  const auto bn = be.rowwise().squaredNorm();
  Mat d = (Scalar(-2) * (ae * be.transpose())).eval();
  d.colwise() += an;
  d.rowwise() += bn.transpose();
  return d.cwiseMax(Scalar(0));
}

template <typename DA, typename DB>
Eigen::Matrix<typename DA::Scalar, Eigen::Dynamic, Eigen::Dynamic> gaussian_gram(
    const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b, const GaussianKernel& k) {
  return (-k.gamma * squared_distances(a, b).array()).exp().matrix();
}

/// Biased MMD estimate; zero for identical samples and never negative.
template <typename DA, typename DB>
typename DA::Scalar mmd_exact(const Eigen::MatrixBase<DA>& x, const Eigen::MatrixBase<DB>& y,
                              const GaussianKernel& k) {
  using Scalar = typename DA::Scalar;
  if (x.rows() < 1 || y.rows() < 1) throw ContractError("mmd_exact: empty sample");
  if (x.cols() != y.cols()) {
    throw ContractError("mmd_exact: dimension mismatch " + std::to_string(x.cols()) + " vs " +
                        std::to_string(y.cols()));
  }
  const Scalar n0 = static_cast<Scalar>(x.rows());
  const Scalar n1 = static_cast<Scalar>(y.rows());
  const Scalar kxx = gaussian_gram(x, x, k).sum() / (n0 * n0);
  const Scalar kyy = gaussian_gram(y, y, k).sum() / (n1 * n1);
  const Scalar kxy = gaussian_gram(x, y, k).sum() / (n0 * n1);
  return std::max(Scalar(0), kxx + kyy - Scalar(2) * kxy);
}

/// 1 / (2 * median pairwise squared distance) over distinct row pairs.
double median_heuristic_gamma(const Matrix& z);

/// Fixed random projection for random Fourier features. W is K x D with
/// standard normal entries, b is uniform on [0, 2 pi]. Both are drawn once
/// from `seed` and never change.
class RffProjection {
 public:
  RffProjection(Index input_dim, Index features, double gamma, std::uint64_t seed,
                RffConvention convention = RffConvention::standard);

  Index input_dim() const { return weights_.rows(); }
  Index features() const { return weights_.cols(); }
  double gamma() const { return gamma_; }
  RffConvention convention() const { return convention_; }
  const Matrix& weights() const { return weights_; }
  const RowVector& offsets() const { return offsets_; }

  /// Multiplier applied to x W before the offset.
  double input_scale() const;
  /// Kernel whose value the feature inner product estimates.
  GaussianKernel approximated_kernel() const;

 private:
  Matrix weights_;
  RowVector offsets_;
  double gamma_;
  RffConvention convention_;
};

/// psi(X) for a plain matrix; every entry lies in [-sqrt(2/D), sqrt(2/D)].
Matrix rff_features(const Matrix& x, const RffProjection& p);

/// |mean psi(X) - mean psi(X')|^2 for plain matrices.
double mmd_rff(const Matrix& x, const Matrix& y, const RffProjection& p);

// Differentiable versions.
Var rff_features(Var x, const RffProjection& p);
Var mmd_rff(Var x, Var y, const RffProjection& p);

/// MMD penalty over the groups given by `groups` (values 0..num_groups-1).
/// Two groups: MMD between them. More groups: sum over k of MMD(group k, all
/// rows). A group with no rows contributes zero. Returns a 1x1 Var.
Var mmd_penalty(Var z, std::span<const int> groups, int num_groups, const RffProjection& p);

}  // namespace vfae
