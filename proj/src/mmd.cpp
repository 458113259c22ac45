#include "vfae/mmd.hpp"

#include <numbers>
#include <random>
#include <vector>

namespace vfae {

std::string to_string(RffConvention c) {
  return c == RffConvention::standard ? "standard" : "paper";
}

RffConvention parse_rff_convention(const std::string& name) {
  if (name == "standard") return RffConvention::standard;
  if (name == "paper") return RffConvention::paper;
  throw ContractError("unknown rff convention '" + name + "' (standard, paper)");
}

double median_heuristic_gamma(const Matrix& z) {
  if (z.rows() < 2) throw ContractError("median heuristic needs at least two rows");
  const Matrix d = squared_distances(z, z);
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(z.rows() * (z.rows() - 1) / 2));
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = i + 1; j < z.rows(); ++j) v.push_back(d(i, j));
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double med = *mid;
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), mid);
    med = 0.5 * (med + lower);
  }
  if (!(med > 0.0)) throw ContractError("median heuristic: all rows coincide");
  return 1.0 / (2.0 * med);
}

RffProjection::RffProjection(Index input_dim, Index features, double gamma, std::uint64_t seed,
                             RffConvention convention)
    : gamma_(gamma), convention_(convention) {
  if (input_dim < 1) throw ContractError("RffProjection: input dimension must be >= 1");
  if (features < 1) throw ContractError("RffProjection: feature count must be >= 1");
  GaussianKernel check(gamma);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  weights_.resize(input_dim, features);
  for (Index i = 0; i < input_dim; ++i)
    for (Index j = 0; j < features; ++j) weights_(i, j) = normal(rng);
  offsets_.resize(features);
  for (Index j = 0; j < features; ++j) offsets_(j) = uniform(rng);
}

double RffProjection::input_scale() const {
  return convention_ == RffConvention::standard ? std::sqrt(2.0 * gamma_) : std::sqrt(2.0 / gamma_);
}

GaussianKernel RffProjection::approximated_kernel() const {
  return GaussianKernel(convention_ == RffConvention::standard ? gamma_ : 1.0 / gamma_);
}

namespace {

void check_width(Index cols, const RffProjection& p, const char* op) {
  if (cols != p.input_dim()) {
    throw ContractError(std::string(op) + ": input width " + std::to_string(cols) +
                        " does not match projection input dimension " +
                        std::to_string(p.input_dim()));
  }
}

}  // namespace

Matrix rff_features(const Matrix& x, const RffProjection& p) {
  check_width(x.cols(), p, "rff_features");
  Matrix arg = p.input_scale() * (x * p.weights());
  arg.rowwise() += p.offsets();
  const double amp = std::sqrt(2.0 / static_cast<double>(p.features()));
  return amp * arg.array().cos().matrix();
}

double mmd_rff(const Matrix& x, const Matrix& y, const RffProjection& p) {
  if (x.rows() < 1 || y.rows() < 1) throw ContractError("mmd_rff: empty sample");
  const RowVector mx = rff_features(x, p).colwise().mean();
  const RowVector my = rff_features(y, p).colwise().mean();
  return (mx - my).squaredNorm();
}

Var rff_features(Var x, const RffProjection& p) {
  check_width(x.cols(), p, "rff_features");
  Tape& t = *x.tape();
  Var arg = add(scale(matmul(x, t.constant(p.weights())), p.input_scale()),
                t.constant(p.offsets()));
  return scale(cos(arg), std::sqrt(2.0 / static_cast<double>(p.features())));
}

Var mmd_rff(Var x, Var y, const RffProjection& p) {
  if (x.rows() < 1 || y.rows() < 1) throw ContractError("mmd_rff: empty sample");
  Var diff = mean(rff_features(x, p), 0) - mean(rff_features(y, p), 0);
  return sum(square(diff));
}

Var mmd_penalty(Var z, std::span<const int> groups, int num_groups, const RffProjection& p) {
  Tape& t = *z.tape();
  const Index n = z.rows();
  if (static_cast<Index>(groups.size()) != n) {
    throw DimensionError("mmd_penalty: " + std::to_string(groups.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  std::vector<Index> counts(static_cast<std::size_t>(std::max(num_groups, 0)), 0);
  for (int g : groups) {
    if (g < 0 || g >= num_groups) throw ContractError("mmd_penalty: group label out of range");
    ++counts[static_cast<std::size_t>(g)];
  }
  if (num_groups < 2 || n == 0) return t.scalar(0.0);

  // Row k of `avg` averages the rows of group k; the last row averages all.
  Matrix avg = Matrix::Zero(num_groups + 1, n);
  for (Index i = 0; i < n; ++i) {
    const int g = groups[static_cast<std::size_t>(i)];
    avg(g, i) = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(g)]);
    avg(num_groups, i) = 1.0 / static_cast<double>(n);
  }
  Var means = matmul(t.constant(avg), rff_features(z, p));

  auto row_gap = [&](Index a, Index b) {
    Matrix sel = Matrix::Zero(1, num_groups + 1);
    sel(0, a) = 1.0;
    sel(0, b) = -1.0;
    return sum(square(matmul(t.constant(sel), means)));
  };

  if (num_groups == 2) {
    if (counts[0] == 0 || counts[1] == 0) return t.scalar(0.0);
    return row_gap(0, 1);
  }
  Var total = t.scalar(0.0);
  for (int k = 0; k < num_groups; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) continue;
    total = total + row_gap(k, num_groups);
  }
  return total;
}

}  // namespace vfae
