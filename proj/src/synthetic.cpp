#include "vfae/synthetic.hpp"

#include <Eigen/QR>
#include <cmath>
#include <numeric>

#include "vfae/distributions.hpp"
#include "vfae/errors.hpp"
#include "vfae/random.hpp"

namespace vfae {

void SyntheticSpec::validate() const {
  std::vector<std::string> problems;
  if (latent_dim < 1) problems.push_back("latent_dim must be >= 1");
  if (s_groups < 1) problems.push_back("s_groups must be >= 1");
  if (y_classes < 1) problems.push_back("y_classes must be >= 1");
  if (samples < 1) problems.push_back("samples must be >= 1");
  if (!(correlation >= -1.0 && correlation <= 1.0)) problems.push_back("correlation must lie in [-1, 1]");
  if (!(noise >= 0.0)) problems.push_back("noise must be >= 0");
  if (shifts.size() == 0 && data_dim < latent_dim + s_groups) {
    problems.push_back("data_dim must be >= latent_dim + s_groups when shifts are generated");
  }
  if (shifts.size() == 0 && data_dim < latent_dim) problems.push_back("data_dim must be >= latent_dim");
  if (shifts.size() > 0 && (shifts.rows() != s_groups || shifts.cols() != data_dim)) {
    problems.push_back("shifts must be s_groups x data_dim");
  }
  if (directions.size() > 0 && (directions.rows() != y_classes || directions.cols() != latent_dim)) {
    problems.push_back("directions must be y_classes x latent_dim");
  }
  if (!s_weights.empty()) {
    if (static_cast<int>(s_weights.size()) != s_groups) problems.push_back("s_weights needs one entry per group");
    for (double w : s_weights)
      if (!(w >= 0.0)) problems.push_back("s_weights must be nonnegative");
    if (std::accumulate(s_weights.begin(), s_weights.end(), 0.0) <= 0.0) problems.push_back("s_weights must not all be zero");
  }
  if (!problems.empty()) {
    std::string msg = "invalid synthetic spec:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ContractError(msg);
  }
}

TabularDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Index n = spec.samples, d = spec.data_dim, l = spec.latent_dim;
  const int K = spec.s_groups, C = spec.y_classes;

  NoiseSource geometry(derive_seed(spec.seed, "synthetic.geometry"));
  const Matrix q = Eigen::HouseholderQR<Matrix>(geometry.standard_normal(d, d)).householderQ() * Matrix::Identity(d, d);
  const Matrix a = q.leftCols(l);
  const Matrix shifts = spec.shifts.size() > 0 ? spec.shifts : Matrix(spec.shift * q.middleCols(l, K).transpose());
  Matrix directions = spec.directions;
  if (directions.size() == 0) {
    directions = geometry.standard_normal(C, l);
    if (C == 2) directions.row(0) = -directions.row(1);
  }

  NoiseSource draws(derive_seed(spec.seed, "synthetic.rows"));
  TabularDataset out;
  out.z_true = draws.standard_normal(n, l);
  const Matrix eps = draws.standard_normal(n, d);
  const Matrix u = draws.uniform(n, 2, 0.0, 1.0);

  std::vector<double> cumulative(static_cast<std::size_t>(K));
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    total += spec.s_weights.empty() ? 1.0 : spec.s_weights[static_cast<std::size_t>(k)];
    cumulative[static_cast<std::size_t>(k)] = total;
  }

  out.x = spec.latent_scale * out.z_true * a.transpose() + spec.noise * eps;
  const Matrix scores = out.z_true * directions.transpose();
  for (Index i = 0; i < n; ++i) {
    int s = K - 1;
    for (int k = 0; k < K; ++k)
      if (u(i, 0) * total < cumulative[static_cast<std::size_t>(k)]) {
        s = k;
        break;
      }
    Index y0 = 0;
    scores.row(i).maxCoeff(&y0);
    int y = static_cast<int>(y0);
    if (u(i, 1) < std::abs(spec.correlation)) {
      y = s % C;
      if (spec.correlation < 0) y = C - 1 - y;
    }
    out.x.row(i) += shifts.row(s);
    out.s.push_back(s);
    out.y.push_back(y);
  }

  out.s_states = K;
  out.y_classes = C;
  for (int k = 0; k < K; ++k) out.s_values.push_back(std::to_string(k));
  for (int c = 0; c < C; ++c) out.y_values.push_back(std::to_string(c));
  for (Index j = 0; j < d; ++j) {
    out.feature_names.push_back("x" + std::to_string(j));
    out.feature_kinds.push_back(FeatureKind::numeric);
  }
  SplitSpec splits = spec.splits;
  splits.seed = derive_seed(spec.seed, "synthetic.splits", splits.seed);
  out.split = assign_splits(n, splits);

  if (spec.unit_scale) {
    const auto train = out.indices(Split::train);
    for (Index j = 0; j < d; ++j) {
      double lo = INFINITY, hi = -INFINITY;
      for (Index r : train) {
        lo = std::min(lo, out.x(r, j));
        hi = std::max(hi, out.x(r, j));
      }
      if (!std::isfinite(lo)) continue;
      out.x.col(j) = (out.x.col(j).array() - lo) / (hi > lo ? hi - lo : 1.0);
    }
  }
  out.validate();
  return out;
}

}  // namespace vfae
