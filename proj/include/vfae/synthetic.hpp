#pragma once

// Synthetic fair-classification data with a known nuisance signal.
//
//   z ~ N(0, I_latent),  s ~ Categorical(s_weights)  (independent of z)
//   y0 = argmax_c  direction_c . z
//   y  = s mod C (or its mirror when correlation < 0) with probability |correlation|, else y0
//   x  = latent_scale * A z + shift_s + noise * eps
//
// A has orthonormal columns and, unless explicit shifts are given, shift_k =
// shift * q_k for orthonormal q_k orthogonal to the range of A. For balanced
// binary s and y the correlation between s and y equals `correlation`.

#include <cstdint>

#include "vfae/data.hpp"

namespace vfae {

struct SyntheticSpec {
  Index latent_dim = 2;
  Index data_dim = 8;
  int s_groups = 2;
  /// Group weights; empty means uniform.
  std::vector<double> s_weights;
  int y_classes = 2;
  double correlation = 0.0;
  double shift = 2.0;
  double noise = 1.0;
  double latent_scale = 4.0;
  Index samples = 2000;
  std::uint64_t seed = 1;
  /// Optional explicit s->shift map (s_groups x data_dim) and y->direction map
  /// (y_classes x latent_dim). Empty means generated from the seed.
  Matrix shifts;
  Matrix directions;
  /// Min-max scale features to [0, 1] using training rows.
  bool unit_scale = true;
  /// Fractions only; the split seed is derived from `seed`.
  SplitSpec splits;

  void validate() const;
};

TabularDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace vfae
