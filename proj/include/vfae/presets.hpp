#pragma once

// Named configurations for the five reference experiments. A preset is a
// list of config keys; it is applied below config files and flags.
//
//   adult    Bernoulli on binarized features, 100 hidden units, 50-D latents, alpha 1
//   german   Bernoulli on binarized features, 60 hidden units, 30-D latents, alpha 1
//   health   Bernoulli on binarized features, 300 units (z1 encoder, x decoder),
//            150 units (z2 encoder, z1 decoder), 50-D latents, alpha 1
//   amazon   Poisson on counts, 500 / 300 units, 50-D latents, half-source /
//            half-target batches, alpha = 100 (Ns + Nt) / Ns, beta = 100
//   yaleb    Gaussian with sigmoid means, 400 / 100 units, 50-D latents,
//            alpha 200, beta 200
//
// The loss already multiplies the MMD penalty by the batch size, so a total
// MMD scale of c * N_batch is expressed as beta = c.

#include <string>
#include <utility>
#include <vector>

namespace vfae {

struct Preset {
  std::string name;
  std::string description;
  std::vector<std::pair<std::string, std::string>> values;
  /// alpha is derived as alpha_per_labeled / train.labeled_fraction unless
  /// set explicitly (0 = not derived).
  double alpha_per_labeled = 0.0;
};

const std::vector<Preset>& presets();
/// nullptr when no preset has that name.
const Preset* find_preset(const std::string& name);

}  // namespace vfae
