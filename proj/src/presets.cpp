#include "vfae/presets.hpp"

namespace vfae {

namespace {

std::vector<Preset> build() {
  std::vector<Preset> out;

  const auto fair = [](std::string name, std::string description, std::string z1_hidden, std::string z2_hidden,
                       std::string latent) {
    Preset p;
    p.name = std::move(name);
    p.description = std::move(description);
    p.values = {
        {"data.binarize", "true"},
        {"model.likelihood", "bernoulli"},
        {"model.encoder_z1_hidden", z1_hidden},
        {"model.decoder_x_hidden", z1_hidden},
        {"model.encoder_z2_hidden", z2_hidden},
        {"model.decoder_z1_hidden", z2_hidden},
        {"model.z1_dim", latent},
        {"model.z2_dim", latent},
        {"train.alpha", "1"},
        {"train.beta", "100"},
        {"train.beta_grid", "10, 100, 1000"},
        {"train.batch_size", "100"},
    };
    return p;
  };

  out.push_back(fair("adult", "Adult income, s = age", "100", "100", "50"));
  out.push_back(fair("german", "German credit, s = gender", "60", "60", "30"));
  out.push_back(fair("health", "Heritage Health, s = age", "300", "150", "50"));

  Preset amazon;
  amazon.name = "amazon";
  amazon.description = "Amazon reviews domain adaptation; set data.source_domain and data.target_domain";
  amazon.values = {
      {"data.binarize", "false"},
      {"model.likelihood", "poisson"},
      {"model.encoder_z1_hidden", "500"},
      {"model.decoder_x_hidden", "500"},
      {"model.encoder_z2_hidden", "300"},
      {"model.decoder_z1_hidden", "300"},
      {"model.z1_dim", "50"},
      {"model.z2_dim", "50"},
      {"train.beta", "100"},
      {"train.labeled_fraction", "0.5"},
      {"train.stratify_by_s", "false"},
      {"train.batch_size", "100"},
  };
  amazon.alpha_per_labeled = 100.0;
  out.push_back(amazon);

  Preset yaleb;
  yaleb.name = "yaleb";
  yaleb.description = "Extended Yale B, s = lighting direction (5 states), y = identity";
  yaleb.values = {
      {"data.binarize", "false"},
      {"model.likelihood", "gaussian"},
      {"model.encoder_z1_hidden", "400"},
      {"model.decoder_x_hidden", "400"},
      {"model.encoder_z2_hidden", "100"},
      {"model.decoder_z1_hidden", "100"},
      {"model.z1_dim", "50"},
      {"model.z2_dim", "50"},
      {"train.alpha", "200"},
      {"train.beta", "200"},
      {"train.batch_size", "100"},
  };
  out.push_back(yaleb);
  return out;
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = build();
  return all;
}

const Preset* find_preset(const std::string& name) {
  for (const Preset& p : presets())
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace vfae
