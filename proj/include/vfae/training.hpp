#pragma once

// Minibatch training of VfaeModel with Adam, parameter averaging, early
// stopping on a validation objective, and validation-driven choice of beta.
//
// Training log (one row per epoch, per-row averages over that epoch's
// minibatches; epoch 0 is evaluated before any update):
//   epoch, total, reconstruction, kl_z2, kl_y, classification, mmd,
//   val_y_accuracy, z1_regularizer, val_objective

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vfae/data.hpp"
#include "vfae/model.hpp"
#include "vfae/optim.hpp"

namespace vfae {

enum class ModelKind { vfae, unsupervised };

std::string to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& name);

struct TrainConfig {
  int epochs = 100;
  Index batch_size = 100;
  std::uint64_t seed = 1;
  Objective objective;
  bool stratify_by_s = true;
  /// Share of labeled rows in each batch when both labeled and unlabeled
  /// rows are available.
  double labeled_fraction = 0.5;
  /// Rows whose s equals this value are treated as unlabeled (target domain).
  int unlabeled_domain = -1;
  std::vector<double> beta_grid{0.0, 1.0, 10.0, 100.0};
  /// Epochs without validation improvement before stopping; 0 disables.
  int patience = 10;
  double averaging_decay = 0.999;
  AdamConfig adam;
  Index rff_features = kDefaultRffFeatures;
  RffConvention rff_convention = RffConvention::standard;
  /// Kernel bandwidth; 0 picks the median heuristic on initial z1 samples.
  double gamma = 0.0;
  ModelKind model_kind = ModelKind::vfae;
  int workers = 1;
  bool check_finite = true;

  void validate() const;
  void write(KeyValueFile& kv) const;
  /// Keys absent from `kv` keep their defaults.
  static TrainConfig read(const KeyValueFile& kv);
};

/// Rows of the dataset that count as labeled under `cfg`.
bool row_is_labeled(const TabularDataset& d, Index row, const TrainConfig& cfg);

/// Epoch plan over `rows`. A single pool of rows is partitioned; when both
/// labeled and unlabeled rows exist and labeled_fraction is in (0, 1), each
/// batch mixes round(B * f) labeled with the remaining unlabeled rows, the
/// smaller pool being reshuffled and reused as needed. With stratify_by_s
/// every batch holds each s group in proportion, within one row.
std::vector<std::vector<Index>> make_batches(const TabularDataset& d, std::span<const Index> rows,
                                             const TrainConfig& cfg, std::uint64_t epoch_seed);

Batch to_batch(const TabularDataset& d, std::span<const Index> rows, const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double total = 0;
  double reconstruction = 0;
  double kl_z2 = 0;
  double kl_y = 0;
  double classification = 0;
  double mmd = 0;
  double val_y_accuracy = 0;
  double z1_regularizer = 0;
  double val_objective = 0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;

  std::string to_csv() const;
  void save(const std::filesystem::path& path) const;
};

struct TrainResult {
  ParameterStore final_params;
  ParameterStore averaged_params;
  /// Averaged parameters at the epoch with the best validation objective
  /// (the final averaged parameters when there is no validation split).
  ParameterStore best_params;
  int best_epoch = 0;
  bool stopped_early = false;
  double gamma = 0;
  TrainLog log;
};

/// Loss went non-finite. Carries the parameters before the failing step.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, ParameterStore last_good, int epoch)
      : std::runtime_error(what), last_good_(std::move(last_good)), epoch_(epoch) {}
  const ParameterStore& last_good() const { return last_good_; }
  int epoch() const { return epoch_; }

 private:
  ParameterStore last_good_;
  int epoch_;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains on the train split. `model.params()` holds the final raw values on
/// return.
TrainResult train(VfaeModel& model, const TabularDataset& d, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// RFF projection used by train for this model, data and config.
RffProjection make_rff(const VfaeModel& model, const TabularDataset& d, const TrainConfig& cfg);

/// Per-row loss parts of `rows` under fixed noise, in chunks of `chunk`
/// rows. Only the loss columns of the returned row are filled.
EpochLog mean_loss(const VfaeModel& model, const TabularDataset& d, std::span<const Index> rows,
                        const TrainConfig& cfg, const RffProjection* rff, std::uint64_t noise_seed,
                        Index chunk = 1000);

struct BetaRow {
  double beta = 0;
  double val_y_accuracy = 0;
  double probe_s_accuracy = 0;
  double chance_s = 0;
  double score = 0;
  int best_epoch = 0;
};

struct BetaSelection {
  double best_beta = 0;
  std::size_t best_index = 0;
  std::vector<BetaRow> rows;
  TrainResult best;

  std::string to_csv() const;
};

/// Trains one model per beta on the train split, scores each on validation
/// as y-accuracy - max(0, probe-s accuracy - chance), where the linear s-probe
/// is fit on train embeddings and scored on validation embeddings. Grid
/// points run on up to `cfg.workers` threads, each with a seed derived from
/// cfg.seed and its grid index.
BetaSelection select_beta(const std::function<VfaeModel()>& factory, const TabularDataset& d,
                          const std::vector<double>& grid, const TrainConfig& cfg);

/// Validation-style scores of a parameter set.
double y_accuracy(const VfaeModel& model, const TabularDataset& d, std::span<const Index> rows, SampleMode mode,
                  std::uint64_t noise_seed);

}  // namespace vfae
