#pragma once

// Probe-based measurements of what a representation reveals about s and y,
// plus the group-fairness and domain-distance metrics.
//
//   discrimination       |mean pred over s=0  - mean pred over s=1|, preds in {0, 1}
//   discrimination_prob  same with predicted probabilities of the positive class
//   PAD                  2 (1 - 2 eps) for domain-classifier test error eps, >= 0
//
// Reports serialize to JSON (schema "vfae-eval-report", version 1):
//   { schema, version, provenance {model_id, mode, seed}, dataset, train_rows,
//     test_rows, probes [ {kind, target, accuracy, per_class_accuracy, chance,
//     train_rows, test_rows} ], chance_s, chance_y, y_accuracy,
//     discrimination, discrimination_prob, proxy_a_distance }
// Metrics that do not apply (e.g. discrimination for non-binary s) are null.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vfae/data.hpp"
#include "vfae/model.hpp"
#include "vfae/probes.hpp"

namespace vfae {

struct Provenance {
  std::string model_id;
  SampleMode mode = SampleMode::sample;
  std::uint64_t seed = 0;
};

struct EmbeddingSet {
  Matrix z;
  std::vector<int> s;
  /// Empty when labels are absent; -1 marks a missing label.
  std::vector<int> y;
  int s_states = 0;
  int y_classes = 0;
  Provenance provenance;

  Index rows() const { return z.rows(); }
  bool has_y() const { return !y.empty(); }
  void validate() const;
};

/// z1 embeddings of one split of `d`.
EmbeddingSet embed_split(const VfaeModel& model, const TabularDataset& d, Split part, SampleMode mode,
                         std::uint64_t seed, const std::string& model_id);
/// The raw features of one split, as an embedding (baseline).
EmbeddingSet features_as_embedding(const TabularDataset& d, Split part, const std::string& model_id = "raw-x");

/// CSV with header z_0..z_{d-1}, s, y (blank y when absent or missing) and a
/// key = value sidecar at `<path>.provenance`.
void export_embeddings(const EmbeddingSet& e, const std::filesystem::path& path);
EmbeddingSet import_embeddings(const std::filesystem::path& path);
std::filesystem::path provenance_path(const std::filesystem::path& csv);

enum class ProbeKind { linear, nonlinear };
enum class ProbeTarget { s, y };
std::string to_string(ProbeKind k);
std::string to_string(ProbeTarget t);

struct ProbeReport {
  ProbeKind kind = ProbeKind::linear;
  ProbeTarget target = ProbeTarget::s;
  double accuracy = 0;
  std::vector<double> per_class_accuracy;
  /// Majority-class share of the same test rows.
  double chance = 0;
  Index train_rows = 0;
  Index test_rows = 0;
};

/// Fits a probe for `target` on `train` and scores it on `test`. Rows with a
/// missing target are skipped.
ProbeReport run_probe(ProbeKind kind, ProbeTarget target, const EmbeddingSet& train, const EmbeddingSet& test,
                      const MlpProbeConfig& mlp = {});

double chance_accuracy(std::span<const int> labels);
double discrimination(std::span<const int> predictions, std::span<const int> s);
double discrimination_prob(std::span<const double> probabilities, std::span<const int> s);
double pad_from_error(double error);
/// Rows labelled by origin, split 50/50 with `seed`, linear domain classifier.
double proxy_a_distance(const EmbeddingSet& source, const EmbeddingSet& target, std::uint64_t seed = 1);

struct EvalConfig {
  SampleMode mode = SampleMode::sample;
  std::uint64_t seed = 1;
  std::string model_id = "model";
  std::string dataset = "dataset";
  bool nonlinear_probe = true;
  /// PAD between the s = 0 and s = 1 test embeddings (binary s only).
  bool proxy_a_distance = false;
  MlpProbeConfig mlp;
};

struct EvaluationReport {
  Provenance provenance;
  std::string dataset;
  Index train_rows = 0;
  Index test_rows = 0;
  std::vector<ProbeReport> probes;
  double chance_s = 0;
  std::optional<double> chance_y;
  /// Accuracy of the model's own q(y | z1); absent for raw-feature baselines.
  std::optional<double> y_accuracy;
  std::optional<double> discrimination;
  std::optional<double> discrimination_prob;
  std::optional<double> proxy_a_distance;

  const ProbeReport* find(ProbeKind kind, ProbeTarget target) const;
  std::string to_json() const;
  std::string to_table() const;
};

/// Probes and metrics for a train / test pair of embeddings.
EvaluationReport evaluate_embeddings(const EmbeddingSet& train, const EmbeddingSet& test, const EvalConfig& cfg);

/// Embeds train and test splits with `model` and evaluates them; y accuracy
/// comes from q(y | z1) on the test split.
EvaluationReport evaluate_model(const VfaeModel& model, const TabularDataset& d, const EvalConfig& cfg);

}  // namespace vfae
