#pragma once

// Command-line front end.
//
//   vfae train        --data x.csv --schema s.txt --preset adult --out runs/a
//   vfae select-beta  --synthetic --grid 0,100,1000 --out runs/b
//   vfae evaluate     --run runs/a [--checkpoint other.txt] [--baseline raw-x]
//   vfae embed        --run runs/a --split test --mode mean --out z.csv
//   vfae mmd-test     a.csv b.csv [--features 500] [--convention paper]
//
// Settings are flat `key = value` pairs resolved in layers, later layers
// winning: built-in defaults, preset, config file (--config), flags (named
// flags and --set key=value). The resolved file written to the run directory
// records the layer of every value in a trailing comment.
//
// Keys:
//   run.preset
//   data.source            csv | synthetic
//   data.path, data.schema, data.binarize
//   data.train_file, data.validation_file, data.test_file
//   data.train_fraction, data.validation_fraction, data.test_fraction, data.split_seed
//   data.source_domain, data.target_domain   keep two s values; target rows are unlabeled
//   synthetic.*            see SyntheticSpec
//   model.*                see ModelConfig; x_dim, s_dim, y_dim = auto take the data's
//   train.*                see TrainConfig
//   eval.mode, eval.seed, eval.nonlinear_probe, eval.proxy_a_distance
//
// A run directory holds config.txt, checkpoint.txt (averaged parameters at
// the best validation epoch), final.txt (raw parameters after the last
// step), train_log.csv and, after evaluate, report.json and report.txt.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 numerical
// divergence, 3 file-system or parse error.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vfae/data.hpp"
#include "vfae/evaluation.hpp"
#include "vfae/keyvalue.hpp"
#include "vfae/model.hpp"
#include "vfae/training.hpp"

namespace vfae::cli {

enum ExitCode : int { kOk = 0, kInvalid = 1, kDivergence = 2, kIo = 3 };

/// Several configuration problems at once.
class ConfigError : public ContractError {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct Setting {
  std::string value;
  std::string source;
};

class RunConfig {
 public:
  /// Every known key at its built-in default.
  static RunConfig defaults();

  /// Layers `kv` on top. Unknown keys are not applied; validate reports them.
  void apply(const KeyValueFile& kv, const std::string& source);
  void set(const std::string& key, const std::string& value, const std::string& source);

  bool known(const std::string& key) const { return settings_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  const std::string& source(const std::string& key) const;
  const std::map<std::string, Setting>& settings() const { return settings_; }

  /// Throws ConfigError listing every invalid value and unknown key.
  void validate() const;

  TrainConfig train() const;
  EvalConfig eval() const;
  /// Architecture with data-dependent sizes filled from `d`.
  ModelConfig model(const TabularDataset& d) const;

  KeyValueFile to_keyvalue() const;

 private:
  std::map<std::string, Setting> settings_;
  std::vector<std::string> unknown_;
};

/// Layers defaults, the named preset (or the one named by run.preset in a
/// layer above), `file` and `flags`.
RunConfig resolve(const std::optional<std::string>& preset, const std::optional<KeyValueFile>& file,
                  const std::string& file_source, const KeyValueFile& flags);

/// Loads or generates the dataset the configuration describes.
TabularDataset load_data(const RunConfig& cfg);

/// Problems that make the likelihood unusable on `d` (e.g. non-binary
/// features under a Bernoulli decoder); empty when compatible.
std::vector<std::string> likelihood_problems(const ModelConfig& m, const TabularDataset& d);

/// Lines of the form "- name RxC" / "+ name RxC" for parameters whose names
/// or shapes differ; empty when the stores agree.
std::vector<std::string> store_diff(const ParameterStore& expected, const ParameterStore& found);

/// Entry point; returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vfae::cli
