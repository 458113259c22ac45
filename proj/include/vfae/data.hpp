#pragma once

// Tabular datasets: CSV ingestion under a declared schema, deterministic
// splits, preprocessing fitted on the training split, and CSV export.
//
// Schema file (key = value, see KeyValueFile):
//
//   s_column      = sex                  # required, the nuisance column
//   y_column      = income               # optional, the label column
//   numeric       = age, hours           # real-valued features, `*` = all remaining
//   categorical   = workclass, race      # one-hot, vocabulary fitted on train
//   count         = *                    # nonnegative integer counts
//   drop          = fnlwgt               # ignored columns
//   missing       = ?, NA                # tokens treated as missing
//   s_values      = Female, Male         # state order for s (else sorted values over all rows)
//   y_values      = <=50K, >50K          # class order for y (else sorted values over all rows)
//   scale         = none | minmax        # numeric scaling fitted on train
//   binarize      = false                # map every feature to 1[value > 0]
//   count_cap     = 5000                 # keep the most frequent count columns
//   split_column  = split                # optional: train / validation / test per row
//
// Categorical columns gain an extra "<unseen>" indicator that fires for
// values absent from the training vocabulary (and for missing values).
// Missing numeric values are replaced by the training mean; missing counts by
// zero. Missing y marks a row unlabeled; missing s is an error.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vfae/keyvalue.hpp"
#include "vfae/tensor.hpp"

namespace vfae {

enum class Split : std::uint8_t { train = 0, validation = 1, test = 2 };
enum class FeatureKind : std::uint8_t { numeric, categorical, count };

std::string to_string(Split s);
Split parse_split(const std::string& name);
std::string to_string(FeatureKind k);

struct TabularDataset {
  Matrix x;
  std::vector<int> s;
  int s_states = 0;
  /// -1 where the label is missing.
  std::vector<int> y;
  int y_classes = 0;
  std::vector<Split> split;
  std::vector<std::string> feature_names;
  std::vector<FeatureKind> feature_kinds;
  std::vector<std::string> s_values;
  std::vector<std::string> y_values;
  /// Generating latent for synthetic data; empty otherwise.
  Matrix z_true;

  Index rows() const { return x.rows(); }
  Index cols() const { return x.cols(); }
  bool has_labels() const { return y_classes > 0; }
  std::vector<Index> indices(Split part) const;
  TabularDataset subset(std::span<const Index> rows) const;
  Matrix s_one_hot(std::span<const Index> rows) const;
  /// Labels of `rows`, with -1 for missing ones.
  std::vector<int> labels(std::span<const Index> rows) const;
  std::vector<int> nuisance(std::span<const Index> rows) const;
  void validate() const;
};

struct Schema {
  std::string s_column;
  std::string y_column;
  std::vector<std::string> numeric;
  std::vector<std::string> categorical;
  std::vector<std::string> count;
  std::vector<std::string> drop;
  std::vector<std::string> missing{"", "?", "NA", "NaN", "nan"};
  std::vector<std::string> s_values;
  std::vector<std::string> y_values;
  bool minmax = false;
  bool binarize = false;
  Index count_cap = 5000;
  std::string split_column;

  static Schema from_keyvalue(const KeyValueFile& kv);
  static Schema load(const std::filesystem::path& path);
  KeyValueFile to_keyvalue() const;
};

/// How rows are assigned to train / validation / test. Index files hold one
/// zero-based row index per line; when given they take precedence over the
/// fractions (any row not listed in the files is dropped from every split).
struct SplitSpec {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
  std::uint64_t seed = 1;
  std::filesystem::path train_file;
  std::filesystem::path validation_file;
  std::filesystem::path test_file;

  bool uses_files() const;
  void validate() const;
};

/// Seeded partition of `n` rows into the three parts.
std::vector<Split> assign_splits(Index n, const SplitSpec& spec);

/// Row-index list reader for external split files.
std::vector<Index> read_index_file(const std::filesystem::path& path);
void write_index_file(const std::filesystem::path& path, std::span<const Index> rows);

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> line_numbers;

  std::optional<std::size_t> column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& origin = "<string>");
std::string csv_escape(const std::string& field);

TabularDataset load_csv(const std::filesystem::path& path, const Schema& schema, const SplitSpec& splits);
TabularDataset load_csv_table(const CsvTable& table, const Schema& schema, const SplitSpec& splits,
                              const std::string& origin = "<table>");

/// Every feature becomes 1[value > 0]. Idempotent.
TabularDataset binarize(TabularDataset d);
Matrix binarize(const Matrix& x);

/// Writes x (one column per feature), s, y and split as a CSV that loads back
/// to the same matrices under `export_schema(d)`.
void export_dataset_csv(const TabularDataset& d, const std::filesystem::path& path);
Schema export_schema(const TabularDataset& d);

/// Plain numeric matrix CSV with a header row (used by mmd-test).
Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& header = {});

}  // namespace vfae
