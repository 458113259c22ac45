#include "vfae/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "vfae/errors.hpp"
#include "vfae/random.hpp"

namespace vfae {

namespace {

constexpr const char* kUnseen = "<unseen>";

std::string at_line(const std::string& origin, long line) {
  return origin + ":" + std::to_string(line) + ": ";
}

std::vector<std::string> list_value(const KeyValueFile& kv, const std::string& key) {
  std::vector<std::string> out;
  const auto v = kv.get(key);
  if (!v || trim(*v).empty()) return out;
  for (const auto& part : split(*v, ',')) {
    const std::string t = trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool parse_number(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  const std::string t = trim(name);
  if (t == "train") return Split::train;
  if (t == "validation" || t == "valid" || t == "val") return Split::validation;
  if (t == "test") return Split::test;
  throw ContractError("unknown split '" + name + "' (train, validation, test)");
}

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::numeric: return "numeric";
    case FeatureKind::categorical: return "categorical";
    case FeatureKind::count: return "count";
  }
  return "?";
}

// ---- dataset ----------------------------------------------------------------

std::vector<Index> TabularDataset::indices(Split part) const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == part) out.push_back(static_cast<Index>(i));
  return out;
}

TabularDataset TabularDataset::subset(std::span<const Index> rows_) const {
  TabularDataset d;
  d.x.resize(static_cast<Index>(rows_.size()), x.cols());
  if (z_true.size() > 0) d.z_true.resize(static_cast<Index>(rows_.size()), z_true.cols());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const Index r = rows_[i];
    if (r < 0 || r >= rows()) throw ContractError("subset: row " + std::to_string(r) + " out of range");
    d.x.row(static_cast<Index>(i)) = x.row(r);
    if (z_true.size() > 0) d.z_true.row(static_cast<Index>(i)) = z_true.row(r);
    d.s.push_back(s[static_cast<std::size_t>(r)]);
    d.y.push_back(y[static_cast<std::size_t>(r)]);
    d.split.push_back(split[static_cast<std::size_t>(r)]);
  }
  d.s_states = s_states;
  d.y_classes = y_classes;
  d.feature_names = feature_names;
  d.feature_kinds = feature_kinds;
  d.s_values = s_values;
  d.y_values = y_values;
  return d;
}

Matrix TabularDataset::s_one_hot(std::span<const Index> rows_) const {
  Matrix m = Matrix::Zero(static_cast<Index>(rows_.size()), s_states);
  for (std::size_t i = 0; i < rows_.size(); ++i) m(static_cast<Index>(i), s[static_cast<std::size_t>(rows_[i])]) = 1.0;
  return m;
}

std::vector<int> TabularDataset::labels(std::span<const Index> rows_) const {
  std::vector<int> out;
  out.reserve(rows_.size());
  for (Index r : rows_) out.push_back(y[static_cast<std::size_t>(r)]);
  return out;
}

std::vector<int> TabularDataset::nuisance(std::span<const Index> rows_) const {
  std::vector<int> out;
  out.reserve(rows_.size());
  for (Index r : rows_) out.push_back(s[static_cast<std::size_t>(r)]);
  return out;
}

void TabularDataset::validate() const {
  const auto n = static_cast<std::size_t>(rows());
  std::vector<std::string> problems;
  if (s.size() != n) problems.push_back("s has " + std::to_string(s.size()) + " entries for " + std::to_string(n) + " rows");
  if (y.size() != n) problems.push_back("y has " + std::to_string(y.size()) + " entries for " + std::to_string(n) + " rows");
  if (split.size() != n) problems.push_back("split has " + std::to_string(split.size()) + " entries");
  if (static_cast<Index>(feature_names.size()) != cols()) problems.push_back("feature name count differs from columns");
  if (s_states < 1) problems.push_back("s_states must be >= 1");
  for (int v : s)
    if (v < 0 || v >= s_states) {
      problems.push_back("s value " + std::to_string(v) + " outside [0, " + std::to_string(s_states) + ")");
      break;
    }
  for (int v : y)
    if (v < -1 || v >= y_classes) {
      problems.push_back("y value " + std::to_string(v) + " outside [-1, " + std::to_string(y_classes) + ")");
      break;
    }
  if (!problems.empty()) throw ContractError("invalid dataset: " + join(problems));
}

// ---- schema -------------------------------------------------------------------

Schema Schema::from_keyvalue(const KeyValueFile& kv) {
  Schema s;
  s.s_column = trim(kv.get_or("s_column", ""));
  if (s.s_column.empty()) throw ContractError("schema: s_column is required");
  s.y_column = trim(kv.get_or("y_column", ""));
  s.numeric = list_value(kv, "numeric");
  s.categorical = list_value(kv, "categorical");
  s.count = list_value(kv, "count");
  s.drop = list_value(kv, "drop");
  if (kv.has("missing")) {
    s.missing = {""};
    for (const auto& m : list_value(kv, "missing")) s.missing.push_back(m);
  }
  s.s_values = list_value(kv, "s_values");
  s.y_values = list_value(kv, "y_values");
  const std::string scale = trim(kv.get_or("scale", "none"));
  if (scale == "minmax") {
    s.minmax = true;
  } else if (scale != "none") {
    throw ContractError("schema: scale must be none or minmax, got '" + scale + "'");
  }
  s.binarize = parse_bool(kv.get_or("binarize", "false"), "binarize");
  s.count_cap = parse_int(kv.get_or("count_cap", "5000"), "count_cap");
  if (s.count_cap < 1) throw ContractError("schema: count_cap must be >= 1");
  s.split_column = trim(kv.get_or("split_column", ""));
  return s;
}

Schema Schema::load(const std::filesystem::path& path) { return from_keyvalue(KeyValueFile::load(path)); }

KeyValueFile Schema::to_keyvalue() const {
  KeyValueFile kv;
  kv.set("s_column", s_column);
  if (!y_column.empty()) kv.set("y_column", y_column);
  if (!numeric.empty()) kv.set("numeric", join(numeric));
  if (!categorical.empty()) kv.set("categorical", join(categorical));
  if (!count.empty()) kv.set("count", join(count));
  if (!drop.empty()) kv.set("drop", join(drop));
  std::vector<std::string> extra;
  for (const auto& m : missing)
    if (!m.empty()) extra.push_back(m);
  kv.set("missing", join(extra));
  if (!s_values.empty()) kv.set("s_values", join(s_values));
  if (!y_values.empty()) kv.set("y_values", join(y_values));
  kv.set("scale", minmax ? "minmax" : "none");
  kv.set("binarize", binarize ? "true" : "false");
  kv.set("count_cap", std::to_string(count_cap));
  if (!split_column.empty()) kv.set("split_column", split_column);
  return kv;
}

// ---- splits -----------------------------------------------------------------

bool SplitSpec::uses_files() const {
  return !train_file.empty() || !validation_file.empty() || !test_file.empty();
}

void SplitSpec::validate() const {
  std::vector<std::string> problems;
  if (train < 0 || validation < 0 || test < 0) problems.push_back("fractions must be >= 0");
  if (std::abs(train + validation + test - 1.0) > 1e-9) problems.push_back("fractions must sum to 1");
  if (!problems.empty()) throw ContractError("split spec: " + join(problems));
}

std::vector<Split> assign_splits(Index n, const SplitSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::vector<Index> order = shuffled_indices(n, rng);
  const auto n_train = static_cast<Index>(std::llround(spec.train * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<Index>(std::llround(spec.validation * static_cast<double>(n))));
  std::vector<Split> out(static_cast<std::size_t>(n), Split::test);
  for (Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(order[static_cast<std::size_t>(i)]);
    out[r] = i < n_train ? Split::train : (i < n_train + n_val ? Split::validation : Split::test);
  }
  return out;
}

std::vector<Index> read_index_file(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<Index> out;
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    double v = 0;
    if (!parse_number(t, v) || v < 0 || v != std::floor(v)) {
      throw IoError(at_line(path.string(), number) + "expected a row index, got '" + t + "'");
    }
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

void write_index_file(const std::filesystem::path& path, std::span<const Index> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (Index r : rows) out << r << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

// ---- csv ----------------------------------------------------------------------

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable t;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  long line = 1;
  long record_line = 1;
  auto end_record = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
    const bool blank = record.size() == 1 && trim(record[0]).empty();
    if (!blank) {
      if (t.header.empty()) {
        for (auto& h : record) h = trim(h);
        t.header = std::move(record);
      } else {
        if (record.size() != t.header.size()) {
          throw IoError(at_line(origin, record_line) + "expected " + std::to_string(t.header.size()) +
                        " fields, found " + std::to_string(record.size()));
        }
        t.rows.push_back(std::move(record));
        t.line_numbers.push_back(record_line);
      }
    }
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(field);
      field.clear();
      field_started = false;
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      end_record();
      ++line;
      record_line = line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw IoError(at_line(origin, record_line) + "unterminated quoted field");
  if (!field.empty() || !record.empty()) end_record();
  if (t.header.empty()) throw IoError(origin + ": empty CSV");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path), path.string()); }

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// ---- loading ------------------------------------------------------------------

TabularDataset load_csv(const std::filesystem::path& path, const Schema& schema, const SplitSpec& splits) {
  return load_csv_table(read_csv(path), schema, splits, path.string());
}

TabularDataset load_csv_table(const CsvTable& table, const Schema& schema, const SplitSpec& splits,
                              const std::string& origin) {
  const auto is_missing = [&](const std::string& v) {
    const std::string t = trim(v);
    return std::find(schema.missing.begin(), schema.missing.end(), t) != schema.missing.end();
  };

  // Resolve column roles.
  std::vector<std::string> absent;
  auto need = [&](const std::string& name) -> std::size_t {
    auto c = table.column(name);
    if (!c) {
      absent.push_back(name);
      return 0;
    }
    return *c;
  };
  const std::size_t s_col = need(schema.s_column);
  const bool has_y = !schema.y_column.empty();
  const std::size_t y_col = has_y ? need(schema.y_column) : 0;
  const bool has_split_col = !schema.split_column.empty();
  const std::size_t split_col = has_split_col ? need(schema.split_column) : 0;

  std::set<std::string> claimed{schema.s_column};
  if (has_y) claimed.insert(schema.y_column);
  if (has_split_col) claimed.insert(schema.split_column);
  for (const auto& d : schema.drop) {
    need(d);
    claimed.insert(d);
  }
  std::map<std::size_t, FeatureKind> role;
  const std::vector<std::string>* star = nullptr;
  FeatureKind star_kind = FeatureKind::numeric;
  for (auto [list, kind] : {std::pair{&schema.numeric, FeatureKind::numeric},
                            std::pair{&schema.categorical, FeatureKind::categorical},
                            std::pair{&schema.count, FeatureKind::count}}) {
    for (const auto& name : *list) {
      if (name == "*") {
        if (star) throw ContractError("schema: '*' may appear in only one feature list");
        star = list;
        star_kind = kind;
        continue;
      }
      const std::size_t c = need(name);
      if (claimed.count(name)) throw ContractError("schema: column '" + name + "' is assigned twice");
      claimed.insert(name);
      if (table.column(name)) role[c] = kind;
    }
  }
  if (!absent.empty()) throw IoError(origin + ": missing column(s): " + join(absent));
  if (star) {
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (!claimed.count(table.header[c])) role[c] = star_kind;
  }

  // Rows and their split.
  std::vector<std::size_t> keep;
  std::vector<Split> part;
  const Index n_src = static_cast<Index>(table.rows.size());
  if (splits.uses_files()) {
    std::vector<int> seen(static_cast<std::size_t>(n_src), -1);
    for (auto [file, which] : {std::pair{&splits.train_file, Split::train},
                               std::pair{&splits.validation_file, Split::validation},
                               std::pair{&splits.test_file, Split::test}}) {
      if (file->empty()) continue;
      for (Index r : read_index_file(*file)) {
        if (r >= n_src) {
          throw IoError(file->string() + ": row index " + std::to_string(r) + " beyond " + std::to_string(n_src) + " rows");
        }
        if (seen[static_cast<std::size_t>(r)] >= 0) {
          throw IoError(file->string() + ": row " + std::to_string(r) + " listed in more than one split");
        }
        seen[static_cast<std::size_t>(r)] = static_cast<int>(which);
      }
    }
    for (Index r = 0; r < n_src; ++r) {
      if (seen[static_cast<std::size_t>(r)] < 0) continue;
      keep.push_back(static_cast<std::size_t>(r));
      part.push_back(static_cast<Split>(seen[static_cast<std::size_t>(r)]));
    }
  } else if (has_split_col) {
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      keep.push_back(r);
      try {
        part.push_back(parse_split(table.rows[r][split_col]));
      } catch (const ContractError& e) {
        throw IoError(at_line(origin, table.line_numbers[r]) + e.what());
      }
    }
  } else {
    part = assign_splits(n_src, splits);
    for (std::size_t r = 0; r < table.rows.size(); ++r) keep.push_back(r);
  }
  const Index n = static_cast<Index>(keep.size());
  auto cell = [&](Index i, std::size_t c) -> const std::string& { return table.rows[keep[static_cast<std::size_t>(i)]][c]; };
  auto line_of = [&](Index i) { return table.line_numbers[keep[static_cast<std::size_t>(i)]]; };
  auto is_train = [&](Index i) { return part[static_cast<std::size_t>(i)] == Split::train; };

  // Feature vocabularies come from train rows; s and y states from every row.
  auto vocabulary = [&](std::size_t c, const std::vector<std::string>& declared, bool train_only) {
    if (!declared.empty()) return declared;
    std::set<std::string> vals;
    for (Index i = 0; i < n; ++i)
      if ((!train_only || is_train(i)) && !is_missing(cell(i, c))) vals.insert(trim(cell(i, c)));
    return std::vector<std::string>(vals.begin(), vals.end());
  };
  auto encode = [&](const std::vector<std::string>& vocab, const std::string& v) {
    const auto it = std::find(vocab.begin(), vocab.end(), trim(v));
    return it == vocab.end() ? -1 : static_cast<int>(it - vocab.begin());
  };

  TabularDataset d;
  d.split = part;
  d.s_values = vocabulary(s_col, schema.s_values, false);
  if (d.s_values.empty()) throw IoError(origin + ": column '" + schema.s_column + "' has no values");
  d.s_states = static_cast<int>(d.s_values.size());
  for (Index i = 0; i < n; ++i) {
    const int k = is_missing(cell(i, s_col)) ? -1 : encode(d.s_values, cell(i, s_col));
    if (k < 0) {
      throw IoError(at_line(origin, line_of(i)) + "s value '" + cell(i, s_col) + "' is missing or not in {" +
                    join(d.s_values) + "}");
    }
    d.s.push_back(k);
  }
  if (has_y) {
    d.y_values = vocabulary(y_col, schema.y_values, false);
    d.y_classes = static_cast<int>(d.y_values.size());
    for (Index i = 0; i < n; ++i) {
      if (is_missing(cell(i, y_col))) {
        d.y.push_back(-1);
        continue;
      }
      const int k = encode(d.y_values, cell(i, y_col));
      if (k < 0) {
        throw IoError(at_line(origin, line_of(i)) + "y value '" + cell(i, y_col) + "' not in {" +
                      join(d.y_values) + "}");
      }
      d.y.push_back(k);
    }
  } else {
    d.y.assign(static_cast<std::size_t>(n), -1);
  }

  // Features, in header order.
  std::vector<Vector> columns;
  std::vector<double> count_totals;
  std::vector<std::size_t> count_slots;
  for (const auto& [c, kind] : role) {
    const std::string& name = table.header[c];
    if (kind == FeatureKind::categorical) {
      const std::vector<std::string> vocab = vocabulary(c, {}, true);
      const std::size_t first = columns.size();
      for (const auto& v : vocab) {
        columns.emplace_back(Vector::Zero(n));
        d.feature_names.push_back(name + "=" + v);
        d.feature_kinds.push_back(kind);
      }
      columns.emplace_back(Vector::Zero(n));
      d.feature_names.push_back(name + "=" + kUnseen);
      d.feature_kinds.push_back(kind);
      for (Index i = 0; i < n; ++i) {
        const int k = is_missing(cell(i, c)) ? -1 : encode(vocab, cell(i, c));
        columns[first + static_cast<std::size_t>(k < 0 ? static_cast<int>(vocab.size()) : k)](i) = 1.0;
      }
      continue;
    }
    Vector col(n);
    double train_sum = 0.0;
    Index train_n = 0;
    for (Index i = 0; i < n; ++i) {
      const std::string& v = cell(i, c);
      double value = std::numeric_limits<double>::quiet_NaN();
      if (!is_missing(v)) {
        if (!parse_number(v, value)) {
          throw IoError(at_line(origin, line_of(i)) + "column '" + name + "': cannot parse '" + v + "' as a number");
        }
        if (kind == FeatureKind::count && (value < 0 || value != std::floor(value))) {
          throw IoError(at_line(origin, line_of(i)) + "column '" + name + "': count must be a nonnegative integer, got '" + v + "'");
        }
        if (is_train(i)) {
          train_sum += value;
          ++train_n;
        }
      } else if (kind == FeatureKind::count) {
        value = 0.0;
      }
      col(i) = value;
    }
    if (kind == FeatureKind::numeric) {
      const double fill = train_n > 0 ? train_sum / static_cast<double>(train_n) : 0.0;
      for (Index i = 0; i < n; ++i)
        if (std::isnan(col(i))) col(i) = fill;
    } else {
      count_slots.push_back(columns.size());
      count_totals.push_back(train_sum);
    }
    columns.push_back(std::move(col));
    d.feature_names.push_back(name);
    d.feature_kinds.push_back(kind);
  }

  // Keep only the most frequent count columns.
  std::vector<char> keep_col(columns.size(), 1);
  if (static_cast<Index>(count_slots.size()) > schema.count_cap) {
    std::vector<std::size_t> order(count_slots.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return count_totals[a] > count_totals[b]; });
    for (std::size_t k = static_cast<std::size_t>(schema.count_cap); k < order.size(); ++k) keep_col[count_slots[order[k]]] = 0;
  }

  Index width = 0;
  for (char k : keep_col) width += k;
  d.x.resize(n, width);
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;
  Index at = 0;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (!keep_col[c]) continue;
    d.x.col(at++) = columns[c];
    names.push_back(d.feature_names[c]);
    kinds.push_back(d.feature_kinds[c]);
  }
  d.feature_names = std::move(names);
  d.feature_kinds = std::move(kinds);

  if (schema.minmax) {
    for (Index j = 0; j < d.x.cols(); ++j) {
      if (d.feature_kinds[static_cast<std::size_t>(j)] != FeatureKind::numeric) continue;
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (Index i = 0; i < n; ++i) {
        if (!is_train(i)) continue;
        lo = std::min(lo, d.x(i, j));
        hi = std::max(hi, d.x(i, j));
      }
      if (!std::isfinite(lo)) continue;
      const double range = hi > lo ? hi - lo : 1.0;
      d.x.col(j) = (d.x.col(j).array() - lo) / range;
    }
  }
  if (schema.binarize) d = binarize(std::move(d));
  d.validate();
  return d;
}

Matrix binarize(const Matrix& x) { return (x.array() > 0.0).cast<double>(); }

TabularDataset binarize(TabularDataset d) {
  d.x = binarize(d.x);
  return d;
}

// ---- export -------------------------------------------------------------------

namespace {
constexpr const char* kExportS = "s_value";
constexpr const char* kExportY = "y_value";
constexpr const char* kExportSplit = "split_part";
}  // namespace

Schema export_schema(const TabularDataset& d) {
  Schema s;
  s.s_column = kExportS;
  if (d.has_labels()) s.y_column = kExportY;
  s.numeric = d.feature_names;
  s.missing = {""};
  s.s_values = d.s_values;
  s.y_values = d.y_values;
  s.split_column = kExportSplit;
  return s;
}

void export_dataset_csv(const TabularDataset& d, const std::filesystem::path& path) {
  d.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& name : d.feature_names) out << csv_escape(name) << ",";
  out << kExportS << "," << kExportY << "," << kExportSplit << "\n";
  for (Index i = 0; i < d.rows(); ++i) {
    for (Index j = 0; j < d.cols(); ++j) out << format_double(d.x(i, j)) << ",";
    const auto r = static_cast<std::size_t>(i);
    out << csv_escape(d.s_values[static_cast<std::size_t>(d.s[r])]) << ",";
    if (d.y[r] >= 0) out << csv_escape(d.y_values[static_cast<std::size_t>(d.y[r])]);
    out << "," << to_string(d.split[r]) << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  std::vector<std::vector<std::string>> rows = t.rows;
  std::vector<long> lines = t.line_numbers;
  double probe = 0;
  if (!t.header.empty() && parse_number(t.header[0], probe)) {
    rows.insert(rows.begin(), t.header);
    lines.insert(lines.begin(), 1);
  }
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      double v = 0;
      if (!parse_number(rows[i][j], v)) {
        throw IoError(at_line(path.string(), lines[i]) + "cannot parse '" + rows[i][j] + "' as a number");
      }
      m(static_cast<Index>(i), static_cast<Index>(j)) = v;
    }
  }
  return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (Index j = 0; j < m.cols(); ++j) {
    if (j) out << ",";
    out << (static_cast<std::size_t>(j) < header.size() ? csv_escape(header[static_cast<std::size_t>(j)])
                                                         : "c" + std::to_string(j));
  }
  out << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace vfae
