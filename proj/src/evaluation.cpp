#include "vfae/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vfae/errors.hpp"
#include "vfae/random.hpp"
#include "vfae/training.hpp"

namespace vfae {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix gather(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

// Rows with a known target, and the target values.
std::pair<std::vector<Index>, std::vector<int>> targets(const EmbeddingSet& e, ProbeTarget t) {
  std::vector<Index> rows;
  std::vector<int> labels;
  const std::vector<int>& src = t == ProbeTarget::s ? e.s : e.y;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] < 0) continue;
    rows.push_back(static_cast<Index>(i));
    labels.push_back(src[i]);
  }
  return {rows, labels};
}

void check_binary_groups(std::span<const int> s, std::size_t n, const char* who) {
  if (s.size() != n) throw DimensionError(std::string(who) + ": " + std::to_string(n) + " values for " + std::to_string(s.size()) + " s entries");
  std::size_t counts[2] = {0, 0};
  for (int v : s) {
    if (v != 0 && v != 1) throw ContractError(std::string(who) + ": s must be binary, got " + std::to_string(v));
    ++counts[v];
  }
  for (int g = 0; g < 2; ++g)
    if (counts[g] == 0) throw ContractError(std::string(who) + ": group s=" + std::to_string(g) + " is empty");
}

nlohmann::ordered_json number(double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(); }
nlohmann::ordered_json number(const std::optional<double>& v) { return v ? number(*v) : nlohmann::ordered_json(); }

std::string fixed(double v) {
  if (!std::isfinite(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}
std::string fixed(const std::optional<double>& v) { return v ? fixed(*v) : "-"; }

}  // namespace

// ---- embeddings ---------------------------------------------------------------

void EmbeddingSet::validate() const {
  const auto n = static_cast<std::size_t>(rows());
  if (s.size() != n) throw DimensionError("embedding set: " + std::to_string(s.size()) + " s values for " + std::to_string(n) + " rows");
  if (!y.empty() && y.size() != n) throw DimensionError("embedding set: " + std::to_string(y.size()) + " y values for " + std::to_string(n) + " rows");
  if (provenance.model_id.empty()) throw ContractError("embedding set: provenance model_id is required");
}

EmbeddingSet embed_split(const VfaeModel& model, const TabularDataset& d, Split part, SampleMode mode,
                         std::uint64_t seed, const std::string& model_id) {
  const auto rows = d.indices(part);
  EmbeddingSet e;
  NoiseSource noise(seed);
  e.z = rows.empty() ? Matrix(0, model.config().z1_dim)
                     : model.embed(gather(d.x, rows), d.s_one_hot(rows), mode, noise);
  e.s = d.nuisance(rows);
  if (d.has_labels()) e.y = d.labels(rows);
  e.s_states = d.s_states;
  e.y_classes = d.y_classes;
  e.provenance = {model_id, mode, seed};
  return e;
}

EmbeddingSet features_as_embedding(const TabularDataset& d, Split part, const std::string& model_id) {
  const auto rows = d.indices(part);
  EmbeddingSet e;
  e.z = gather(d.x, rows);
  e.s = d.nuisance(rows);
  if (d.has_labels()) e.y = d.labels(rows);
  e.s_states = d.s_states;
  e.y_classes = d.y_classes;
  e.provenance = {model_id, SampleMode::mean, 0};
  return e;
}

std::filesystem::path provenance_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".provenance");
}

void export_embeddings(const EmbeddingSet& e, const std::filesystem::path& path) {
  e.validate();
  std::vector<std::string> header;
  for (Index j = 0; j < e.z.cols(); ++j) header.push_back("z_" + std::to_string(j));
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& h : header) out << h << ",";
  out << "s,y\n";
  for (Index i = 0; i < e.rows(); ++i) {
    for (Index j = 0; j < e.z.cols(); ++j) out << format_double(e.z(i, j)) << ",";
    out << e.s[static_cast<std::size_t>(i)] << ",";
    if (e.has_y() && e.y[static_cast<std::size_t>(i)] >= 0) out << e.y[static_cast<std::size_t>(i)];
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());

  KeyValueFile kv;
  kv.set("model_id", e.provenance.model_id);
  kv.set("mode", to_string(e.provenance.mode));
  kv.set("seed", std::to_string(e.provenance.seed));
  kv.set("rows", std::to_string(e.rows()));
  kv.set("dims", std::to_string(e.z.cols()));
  kv.set("s_states", std::to_string(e.s_states));
  kv.set("y_classes", std::to_string(e.y_classes));
  kv.set("has_y", e.has_y() ? "true" : "false");
  kv.save(provenance_path(path));
}

EmbeddingSet import_embeddings(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto s_col = t.column("s");
  const auto y_col = t.column("y");
  if (!s_col || !y_col) throw IoError(path.string() + ": expected columns s and y");
  const Index dims = static_cast<Index>(t.header.size()) - 2;
  EmbeddingSet e;
  e.z.resize(static_cast<Index>(t.rows.size()), dims);
  bool any_y = false;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = path.string() + ":" + std::to_string(t.line_numbers[i]);
    try {
      Index j = 0;
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c == *s_col || c == *y_col) continue;
        e.z(static_cast<Index>(i), j++) = parse_double(row[c], "z");
      }
      e.s.push_back(static_cast<int>(parse_int(row[*s_col], "s")));
      const std::string y = trim(row[*y_col]);
      e.y.push_back(y.empty() ? -1 : static_cast<int>(parse_int(y, "y")));
      any_y = any_y || !y.empty();
    } catch (const std::exception& ex) {
      throw IoError(where + ": " + ex.what());
    }
  }
  const auto side = provenance_path(path);
  if (std::filesystem::exists(side)) {
    const KeyValueFile kv = KeyValueFile::load(side);
    e.provenance.model_id = kv.get_or("model_id", "");
    e.provenance.mode = parse_sample_mode(kv.get_or("mode", "sample"));
    e.provenance.seed = static_cast<std::uint64_t>(parse_int(kv.get_or("seed", "0"), "seed"));
    e.s_states = static_cast<int>(parse_int(kv.get_or("s_states", "0"), "s_states"));
    e.y_classes = static_cast<int>(parse_int(kv.get_or("y_classes", "0"), "y_classes"));
    if (!parse_bool(kv.get_or("has_y", any_y ? "true" : "false"), "has_y")) e.y.clear();
  } else {
    e.provenance.model_id = path.filename().string();
  }
  if (!any_y) e.y.clear();
  for (int v : e.s) e.s_states = std::max(e.s_states, v + 1);
  for (int v : e.y) e.y_classes = std::max(e.y_classes, v + 1);
  return e;
}

// ---- probes ---------------------------------------------------------------------

std::string to_string(ProbeKind k) { return k == ProbeKind::linear ? "linear" : "nonlinear"; }
std::string to_string(ProbeTarget t) { return t == ProbeTarget::s ? "s" : "y"; }

ProbeReport run_probe(ProbeKind kind, ProbeTarget target, const EmbeddingSet& train, const EmbeddingSet& test,
                      const MlpProbeConfig& mlp) {
  train.validate();
  test.validate();
  if (train.z.cols() != test.z.cols()) {
    throw DimensionError("run_probe: train has " + std::to_string(train.z.cols()) + " dims, test " +
                         std::to_string(test.z.cols()));
  }
  const auto [tr_rows, tr_labels] = targets(train, target);
  const auto [te_rows, te_labels] = targets(test, target);
  if (te_rows.empty()) throw ContractError("run_probe: no test rows with a known " + to_string(target));
  const int classes = target == ProbeTarget::s ? std::max(train.s_states, test.s_states)
                                               : std::max(train.y_classes, test.y_classes);
  const Matrix x_tr = gather(train.z, tr_rows), x_te = gather(test.z, te_rows);
  std::vector<int> pred;
  if (kind == ProbeKind::linear) {
    pred = LinearProbe::fit(x_tr, tr_labels, classes).predict(x_te);
  } else {
    pred = MlpProbe::fit(x_tr, tr_labels, classes, mlp).predict(x_te);
  }
  ProbeReport r;
  r.kind = kind;
  r.target = target;
  r.accuracy = accuracy(pred, te_labels);
  r.chance = chance_accuracy(te_labels);
  r.train_rows = static_cast<Index>(tr_rows.size());
  r.test_rows = static_cast<Index>(te_rows.size());
  for (int c = 0; c < classes; ++c) {
    std::size_t n = 0, hit = 0;
    for (std::size_t i = 0; i < te_labels.size(); ++i) {
      if (te_labels[i] != c) continue;
      ++n;
      hit += pred[i] == c;
    }
    r.per_class_accuracy.push_back(n ? static_cast<double>(hit) / static_cast<double>(n) : kNaN);
  }
  return r;
}

// ---- metrics ----------------------------------------------------------------------

double chance_accuracy(std::span<const int> labels) { return majority_share(labels); }

double discrimination(std::span<const int> predictions, std::span<const int> s) {
  check_binary_groups(s, predictions.size(), "discrimination");
  double pos[2] = {0, 0}, n[2] = {0, 0};
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (predictions[i] != 0 && predictions[i] != 1) throw ContractError("discrimination: predictions must be binary");
    pos[s[i]] += predictions[i];
    n[s[i]] += 1;
  }
  return std::abs(pos[0] / n[0] - pos[1] / n[1]);
}

double discrimination_prob(std::span<const double> probabilities, std::span<const int> s) {
  check_binary_groups(s, probabilities.size(), "discrimination_prob");
  double sum[2] = {0, 0}, n[2] = {0, 0};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double p = probabilities[i];
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("discrimination_prob: probabilities must lie in [0, 1]");
    sum[s[i]] += p;
    n[s[i]] += 1;
  }
  return std::abs(sum[0] / n[0] - sum[1] / n[1]);
}

double pad_from_error(double error) {
  if (!(error >= 0.0 && error <= 1.0)) throw ContractError("pad_from_error: error must lie in [0, 1]");
  return std::max(0.0, 2.0 * (1.0 - 2.0 * error));
}

double proxy_a_distance(const EmbeddingSet& source, const EmbeddingSet& target, std::uint64_t seed) {
  if (source.rows() == 0 || target.rows() == 0) throw ContractError("proxy_a_distance: empty domain");
  if (source.z.cols() != target.z.cols()) {
    throw ContractError("proxy_a_distance: dimension mismatch " + std::to_string(source.z.cols()) + " vs " +
                        std::to_string(target.z.cols()));
  }
  const Index n = source.rows() + target.rows();
  Matrix all(n, source.z.cols());
  all << source.z, target.z;
  std::vector<int> origin(static_cast<std::size_t>(n), 0);
  std::fill(origin.begin() + source.rows(), origin.end(), 1);

  std::mt19937_64 rng(derive_seed(seed, "pad-split"));
  const std::vector<Index> order = shuffled_indices(n, rng);
  const Index half = n / 2;
  std::vector<Index> tr(order.begin(), order.begin() + half), te(order.begin() + half, order.end());
  std::vector<int> y_tr, y_te;
  for (Index r : tr) y_tr.push_back(origin[static_cast<std::size_t>(r)]);
  for (Index r : te) y_te.push_back(origin[static_cast<std::size_t>(r)]);
  const LinearProbe probe = LinearProbe::fit(gather(all, tr), y_tr, 2);
  return pad_from_error(1.0 - probe.accuracy(gather(all, te), y_te));
}

// ---- reports ------------------------------------------------------------------------

const ProbeReport* EvaluationReport::find(ProbeKind kind, ProbeTarget target) const {
  for (const auto& p : probes)
    if (p.kind == kind && p.target == target) return &p;
  return nullptr;
}

EvaluationReport evaluate_embeddings(const EmbeddingSet& train, const EmbeddingSet& test, const EvalConfig& cfg) {
  train.validate();
  test.validate();
  EvaluationReport r;
  r.provenance = test.provenance;
  r.dataset = cfg.dataset;
  r.train_rows = train.rows();
  r.test_rows = test.rows();
  r.chance_s = chance_accuracy(test.s);

  r.probes.push_back(run_probe(ProbeKind::linear, ProbeTarget::s, train, test, cfg.mlp));
  if (cfg.nonlinear_probe) r.probes.push_back(run_probe(ProbeKind::nonlinear, ProbeTarget::s, train, test, cfg.mlp));

  if (train.has_y() && test.has_y()) {
    const auto [tr_rows, tr_labels] = targets(train, ProbeTarget::y);
    const auto [te_rows, te_labels] = targets(test, ProbeTarget::y);
    std::set<int> present(tr_labels.begin(), tr_labels.end());
    if (!te_rows.empty()) r.chance_y = chance_accuracy(te_labels);
    if (present.size() >= 2 && !te_rows.empty()) {
      const int classes = std::max(train.y_classes, test.y_classes);
      const LinearProbe yprobe = LinearProbe::fit(gather(train.z, tr_rows), tr_labels, classes);
      r.probes.push_back(run_probe(ProbeKind::linear, ProbeTarget::y, train, test, cfg.mlp));
      const bool binary_s = std::max(train.s_states, test.s_states) == 2;
      const bool both_groups = std::count(test.s.begin(), test.s.end(), 0) > 0 && std::count(test.s.begin(), test.s.end(), 1) > 0;
      if (classes == 2 && binary_s && both_groups) {
        const Matrix p = yprobe.predict_proba(test.z);
        const std::vector<int> pred = argmax_rows(p);
        std::vector<double> p1(p.col(1).data(), p.col(1).data() + p.rows());
        r.discrimination = discrimination(pred, test.s);
        r.discrimination_prob = discrimination_prob(p1, test.s);
      }
    }
  }

  if (cfg.proxy_a_distance && std::max(train.s_states, test.s_states) == 2) {
    EmbeddingSet a, b;
    std::vector<Index> ra, rb;
    for (std::size_t i = 0; i < test.s.size(); ++i) (test.s[i] == 0 ? ra : rb).push_back(static_cast<Index>(i));
    if (!ra.empty() && !rb.empty()) {
      a.z = gather(test.z, ra);
      b.z = gather(test.z, rb);
      a.s.assign(ra.size(), 0);
      b.s.assign(rb.size(), 1);
      a.provenance = b.provenance = test.provenance;
      r.proxy_a_distance = proxy_a_distance(a, b, derive_seed(cfg.seed, "pad"));
    }
  }
  return r;
}

EvaluationReport evaluate_model(const VfaeModel& model, const TabularDataset& d, const EvalConfig& cfg) {
  d.validate();
  const EmbeddingSet train = embed_split(model, d, Split::train, cfg.mode, derive_seed(cfg.seed, "embed-train"), cfg.model_id);
  const EmbeddingSet test = embed_split(model, d, Split::test, cfg.mode, derive_seed(cfg.seed, "embed-test"), cfg.model_id);
  if (train.rows() == 0 || test.rows() == 0) throw ContractError("evaluate_model: train and test splits must be nonempty");
  EvaluationReport r = evaluate_embeddings(train, test, cfg);
  r.provenance = {cfg.model_id, cfg.mode, cfg.seed};
  if (d.has_labels()) {
    const double acc = y_accuracy(model, d, d.indices(Split::test), cfg.mode, derive_seed(cfg.seed, "predict"));
    if (std::isfinite(acc)) r.y_accuracy = acc;
  }
  return r;
}

std::string EvaluationReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "vfae-eval-report";
  j["version"] = 1;
  j["provenance"] = {{"model_id", provenance.model_id}, {"mode", to_string(provenance.mode)}, {"seed", provenance.seed}};
  j["dataset"] = dataset;
  j["train_rows"] = train_rows;
  j["test_rows"] = test_rows;
  j["probes"] = nlohmann::ordered_json::array();
  for (const auto& p : probes) {
    nlohmann::ordered_json pc = nlohmann::ordered_json::array();
    for (double v : p.per_class_accuracy) pc.push_back(number(v));
    j["probes"].push_back({{"kind", to_string(p.kind)},
                           {"target", to_string(p.target)},
                           {"accuracy", number(p.accuracy)},
                           {"per_class_accuracy", pc},
                           {"chance", number(p.chance)},
                           {"train_rows", p.train_rows},
                           {"test_rows", p.test_rows}});
  }
  j["chance_s"] = number(chance_s);
  j["chance_y"] = number(chance_y);
  j["y_accuracy"] = number(y_accuracy);
  j["discrimination"] = number(discrimination);
  j["discrimination_prob"] = number(discrimination_prob);
  j["proxy_a_distance"] = number(proxy_a_distance);
  return j.dump(2) + "\n";
}

std::string EvaluationReport::to_table() const {
  std::ostringstream out;
  char line[160];
  out << "model    " << provenance.model_id << " (" << to_string(provenance.mode) << ", seed " << provenance.seed << ")\n";
  out << "dataset  " << dataset << " (train " << train_rows << ", test " << test_rows << ")\n\n";
  std::snprintf(line, sizeof line, "%-28s %10s %10s\n", "metric", "value", "chance");
  out << line;
  for (const auto& p : probes) {
    const std::string name = "probe " + to_string(p.target) + " (" + to_string(p.kind) + ")";
    std::snprintf(line, sizeof line, "%-28s %10s %10s\n", name.c_str(), fixed(p.accuracy).c_str(), fixed(p.chance).c_str());
    out << line;
  }
  auto row = [&](const char* name, const std::optional<double>& v, const std::optional<double>& c) {
    std::snprintf(line, sizeof line, "%-28s %10s %10s\n", name, fixed(v).c_str(), fixed(c).c_str());
    out << line;
  };
  row("y accuracy (q(y|z1))", y_accuracy, chance_y);
  row("discrimination", discrimination, std::nullopt);
  row("discrimination (prob)", discrimination_prob, std::nullopt);
  if (proxy_a_distance) row("proxy A-distance", proxy_a_distance, std::nullopt);
  return out.str();
}

}  // namespace vfae
