#include "vfae/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vfae/checkpoint.hpp"
#include "vfae/mmd.hpp"
#include "vfae/presets.hpp"
#include "vfae/random.hpp"
#include "vfae/synthetic.hpp"

namespace vfae::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDefault = "default";
constexpr const char* kFlag = "flag";
constexpr const char* kAuto = "auto";

std::string join_problems(const std::vector<std::string>& problems) {
  std::string msg = "invalid configuration:";
  for (const auto& p : problems) msg += "\n  " + p;
  return msg;
}

/// Adds every line of a multi-line validation message as its own problem.
void add_message(std::vector<std::string>& problems, const std::string& what) {
  std::istringstream is(what);
  std::string line;
  bool first = true;
  std::vector<std::string> lines;
  while (std::getline(is, line)) {
    if (first && line.size() > 1 && line.back() == ':') {
      first = false;
      continue;
    }
    first = false;
    line = trim(line);
    if (line.rfind("- ", 0) == 0) line = line.substr(2);
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) lines.push_back(what);
  problems.insert(problems.end(), lines.begin(), lines.end());
}

KeyValueFile section(const RunConfig& cfg, const std::string& prefix) {
  KeyValueFile kv;
  for (const auto& [k, v] : cfg.settings())
    if (k.rfind(prefix, 0) == 0) kv.set(k, v.value);
  return kv;
}

SyntheticSpec synthetic_spec(const RunConfig& cfg) {
  SyntheticSpec s;
  s.samples = parse_int(cfg.get("synthetic.samples"), "synthetic.samples");
  s.correlation = parse_double(cfg.get("synthetic.correlation"), "synthetic.correlation");
  s.shift = parse_double(cfg.get("synthetic.shift"), "synthetic.shift");
  s.noise = parse_double(cfg.get("synthetic.noise"), "synthetic.noise");
  s.latent_scale = parse_double(cfg.get("synthetic.latent_scale"), "synthetic.latent_scale");
  s.latent_dim = parse_int(cfg.get("synthetic.latent_dim"), "synthetic.latent_dim");
  s.data_dim = parse_int(cfg.get("synthetic.data_dim"), "synthetic.data_dim");
  s.s_groups = static_cast<int>(parse_int(cfg.get("synthetic.s_groups"), "synthetic.s_groups"));
  s.y_classes = static_cast<int>(parse_int(cfg.get("synthetic.y_classes"), "synthetic.y_classes"));
  s.seed = static_cast<std::uint64_t>(parse_int(cfg.get("synthetic.seed"), "synthetic.seed"));
  s.splits.train = parse_double(cfg.get("data.train_fraction"), "data.train_fraction");
  s.splits.validation = parse_double(cfg.get("data.validation_fraction"), "data.validation_fraction");
  s.splits.test = parse_double(cfg.get("data.test_fraction"), "data.test_fraction");
  s.splits.seed = static_cast<std::uint64_t>(parse_int(cfg.get("data.split_seed"), "data.split_seed"));
  return s;
}

SplitSpec split_spec(const RunConfig& cfg) {
  SplitSpec s;
  s.train = parse_double(cfg.get("data.train_fraction"), "data.train_fraction");
  s.validation = parse_double(cfg.get("data.validation_fraction"), "data.validation_fraction");
  s.test = parse_double(cfg.get("data.test_fraction"), "data.test_fraction");
  s.seed = static_cast<std::uint64_t>(parse_int(cfg.get("data.split_seed"), "data.split_seed"));
  s.train_file = cfg.get("data.train_file");
  s.validation_file = cfg.get("data.validation_file");
  s.test_file = cfg.get("data.test_file");
  return s;
}

bool domain_mode(const RunConfig& cfg) { return !cfg.get("data.source_domain").empty(); }

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : ContractError(join_problems(problems)), problems_(std::move(problems)) {}

RunConfig RunConfig::defaults() {
  RunConfig c;
  KeyValueFile kv;
  kv.set("run.preset", "");

  kv.set("data.source", "csv");
  kv.set("data.path", "");
  kv.set("data.schema", "");
  kv.set("data.binarize", "false");
  kv.set("data.train_file", "");
  kv.set("data.validation_file", "");
  kv.set("data.test_file", "");
  const SplitSpec split;
  kv.set("data.train_fraction", format_double(split.train));
  kv.set("data.validation_fraction", format_double(split.validation));
  kv.set("data.test_fraction", format_double(split.test));
  kv.set("data.split_seed", std::to_string(split.seed));
  kv.set("data.source_domain", "");
  kv.set("data.target_domain", "");

  const SyntheticSpec syn;
  kv.set("synthetic.samples", std::to_string(syn.samples));
  kv.set("synthetic.correlation", format_double(syn.correlation));
  kv.set("synthetic.shift", format_double(syn.shift));
  kv.set("synthetic.noise", format_double(syn.noise));
  kv.set("synthetic.latent_scale", format_double(syn.latent_scale));
  kv.set("synthetic.latent_dim", std::to_string(syn.latent_dim));
  kv.set("synthetic.data_dim", std::to_string(syn.data_dim));
  kv.set("synthetic.s_groups", std::to_string(syn.s_groups));
  kv.set("synthetic.y_classes", std::to_string(syn.y_classes));
  kv.set("synthetic.seed", std::to_string(syn.seed));

  ModelConfig{}.write(kv);
  kv.set("model.x_dim", kAuto);
  kv.set("model.s_dim", kAuto);
  kv.set("model.y_dim", kAuto);
  TrainConfig{}.write(kv);

  const EvalConfig ev;
  kv.set("eval.mode", to_string(ev.mode));
  kv.set("eval.seed", std::to_string(ev.seed));
  kv.set("eval.nonlinear_probe", ev.nonlinear_probe ? "true" : "false");
  kv.set("eval.proxy_a_distance", ev.proxy_a_distance ? "true" : "false");

  for (const auto& [k, v] : kv.values()) c.settings_[k] = Setting{v, kDefault};
  return c;
}

void RunConfig::apply(const KeyValueFile& kv, const std::string& source) {
  for (const auto& [k, v] : kv.values()) {
    if (!known(k)) {
      unknown_.push_back("unknown key '" + k + "' (" + source + ")");
      continue;
    }
    settings_[k] = Setting{v, source};
  }
}

void RunConfig::set(const std::string& key, const std::string& value, const std::string& source) {
  if (!known(key)) throw ConfigError({"unknown key '" + key + "'"});
  settings_[key] = Setting{value, source};
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = settings_.find(key);
  if (it == settings_.end()) throw ContractError("unknown key '" + key + "'");
  return it->second.value;
}

const std::string& RunConfig::source(const std::string& key) const {
  auto it = settings_.find(key);
  if (it == settings_.end()) throw ContractError("unknown key '" + key + "'");
  return it->second.source;
}

void RunConfig::validate() const {
  std::vector<std::string> problems = unknown_;
  const auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      add_message(problems, e.what());
    }
  };

  const std::string& preset = get("run.preset");
  if (!preset.empty() && !find_preset(preset)) {
    std::string names;
    for (const Preset& q : presets()) names += (names.empty() ? "" : ", ") + q.name;
    problems.push_back("unknown preset '" + preset + "' (available: " + names + ")");
  }

  const std::string& source = get("data.source");
  if (source != "csv" && source != "synthetic") {
    problems.push_back("data.source must be csv or synthetic, got '" + source + "'");
  } else if (source == "csv") {
    if (get("data.path").empty()) problems.push_back("data.path is required for csv data");
    if (get("data.schema").empty()) problems.push_back("data.schema is required for csv data");
    check([&] { split_spec(*this).validate(); });
  } else {
    check([&] { synthetic_spec(*this).validate(); });
  }
  check([&] { parse_bool(get("data.binarize"), "data.binarize"); });
  if (get("data.source_domain").empty() != get("data.target_domain").empty())
    problems.push_back("data.source_domain and data.target_domain must be given together");
  else if (domain_mode(*this) && get("data.source_domain") == get("data.target_domain"))
    problems.push_back("data.source_domain and data.target_domain must differ");

  for (const char* key : {"model.x_dim", "model.s_dim", "model.y_dim"}) {
    if (get(key) != kAuto) check([&] { parse_int(get(key), key); });
  }
  check([&] {
    KeyValueFile kv = section(*this, "model.");
    for (const char* key : {"model.x_dim", "model.s_dim", "model.y_dim"})
      if (kv.get_or(key, kAuto) == kAuto) kv.set(key, "2");
    ModelConfig::read(kv);
  });
  check([&] { train().validate(); });
  check([&] { eval(); });

  if (!problems.empty()) throw ConfigError(problems);
}

TrainConfig RunConfig::train() const { return TrainConfig::read(section(*this, "train.")); }

EvalConfig RunConfig::eval() const {
  EvalConfig e;
  e.mode = parse_sample_mode(get("eval.mode"));
  e.seed = static_cast<std::uint64_t>(parse_int(get("eval.seed"), "eval.seed"));
  e.nonlinear_probe = parse_bool(get("eval.nonlinear_probe"), "eval.nonlinear_probe");
  e.proxy_a_distance = parse_bool(get("eval.proxy_a_distance"), "eval.proxy_a_distance");
  e.model_id = get("run.preset").empty() ? "vfae" : get("run.preset");
  e.dataset = get("data.source") == "synthetic" ? "synthetic" : fs::path(get("data.path")).filename().string();
  return e;
}

ModelConfig RunConfig::model(const TabularDataset& d) const {
  KeyValueFile kv = section(*this, "model.");
  std::vector<std::string> problems;
  const auto fill = [&](const char* key, Index actual, const char* what) {
    const std::string v = get(key);
    if (v == kAuto) {
      kv.set(key, std::to_string(actual));
    } else if (parse_int(v, key) != actual) {
      problems.push_back(std::string(key) + " = " + v + " but the data has " + std::to_string(actual) + " " + what);
    }
  };
  fill("model.x_dim", d.cols(), "features");
  fill("model.s_dim", d.s_states, "s states");
  fill("model.y_dim", std::max(d.y_classes, 1), "y classes");
  if (!problems.empty()) throw ConfigError(problems);
  return ModelConfig::read(kv);
}

KeyValueFile RunConfig::to_keyvalue() const {
  KeyValueFile kv;
  for (const auto& [k, v] : settings_) kv.set(k, v.value, v.source);
  return kv;
}

RunConfig resolve(const std::optional<std::string>& preset, const std::optional<KeyValueFile>& file,
                  const std::string& file_source, const KeyValueFile& flags) {
  RunConfig cfg = RunConfig::defaults();
  std::string preset_name;
  std::string preset_source = kDefault;
  if (preset) {
    preset_name = *preset;
    preset_source = kFlag;
  } else if (auto v = flags.get("run.preset")) {
    preset_name = *v;
    preset_source = kFlag;
  } else if (file && file->has("run.preset")) {
    preset_name = *file->get("run.preset");
    preset_source = file_source;
  }

  const Preset* p = preset_name.empty() ? nullptr : find_preset(preset_name);
  if (p)
    for (const auto& [k, v] : p->values) cfg.set(k, v, "preset:" + p->name);

  if (file) cfg.apply(*file, file_source);
  cfg.apply(flags, kFlag);
  if (!preset_name.empty()) cfg.set("run.preset", preset_name, preset_source);

  if (p && p->alpha_per_labeled > 0.0 && cfg.source("train.alpha") == kDefault) {
    try {
      const double f = parse_double(cfg.get("train.labeled_fraction"), "train.labeled_fraction");
      if (f > 0.0) {
        cfg.set("train.alpha", format_double(p->alpha_per_labeled / f),
                "preset:" + p->name + " (" + format_double(p->alpha_per_labeled) + " / train.labeled_fraction)");
      }
    } catch (const std::exception&) {
      // reported by validate
    }
  }
  if (cfg.get("data.source") == "synthetic" && cfg.source("model.likelihood") == kDefault)
    cfg.set("model.likelihood", to_string(LikelihoodKind::gaussian_sigmoid_mean), "data.source");
  if (domain_mode(cfg) && cfg.source("train.unlabeled_domain") == kDefault)
    cfg.set("train.unlabeled_domain", "1", "data.target_domain");

  return cfg;
}

TabularDataset load_data(const RunConfig& cfg) {
  cfg.validate();
  TabularDataset d;
  if (cfg.get("data.source") == "synthetic") {
    d = generate_synthetic(synthetic_spec(cfg));
  } else {
    d = load_csv(cfg.get("data.path"), Schema::load(cfg.get("data.schema")), split_spec(cfg));
  }

  if (domain_mode(cfg)) {
    const auto index_of = [&](const std::string& value) {
      for (std::size_t i = 0; i < d.s_values.size(); ++i)
        if (d.s_values[i] == value) return static_cast<int>(i);
      throw ConfigError({"domain '" + value + "' is not a value of the s column"});
    };
    const int src = index_of(cfg.get("data.source_domain"));
    const int tgt = index_of(cfg.get("data.target_domain"));
    std::vector<Index> keep;
    for (Index r = 0; r < d.rows(); ++r)
      if (d.s[r] == src || d.s[r] == tgt) keep.push_back(r);
    d = d.subset(keep);
    for (int& s : d.s) s = s == src ? 0 : 1;
    d.s_values = {cfg.get("data.source_domain"), cfg.get("data.target_domain")};
    d.s_states = 2;
  }
  if (parse_bool(cfg.get("data.binarize"), "data.binarize")) d = binarize(std::move(d));
  d.validate();
  return d;
}

std::vector<std::string> likelihood_problems(const ModelConfig& m, const TabularDataset& d) {
  std::vector<std::string> out;
  const Matrix& x = d.x;
  switch (m.likelihood) {
    case LikelihoodKind::bernoulli:
      if (!((x.array() == 0.0) || (x.array() == 1.0)).all())
        out.push_back("bernoulli likelihood needs 0/1 features; set data.binarize = true or choose another model.likelihood");
      break;
    case LikelihoodKind::poisson:
      if (!((x.array() >= 0.0) && (x.array() == x.array().round())).all())
        out.push_back("poisson likelihood needs nonnegative integer features");
      break;
    case LikelihoodKind::gaussian_sigmoid_mean:
      if (!x.allFinite()) out.push_back("features must be finite");
      break;
  }
  return out;
}

std::vector<std::string> store_diff(const ParameterStore& expected, const ParameterStore& found) {
  const auto shape = [](const Parameter& p) {
    return std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols());
  };
  std::vector<std::string> out;
  for (const Parameter& p : expected) {
    auto id = found.find(p.name);
    if (!id) {
      out.push_back("- " + p.name + " " + shape(p));
    } else if (found[*id].value.rows() != p.value.rows() || found[*id].value.cols() != p.value.cols()) {
      out.push_back("- " + p.name + " " + shape(p));
      out.push_back("+ " + p.name + " " + shape(found[*id]));
    }
  }
  for (const Parameter& p : found)
    if (!expected.find(p.name)) out.push_back("+ " + p.name + " " + shape(p));
  return out;
}

namespace {

struct Options {
  std::string config;
  std::string preset;
  std::string data;
  std::string schema;
  bool synthetic = false;
  std::string out;
  bool force = false;
  bool quiet = false;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> gamma;
  std::optional<Index> rff_features;
  std::string convention;
  std::optional<int> workers;
  std::string grid;

  std::string run_dir;
  std::string checkpoint;
  std::string mode;
  std::string split = "test";
  std::string baseline;

  std::string matrix_a;
  std::string matrix_b;
  Index features = kDefaultRffFeatures;
};

KeyValueFile flag_layer(const Options& o) {
  KeyValueFile kv;
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError({"--set expects key=value, got '" + s + "'"});
    kv.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  if (!o.data.empty()) kv.set("data.path", o.data);
  if (!o.schema.empty()) kv.set("data.schema", o.schema);
  if (o.synthetic) kv.set("data.source", "synthetic");
  if (o.seed) {
    const std::string v = std::to_string(*o.seed);
    for (const char* key : {"train.seed", "model.init_seed", "data.split_seed", "synthetic.seed", "eval.seed"})
      kv.set(key, v);
  }
  if (o.epochs) kv.set("train.epochs", std::to_string(*o.epochs));
  if (o.alpha) kv.set("train.alpha", format_double(*o.alpha));
  if (o.beta) kv.set("train.beta", format_double(*o.beta));
  if (o.gamma) kv.set("train.gamma", format_double(*o.gamma));
  if (o.rff_features) kv.set("train.rff_features", std::to_string(*o.rff_features));
  if (!o.convention.empty()) kv.set("train.rff_convention", o.convention);
  if (o.workers) kv.set("train.workers", std::to_string(*o.workers));
  if (!o.grid.empty()) kv.set("train.beta_grid", o.grid);
  if (!o.mode.empty()) kv.set("eval.mode", o.mode);
  return kv;
}

RunConfig config_from_options(const Options& o) {
  std::optional<KeyValueFile> file;
  if (!o.config.empty()) file = KeyValueFile::load(o.config);
  std::optional<std::string> preset;
  if (!o.preset.empty()) preset = o.preset;
  RunConfig cfg = resolve(preset, file, "file:" + o.config, flag_layer(o));
  cfg.validate();
  return cfg;
}

/// Data-dependent checks that must pass before anything is written.
ModelConfig checked_model(const RunConfig& cfg, const TabularDataset& d) {
  const ModelConfig m = cfg.model(d);
  auto problems = likelihood_problems(m, d);
  if (!problems.empty()) throw ConfigError(problems);
  return m;
}

void prepare_output(const fs::path& dir, bool force) {
  if (dir.empty()) throw ConfigError({"--out is required"});
  if (fs::exists(dir) && !fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw ConfigError({"output directory " + dir.string() + " is not empty; pass --force to overwrite"});
  fs::create_directories(dir);
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  os << text;
  if (!os) throw IoError("write failed: " + p.string());
}

/// Records data-derived sizes in the config and saves it.
void save_resolved(RunConfig& cfg, const ModelConfig& m, const fs::path& dir) {
  for (const auto& [key, v] : {std::pair<const char*, Index>{"model.x_dim", m.x_dim},
                               {"model.s_dim", m.s_dim},
                               {"model.y_dim", m.y_dim}}) {
    if (cfg.get(key) == kAuto) cfg.set(key, std::to_string(v), "data");
  }
  cfg.to_keyvalue().save(dir / "config.txt");
}

EpochCallback progress(std::ostream& out, bool quiet) {
  if (quiet) return {};
  return [&out](const EpochLog& e) {
    out << "epoch " << e.epoch << "  loss " << format_double(e.total) << "  val_objective "
        << format_double(e.val_objective) << "  val_y_accuracy " << format_double(e.val_y_accuracy) << '\n';
  };
}

void save_training(const TrainResult& r, const fs::path& dir) {
  save_checkpoint(dir / "checkpoint.txt", r.best_params);
  save_checkpoint(dir / "final.txt", r.final_params);
  r.log.save(dir / "train_log.csv");
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = config_from_options(o);
  const TabularDataset d = load_data(cfg);
  const ModelConfig mcfg = checked_model(cfg, d);
  const TrainConfig tcfg = cfg.train();
  prepare_output(o.out, o.force);
  save_resolved(cfg, mcfg, o.out);

  VfaeModel model(mcfg);
  try {
    const TrainResult r = train(model, d, tcfg, progress(out, o.quiet));
    save_training(r, o.out);
    out << "best epoch " << r.best_epoch << (r.stopped_early ? " (stopped early)" : "");
    if (r.gamma > 0.0) out << ", gamma " << format_double(r.gamma);
    out << '\n';
    out << "wrote " << (fs::path(o.out) / "checkpoint.txt").string() << '\n';
  } catch (const DivergenceError& e) {
    save_checkpoint(fs::path(o.out) / "last_good.txt", e.last_good());
    err << "error: " << e.what() << '\n';
    err << "parameters before the failing step: " << (fs::path(o.out) / "last_good.txt").string() << '\n';
    return kDivergence;
  }
  return kOk;
}

int cmd_select_beta(const Options& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = config_from_options(o);
  const TabularDataset d = load_data(cfg);
  const ModelConfig mcfg = checked_model(cfg, d);
  const TrainConfig tcfg = cfg.train();
  prepare_output(o.out, o.force);
  save_resolved(cfg, mcfg, o.out);

  try {
    const BetaSelection sel = select_beta([&] { return VfaeModel(mcfg); }, d, tcfg.beta_grid, tcfg);
    write_text(fs::path(o.out) / "beta_table.csv", sel.to_csv());
    save_training(sel.best, o.out);
    cfg.set("train.beta", format_double(sel.best_beta), "select-beta");
    cfg.to_keyvalue().save(fs::path(o.out) / "config.txt");
    out << sel.to_csv();
    out << "selected beta " << format_double(sel.best_beta) << '\n';
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kDivergence;
  }
  return kOk;
}

struct LoadedRun {
  RunConfig cfg;
  TabularDataset data;
  std::optional<VfaeModel> model;
};

LoadedRun load_run(const Options& o, std::ostream& err, int& code) {
  if (o.run_dir.empty()) throw ConfigError({"--run is required"});
  const fs::path run_config = fs::path(o.run_dir) / "config.txt";
  const KeyValueFile recorded = KeyValueFile::load(run_config);

  Options flags = o;
  flags.config.clear();
  flags.preset.clear();
  RunConfig cfg = resolve(std::nullopt, recorded, "file:" + run_config.string(), flag_layer(flags));
  LoadedRun r{cfg, {}, std::nullopt};

  if (!o.config.empty()) {
    const RunConfig other = resolve(std::nullopt, KeyValueFile::load(o.config), "file:" + o.config, {});
    std::vector<std::string> diff;
    for (const auto& [k, v] : cfg.settings()) {
      if (k.rfind("model.", 0) != 0) continue;
      const std::string& theirs = other.get(k);
      if (theirs != v.value && theirs != kAuto) diff.push_back(k + ": run has " + v.value + ", config has " + theirs);
    }
    if (!diff.empty()) {
      err << "error: " << o.config << " does not match the model recorded in " << run_config.string() << '\n';
      for (const auto& line : diff) err << "  " << line << '\n';
      code = kInvalid;
      return r;
    }
  }

  cfg.validate();
  r.data = load_data(cfg);
  r.model.emplace(cfg.model(r.data));
  const fs::path ckpt = o.checkpoint.empty() ? fs::path(o.run_dir) / "checkpoint.txt" : fs::path(o.checkpoint);
  const ParameterStore stored = load_checkpoint(ckpt);
  const auto diff = store_diff(r.model->params(), stored);
  if (!diff.empty()) {
    err << "error: checkpoint " << ckpt.string() << " does not match the model config (- expected, + found)\n";
    for (const auto& line : diff) err << "  " << line << '\n';
    code = kInvalid;
    return r;
  }
  r.model->params().assign_values(stored);
  return r;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  int code = kOk;
  LoadedRun r = load_run(o, err, code);
  if (code != kOk) return code;
  EvalConfig ecfg = r.cfg.eval();
  if (o.seed) ecfg.seed = *o.seed;

  EvaluationReport report;
  if (o.baseline == "raw-x") {
    ecfg.model_id = "raw-x";
    report = evaluate_embeddings(features_as_embedding(r.data, Split::train), features_as_embedding(r.data, Split::test),
                                 ecfg);
  } else if (!o.baseline.empty()) {
    throw ConfigError({"unknown baseline '" + o.baseline + "' (raw-x)"});
  } else {
    report = evaluate_model(*r.model, r.data, ecfg);
  }

  nlohmann::ordered_json j = nlohmann::ordered_json::parse(report.to_json());
  if (domain_mode(r.cfg) && o.baseline.empty()) {
    std::vector<Index> target_test;
    for (Index i : r.data.indices(Split::test))
      if (r.data.s[i] == 1 && r.data.y[i] >= 0) target_test.push_back(i);
    if (!target_test.empty()) {
      j["target_y_accuracy"] =
          y_accuracy(*r.model, r.data, target_test, ecfg.mode, derive_seed(ecfg.seed, "predict-target"));
    }
  }

  const fs::path dir = o.out.empty() ? fs::path(o.run_dir) : fs::path(o.out);
  fs::create_directories(dir);
  const std::string stem = o.baseline.empty() ? "report" : "report_" + o.baseline;
  write_text(dir / (stem + ".json"), j.dump(2) + "\n");
  write_text(dir / (stem + ".txt"), report.to_table());
  out << report.to_table();
  if (j.contains("target_y_accuracy")) out << "target_y_accuracy " << format_double(j["target_y_accuracy"].get<double>()) << '\n';
  return kOk;
}

int cmd_embed(const Options& o, std::ostream& out, std::ostream& err) {
  int code = kOk;
  LoadedRun r = load_run(o, err, code);
  if (code != kOk) return code;
  if (o.out.empty()) throw ConfigError({"--out is required"});
  if (fs::exists(o.out) && !o.force) throw ConfigError({o.out + " exists; pass --force to overwrite"});
  const Split part = parse_split(o.split);
  const SampleMode mode = parse_sample_mode(o.mode.empty() ? r.cfg.get("eval.mode") : o.mode);
  const std::uint64_t seed = o.seed ? *o.seed : parse_int(r.cfg.get("eval.seed"), "eval.seed");
  const EmbeddingSet e = embed_split(*r.model, r.data, part, mode, seed, fs::path(o.run_dir).filename().string());
  export_embeddings(e, o.out);
  out << "wrote " << e.rows() << " rows of " << e.z.cols() << "-D " << to_string(mode) << " embeddings to " << o.out
      << '\n';
  return kOk;
}

int cmd_mmd_test(const Options& o, std::ostream& out) {
  const Matrix a = read_matrix_csv(o.matrix_a);
  const Matrix b = read_matrix_csv(o.matrix_b);
  if (a.cols() != b.cols()) {
    throw DimensionError("width mismatch: " + o.matrix_a + " has " + std::to_string(a.cols()) + " columns, " +
                         o.matrix_b + " has " + std::to_string(b.cols()));
  }
  if (a.rows() < 1 || b.rows() < 1) throw ContractError("mmd-test: both files need at least one row");
  const RffConvention convention = parse_rff_convention(o.convention.empty() ? "standard" : o.convention);

  double gamma = o.gamma.value_or(0.0);
  std::string gamma_source = "given";
  if (gamma <= 0.0) {
    Matrix pooled(a.rows() + b.rows(), a.cols());
    pooled << a, b;
    gamma_source = "median heuristic";
    try {
      gamma = median_heuristic_gamma(pooled);
    } catch (const ContractError&) {
      gamma = 1.0;
      gamma_source = "fallback, all rows coincide";
    }
  }
  const std::uint64_t seed = o.seed.value_or(1);
  const GaussianKernel kernel(gamma);
  const double exact = mmd_exact(a, b, kernel);
  const RffProjection proj(a.cols(), o.features, gamma, derive_seed(seed, "rff"), convention);
  const double approx = mmd_rff(a, b, proj);
  const double gap = std::abs(approx - exact);

  out << "rows " << a.rows() << " " << b.rows() << '\n';
  out << "gamma " << format_double(gamma) << " (" << gamma_source << ")\n";
  out << "mmd_exact " << format_double(exact) << '\n';
  out << "mmd_rff " << format_double(approx) << '\n';
  out << "features " << proj.features() << '\n';
  out << "convention " << to_string(convention) << '\n';
  out << "rff_kernel_gamma " << format_double(proj.approximated_kernel().gamma) << '\n';
  out << "abs_gap " << format_double(gap) << '\n';
  out << "rel_gap " << (exact > 0.0 ? format_double(gap / exact) : std::string("n/a")) << '\n';
  return kOk;
}

void add_config_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "key = value config file");
  cmd->add_option("--preset", o.preset, "adult, german, health, amazon or yaleb");
  cmd->add_option("--data", o.data, "dataset CSV (data.path)");
  cmd->add_option("--schema", o.schema, "schema file (data.schema)");
  cmd->add_flag("--synthetic", o.synthetic, "generate synthetic data (data.source = synthetic)");
  cmd->add_option("--out", o.out, "run directory");
  cmd->add_flag("--force", o.force, "write into a non-empty run directory");
  cmd->add_flag("--quiet", o.quiet, "no per-epoch progress");
  cmd->add_option("--seed", o.seed, "seed for training, initialization, splits and evaluation");
  cmd->add_option("--epochs", o.epochs, "train.epochs");
  cmd->add_option("--alpha", o.alpha, "train.alpha");
  cmd->add_option("--beta", o.beta, "train.beta");
  cmd->add_option("--gamma", o.gamma, "train.gamma (0 = median heuristic)");
  cmd->add_option("--rff-features", o.rff_features, "train.rff_features");
  cmd->add_option("--convention", o.convention, "train.rff_convention: standard or paper");
  cmd->add_option("--workers", o.workers, "train.workers");
  cmd->add_option("--set", o.sets, "key=value override, repeatable");
}

void add_run_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--run", o.run_dir, "run directory written by train")->required();
  cmd->add_option("--checkpoint", o.checkpoint, "parameters to load (default <run>/checkpoint.txt)");
  cmd->add_option("--config", o.config, "expected config; refused if its model differs from the run");
  cmd->add_option("--mode", o.mode, "sample or mean");
  cmd->add_option("--seed", o.seed, "evaluation seed (default eval.seed)");
  cmd->add_option("--set", o.sets, "key=value override, repeatable");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational fair autoencoder toolkit", "vfae"};
  app.require_subcommand(1);
  Options o;

  auto* train_cmd = app.add_subcommand("train", "train a model and write a run directory");
  add_config_options(train_cmd, o);

  auto* select_cmd = app.add_subcommand("select-beta", "train one model per beta and keep the best");
  add_config_options(select_cmd, o);
  select_cmd->add_option("--grid", o.grid, "comma-separated beta values (train.beta_grid)");

  auto* eval_cmd = app.add_subcommand("evaluate", "probe a trained model and write report.json / report.txt");
  add_run_options(eval_cmd, o);
  eval_cmd->add_option("--out", o.out, "report directory (default: the run directory)");
  eval_cmd->add_option("--baseline", o.baseline, "raw-x: evaluate the input features instead of the model");

  auto* embed_cmd = app.add_subcommand("embed", "write z1 embeddings of one split");
  add_run_options(embed_cmd, o);
  embed_cmd->add_option("--out", o.out, "output CSV")->required();
  embed_cmd->add_option("--split", o.split, "train, validation or test");
  embed_cmd->add_flag("--force", o.force, "overwrite an existing file");

  auto* mmd_cmd = app.add_subcommand("mmd-test", "exact and random-feature MMD between two CSV matrices");
  mmd_cmd->add_option("a", o.matrix_a, "first sample")->required();
  mmd_cmd->add_option("b", o.matrix_b, "second sample")->required();
  mmd_cmd->add_option("--features", o.features, "random features D");
  mmd_cmd->add_option("--convention", o.convention, "standard or paper");
  mmd_cmd->add_option("--gamma", o.gamma, "kernel bandwidth (default: median heuristic on pooled rows)");
  mmd_cmd->add_option("--seed", o.seed, "projection seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*train_cmd) return cmd_train(o, out, err);
    if (*select_cmd) return cmd_select_beta(o, out, err);
    if (*eval_cmd) return cmd_evaluate(o, out, err);
    if (*embed_cmd) return cmd_embed(o, out, err);
    if (*mmd_cmd) return cmd_mmd_test(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  }
  return kInvalid;
}

}  // namespace vfae::cli
