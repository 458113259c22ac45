#include "vfae/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "vfae/errors.hpp"
#include "vfae/probes.hpp"
#include "vfae/random.hpp"

namespace vfae {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix gather(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    const std::string t = trim(part);
    if (!t.empty()) out.push_back(parse_double(t, what));
  }
  return out;
}

// Within-group shuffles interleaved by relative position, so any run of
// consecutive rows holds each group in proportion to within one row.
std::vector<Index> stratified_order(const TabularDataset& d, std::vector<Index> pool, std::mt19937_64& rng) {
  std::vector<std::vector<Index>> groups(static_cast<std::size_t>(std::max(1, d.s_states)));
  for (Index r : pool) groups[static_cast<std::size_t>(d.s[static_cast<std::size_t>(r)])].push_back(r);
  struct Keyed {
    double key;
    std::size_t group;
    Index row;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(pool.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    shuffle_in_place(groups[g], rng);
    const double n = static_cast<double>(groups[g].size());
    for (std::size_t j = 0; j < groups[g].size(); ++j) {
      keyed.push_back({(static_cast<double>(j) + 0.5) / n, g, groups[g][j]});
    }
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return a.key != b.key ? a.key < b.key : a.group < b.group;
  });
  std::vector<Index> out;
  out.reserve(keyed.size());
  for (const auto& k : keyed) out.push_back(k.row);
  return out;
}

std::vector<Index> epoch_order(const TabularDataset& d, std::vector<Index> pool, const TrainConfig& cfg,
                               std::mt19937_64& rng) {
  if (cfg.stratify_by_s) return stratified_order(d, std::move(pool), rng);
  shuffle_in_place(pool, rng);
  return pool;
}

void check_dims(const VfaeModel& model, const TabularDataset& d) {
  const ModelConfig& c = model.config();
  std::vector<std::string> problems;
  if (c.x_dim != d.cols()) problems.push_back("x_dim " + std::to_string(c.x_dim) + " vs " + std::to_string(d.cols()) + " features");
  if (c.s_dim != d.s_states) problems.push_back("s_dim " + std::to_string(c.s_dim) + " vs " + std::to_string(d.s_states) + " s states");
  if (d.has_labels() && c.y_dim != d.y_classes) {
    problems.push_back("y_dim " + std::to_string(c.y_dim) + " vs " + std::to_string(d.y_classes) + " classes");
  }
  if (!problems.empty()) {
    std::string msg = "model does not fit the dataset:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw DimensionError(msg);
  }
}

LossBreakdown loss_on(const VfaeModel& model, Binder& b, const Batch& batch, const TrainConfig& cfg,
                      const RffProjection* rff, NoiseSource& noise) {
  if (cfg.model_kind == ModelKind::unsupervised) return model.elbo_unsupervised(b, batch, noise, cfg.objective, rff);
  return model.vfae_loss(b, batch, cfg.objective, rff, noise);
}

void accumulate(EpochLog& acc, const LossBreakdown& l) {
  acc.total += l.total.scalar();
  acc.reconstruction += l.reconstruction;
  acc.kl_z2 += l.kl_z2;
  acc.kl_y += l.kl_y;
  acc.classification += l.classification;
  acc.mmd += l.mmd_term;
  acc.z1_regularizer += l.z1_regularizer;
}

void divide(EpochLog& acc, double n) {
  for (double* v : {&acc.total, &acc.reconstruction, &acc.kl_z2, &acc.kl_y, &acc.classification, &acc.mmd,
                    &acc.z1_regularizer}) {
    *v /= n;
  }
}

// Tracked-parameter forward pass for a training step.
LossBreakdown loss_on(VfaeModel& model, Tape& tape, const Batch& batch, const TrainConfig& cfg,
                      const RffProjection* rff, NoiseSource& noise) {
  if (cfg.model_kind == ModelKind::unsupervised) return model.elbo_unsupervised(tape, batch, noise, cfg.objective, rff);
  return model.vfae_loss(tape, batch, cfg.objective, rff, noise);
}

}  // namespace

std::string to_string(ModelKind k) { return k == ModelKind::vfae ? "vfae" : "unsupervised"; }

ModelKind parse_model_kind(const std::string& name) {
  const std::string t = trim(name);
  if (t == "vfae") return ModelKind::vfae;
  if (t == "unsupervised" || t == "vae") return ModelKind::unsupervised;
  throw ContractError("unknown model kind '" + name + "' (vfae, unsupervised)");
}

// ---- config -----------------------------------------------------------------

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (epochs < 0) problems.push_back("epochs must be >= 0");
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (objective.mmd_active() && batch_size < 2) problems.push_back("batch_size must be >= 2 when the MMD penalty is active");
  try {
    objective.validate();
  } catch (const ContractError& e) {
    problems.push_back(e.what());
  }
  if (!(labeled_fraction >= 0.0 && labeled_fraction <= 1.0)) problems.push_back("labeled_fraction must lie in [0, 1]");
  if (patience < 0) problems.push_back("patience must be >= 0");
  if (!(averaging_decay >= 0.0 && averaging_decay < 1.0)) problems.push_back("averaging_decay must lie in [0, 1)");
  if (!(adam.lr >= 0.0)) problems.push_back("lr must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) problems.push_back("adam beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) problems.push_back("adam beta2 must lie in [0, 1)");
  if (!(adam.eps > 0.0)) problems.push_back("adam eps must be > 0");
  if (rff_features < 1) problems.push_back("rff_features must be >= 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) problems.push_back("gamma must be >= 0 (0 = median heuristic)");
  if (workers < 1) problems.push_back("workers must be >= 1");
  for (double b : beta_grid)
    if (!(b >= 0.0) || !std::isfinite(b)) {
      problems.push_back("beta_grid entries must be finite and >= 0");
      break;
    }
  if (!problems.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ContractError(msg);
  }
}

void TrainConfig::write(KeyValueFile& kv) const {
  kv.set("train.epochs", std::to_string(epochs));
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.alpha", format_double(objective.alpha));
  kv.set("train.beta", format_double(objective.beta));
  kv.set("train.use_mmd", objective.use_mmd ? "true" : "false");
  kv.set("train.supervised_only", objective.supervised_only ? "true" : "false");
  kv.set("train.stratify_by_s", stratify_by_s ? "true" : "false");
  kv.set("train.labeled_fraction", format_double(labeled_fraction));
  kv.set("train.unlabeled_domain", std::to_string(unlabeled_domain));
  std::string grid;
  for (std::size_t i = 0; i < beta_grid.size(); ++i) grid += (i ? ", " : "") + format_double(beta_grid[i]);
  kv.set("train.beta_grid", grid);
  kv.set("train.patience", std::to_string(patience));
  kv.set("train.averaging_decay", format_double(averaging_decay));
  kv.set("train.lr", format_double(adam.lr));
  kv.set("train.adam_beta1", format_double(adam.beta1));
  kv.set("train.adam_beta2", format_double(adam.beta2));
  kv.set("train.adam_eps", format_double(adam.eps));
  kv.set("train.rff_features", std::to_string(rff_features));
  kv.set("train.rff_convention", to_string(rff_convention));
  kv.set("train.gamma", format_double(gamma));
  kv.set("train.model_kind", to_string(model_kind));
  kv.set("train.workers", std::to_string(workers));
  kv.set("train.check_finite", check_finite ? "true" : "false");
}

TrainConfig TrainConfig::read(const KeyValueFile& kv) {
  TrainConfig c;
  auto num = [&](const char* key, double& out) {
    if (auto v = kv.get(key)) out = parse_double(*v, key);
  };
  auto integer = [&](const char* key, auto& out) {
    if (auto v = kv.get(key)) out = static_cast<std::remove_reference_t<decltype(out)>>(parse_int(*v, key));
  };
  auto flag = [&](const char* key, bool& out) {
    if (auto v = kv.get(key)) out = parse_bool(*v, key);
  };
  integer("train.epochs", c.epochs);
  integer("train.batch_size", c.batch_size);
  if (auto v = kv.get("train.seed")) c.seed = static_cast<std::uint64_t>(parse_int(*v, "train.seed"));
  num("train.alpha", c.objective.alpha);
  num("train.beta", c.objective.beta);
  flag("train.use_mmd", c.objective.use_mmd);
  flag("train.supervised_only", c.objective.supervised_only);
  flag("train.stratify_by_s", c.stratify_by_s);
  num("train.labeled_fraction", c.labeled_fraction);
  integer("train.unlabeled_domain", c.unlabeled_domain);
  if (auto v = kv.get("train.beta_grid")) c.beta_grid = parse_list(*v, "train.beta_grid");
  integer("train.patience", c.patience);
  num("train.averaging_decay", c.averaging_decay);
  num("train.lr", c.adam.lr);
  num("train.adam_beta1", c.adam.beta1);
  num("train.adam_beta2", c.adam.beta2);
  num("train.adam_eps", c.adam.eps);
  integer("train.rff_features", c.rff_features);
  if (auto v = kv.get("train.rff_convention")) c.rff_convention = parse_rff_convention(*v);
  num("train.gamma", c.gamma);
  if (auto v = kv.get("train.model_kind")) c.model_kind = parse_model_kind(*v);
  integer("train.workers", c.workers);
  flag("train.check_finite", c.check_finite);
  return c;
}

// ---- batches ------------------------------------------------------------------

bool row_is_labeled(const TabularDataset& d, Index row, const TrainConfig& cfg) {
  const auto r = static_cast<std::size_t>(row);
  return cfg.model_kind == ModelKind::vfae && d.y[r] >= 0 && d.s[r] != cfg.unlabeled_domain;
}

std::vector<std::vector<Index>> make_batches(const TabularDataset& d, std::span<const Index> rows,
                                             const TrainConfig& cfg, std::uint64_t epoch_seed) {
  if (rows.empty()) throw ContractError("make_batches: no rows");
  if (cfg.batch_size < 1) throw ContractError("make_batches: batch_size must be >= 1");
  std::mt19937_64 rng(epoch_seed);
  std::vector<Index> labeled, unlabeled;
  for (Index r : rows) (row_is_labeled(d, r, cfg) ? labeled : unlabeled).push_back(r);
  const auto B = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::vector<Index>> out;

  const bool mixing = !labeled.empty() && !unlabeled.empty() && cfg.labeled_fraction > 0.0 &&
                      cfg.labeled_fraction < 1.0 && B >= 2;
  if (!mixing) {
    const std::vector<Index> order = epoch_order(d, std::vector<Index>(rows.begin(), rows.end()), cfg, rng);
    for (std::size_t start = 0; start < order.size(); start += B) {
      out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + B)));
    }
    if (out.size() > 1 && out.back().size() == 1) {
      out[out.size() - 2].push_back(out.back()[0]);
      out.pop_back();
    }
    return out;
  }

  const auto n_l = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(static_cast<double>(B) * cfg.labeled_fraction)), 1, B - 1);
  const std::size_t n_u = B - n_l;
  const std::size_t batches = std::max((labeled.size() + n_l - 1) / n_l, (unlabeled.size() + n_u - 1) / n_u);

  // Rows for `count` batches of `k` each; the pool is reshuffled when it runs
  // out, except when it alone fills the last batch (then the batch is short).
  auto stream = [&](const std::vector<Index>& pool, std::size_t k) {
    const bool partition = (pool.size() + k - 1) / k == batches;
    std::vector<Index> rows_out;
    const std::size_t want = partition ? pool.size() : batches * k;
    while (rows_out.size() < want) {
      const auto next = epoch_order(d, pool, cfg, rng);
      rows_out.insert(rows_out.end(), next.begin(), next.end());
    }
    rows_out.resize(want);
    return rows_out;
  };
  const std::vector<Index> ls = stream(labeled, n_l);
  const std::vector<Index> us = stream(unlabeled, n_u);
  for (std::size_t b = 0; b < batches; ++b) {
    std::vector<Index> batch;
    for (std::size_t i = b * n_l; i < std::min(ls.size(), (b + 1) * n_l); ++i) batch.push_back(ls[i]);
    for (std::size_t i = b * n_u; i < std::min(us.size(), (b + 1) * n_u); ++i) batch.push_back(us[i]);
    out.push_back(std::move(batch));
  }
  return out;
}

Batch to_batch(const TabularDataset& d, std::span<const Index> rows, const TrainConfig& cfg) {
  Batch b;
  b.x = gather(d.x, rows);
  std::vector<int> s, y;
  for (Index r : rows) {
    const bool lab = row_is_labeled(d, r, cfg);
    s.push_back(d.s[static_cast<std::size_t>(r)]);
    y.push_back(lab ? d.y[static_cast<std::size_t>(r)] : -1);
    b.labeled.push_back(lab ? 1 : 0);
  }
  b.s = one_hot(s, d.s_states);
  b.y = one_hot(y, std::max(1, d.y_classes));
  return b;
}

// ---- logs -----------------------------------------------------------------------

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out << "epoch,total,reconstruction,kl_z2,kl_y,classification,mmd,val_y_accuracy,z1_regularizer,val_objective\n";
  for (const auto& e : epochs) {
    out << e.epoch;
    for (double v : {e.total, e.reconstruction, e.kl_z2, e.kl_y, e.classification, e.mmd, e.val_y_accuracy,
                     e.z1_regularizer, e.val_objective}) {
      out << "," << format_double(v);
    }
    out << "\n";
  }
  return out.str();
}

void TrainLog::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_csv();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string BetaSelection::to_csv() const {
  std::ostringstream out;
  out << "beta,val_y_accuracy,probe_s_accuracy,chance_s,score,best_epoch,selected\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const BetaRow& r = rows[i];
    out << format_double(r.beta) << "," << format_double(r.val_y_accuracy) << "," << format_double(r.probe_s_accuracy)
        << "," << format_double(r.chance_s) << "," << format_double(r.score) << "," << r.best_epoch << ","
        << (i == best_index ? 1 : 0) << "\n";
  }
  return out.str();
}

// ---- training -------------------------------------------------------------------

RffProjection make_rff(const VfaeModel& model, const TabularDataset& d, const TrainConfig& cfg) {
  double gamma = cfg.gamma;
  if (gamma <= 0.0) {
    const auto train_rows = d.indices(Split::train);
    if (train_rows.size() < 2) throw ContractError("make_rff: the median heuristic needs at least 2 training rows");
    const std::span<const Index> head(train_rows.data(), std::min<std::size_t>(train_rows.size(), 500));
    NoiseSource noise(derive_seed(cfg.seed, "gamma"));
    gamma = median_heuristic_gamma(model.embed(gather(d.x, head), d.s_one_hot(head), SampleMode::sample, noise));
  }
  return RffProjection(model.config().z1_dim, cfg.rff_features, gamma, derive_seed(cfg.seed, "rff"), cfg.rff_convention);
}

EpochLog mean_loss(const VfaeModel& model, const TabularDataset& d, std::span<const Index> rows,
                        const TrainConfig& cfg, const RffProjection* rff, std::uint64_t noise_seed, Index chunk) {
  if (rows.empty()) throw ContractError("mean_loss: no rows");
  NoiseSource noise(noise_seed);
  EpochLog acc;
  for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(chunk)) {
    const auto part = rows.subspan(start, std::min<std::size_t>(static_cast<std::size_t>(chunk), rows.size() - start));
    Tape tape(cfg.check_finite);
    Binder b(tape, model.params());
    accumulate(acc, loss_on(model, b, to_batch(d, part, cfg), cfg, rff, noise));
  }
  divide(acc, static_cast<double>(rows.size()));
  return acc;
}

double y_accuracy(const VfaeModel& model, const TabularDataset& d, std::span<const Index> rows, SampleMode mode,
                  std::uint64_t noise_seed) {
  std::vector<Index> labeled;
  for (Index r : rows)
    if (d.y[static_cast<std::size_t>(r)] >= 0) labeled.push_back(r);
  if (labeled.empty()) return kNaN;
  NoiseSource noise(noise_seed);
  const Matrix p = model.predict(gather(d.x, labeled), d.s_one_hot(labeled), mode, noise);
  return accuracy(argmax_rows(p), d.labels(labeled));
}

TrainResult train(VfaeModel& model, const TabularDataset& d, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  d.validate();
  check_dims(model, d);
  const std::vector<Index> train_rows = d.indices(Split::train);
  const std::vector<Index> val_rows = d.indices(Split::validation);
  if (train_rows.empty()) throw ContractError("train: the training split is empty");

  std::optional<RffProjection> rff;
  if (cfg.objective.mmd_active()) rff.emplace(make_rff(model, d, cfg));
  const RffProjection* rff_ptr = rff ? &*rff : nullptr;

  TrainResult result;
  result.gamma = rff ? rff->gamma() : 0.0;
  NoiseSource noise(derive_seed(cfg.seed, "noise"));
  Adam adam(model.params(), cfg.adam);
  ParameterAverager averager(model.params(), cfg.averaging_decay);
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  ParameterStore last_good = model.params();

  auto finish_epoch = [&](int epoch, EpochLog row) {
    row.epoch = epoch;
    ParameterStore avg = averager.averaged(model.params());
    row.val_y_accuracy = kNaN;
    row.val_objective = kNaN;
    if (!val_rows.empty()) {
      VfaeModel eval = model;
      eval.params().assign_values(avg);
      row.val_y_accuracy = y_accuracy(eval, d, val_rows, SampleMode::sample, derive_seed(cfg.seed, "val-predict"));
      row.val_objective = mean_loss(eval, d, val_rows, cfg, rff_ptr, derive_seed(cfg.seed, "val-noise")).total;
      if (row.val_objective < best_val) {
        best_val = row.val_objective;
        result.best_params = avg;
        result.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    result.log.epochs.push_back(row);
    if (on_epoch) on_epoch(row);
  };

  {
    EpochLog row;
    const auto plan = make_batches(d, train_rows, cfg, derive_seed(cfg.seed, "batches", 0));
    try {
      for (const auto& rows : plan) {
        Tape tape(cfg.check_finite);
        Binder b(tape, std::as_const(model.params()));
        accumulate(row, loss_on(model, b, to_batch(d, rows, cfg), cfg, rff_ptr, noise));
      }
    } catch (const NumericError& e) {
      throw DivergenceError(std::string("loss is not finite at initialization: ") + e.what(), last_good, 0);
    }
    divide(row, static_cast<double>(train_rows.size()));
    finish_epoch(0, row);
  }

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochLog row;
    const auto plan = make_batches(d, train_rows, cfg, derive_seed(cfg.seed, "batches", static_cast<std::uint64_t>(epoch)));
    for (const auto& rows : plan) {
      try {
        Tape tape(cfg.check_finite);
        const LossBreakdown loss = loss_on(model, tape, to_batch(d, rows, cfg), cfg, rff_ptr, noise);
        if (!std::isfinite(loss.total.scalar())) throw NumericError("loss is not finite");
        tape.backward(loss.total);
        ParameterStore before = model.params();
        adam.step(model.params());
        last_good = std::move(before);
        accumulate(row, loss);
      } catch (const NumericError& e) {
        throw DivergenceError(std::string("training diverged in epoch ") + std::to_string(epoch) + ": " + e.what(),
                              last_good, epoch);
      }
      averager.update(model.params());
    }
    divide(row, static_cast<double>(train_rows.size()));
    finish_epoch(epoch, row);
    if (!val_rows.empty() && cfg.patience > 0 && since_best >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }

  result.final_params = model.params();
  result.averaged_params = averager.averaged(model.params());
  if (val_rows.empty()) {
    result.best_params = result.averaged_params;
    result.best_epoch = result.log.epochs.back().epoch;
  }
  return result;
}

// ---- beta selection --------------------------------------------------------------

BetaSelection select_beta(const std::function<VfaeModel()>& factory, const TabularDataset& d,
                          const std::vector<double>& grid, const TrainConfig& cfg) {
  if (grid.empty()) throw ContractError("select_beta: empty beta grid");
  cfg.validate();
  const std::vector<Index> train_rows = d.indices(Split::train);
  const std::vector<Index> val_rows = d.indices(Split::validation);
  if (val_rows.empty()) throw ContractError("select_beta: the validation split is empty");

  std::vector<BetaRow> rows(grid.size());
  std::vector<std::optional<TrainResult>> results(grid.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        TrainConfig c = cfg;
        c.objective.beta = grid[i];
        c.seed = derive_seed(cfg.seed, "beta-grid", i);
        c.workers = 1;
        VfaeModel model = factory();
        TrainResult r = train(model, d, c);
        model.params().assign_values(r.best_params);

        BetaRow row;
        row.beta = grid[i];
        row.best_epoch = r.best_epoch;
        row.val_y_accuracy = y_accuracy(model, d, val_rows, SampleMode::sample, derive_seed(c.seed, "score-y"));
        NoiseSource noise(derive_seed(c.seed, "score-embed"));
        const Matrix z_train = model.embed(gather(d.x, train_rows), d.s_one_hot(train_rows), SampleMode::sample, noise);
        const Matrix z_val = model.embed(gather(d.x, val_rows), d.s_one_hot(val_rows), SampleMode::sample, noise);
        const LinearProbe probe = LinearProbe::fit(z_train, d.nuisance(train_rows), d.s_states);
        const std::vector<int> s_val = d.nuisance(val_rows);
        row.probe_s_accuracy = probe.accuracy(z_val, s_val);
        row.chance_s = majority_share(s_val);
        const double y_term = std::isnan(row.val_y_accuracy) ? 0.0 : row.val_y_accuracy;
        row.score = y_term - std::max(0.0, row.probe_s_accuracy - row.chance_s);
        rows[i] = row;
        results[i] = std::move(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), grid.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  BetaSelection sel;
  sel.rows = rows;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].score > rows[sel.best_index].score) sel.best_index = i;
  sel.best_beta = grid[sel.best_index];
  sel.best = std::move(*results[sel.best_index]);
  return sel;
}

}  // namespace vfae
