#include "vfae/model.hpp"

#include <sstream>
#include <utility>

namespace vfae {

namespace {

std::string join_sizes(const std::vector<Index>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<Index> parse_sizes(const std::string& text, const std::string& what) {
  std::vector<Index> out;
  if (trim(text).empty()) return out;
  for (const auto& part : split(text, ',')) out.push_back(parse_int(part, what));
  return out;
}

Var concat2(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat_cols(parts);
}

constexpr Index kPredictChunk = 4096;

}  // namespace

// ---- configuration ----------------------------------------------------------

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (x_dim < 1) problems.push_back("x_dim must be >= 1");
  if (s_dim < 1) problems.push_back("s_dim must be >= 1");
  if (y_dim < 1) problems.push_back("y_dim must be >= 1");
  if (z1_dim < 1) problems.push_back("z1_dim must be >= 1");
  if (z2_dim < 1) problems.push_back("z2_dim must be >= 1");
  for (const auto* h : {&encoder_z1_hidden, &encoder_z2_hidden, &decoder_z1_hidden, &decoder_x_hidden}) {
    for (Index w : *h) {
      if (w < 1) problems.push_back("hidden layer widths must be >= 1");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ContractError(msg);
  }
}

void ModelConfig::write(KeyValueFile& kv) const {
  kv.set("model.x_dim", std::to_string(x_dim));
  kv.set("model.s_dim", std::to_string(s_dim));
  kv.set("model.y_dim", std::to_string(y_dim));
  kv.set("model.z1_dim", std::to_string(z1_dim));
  kv.set("model.z2_dim", std::to_string(z2_dim));
  kv.set("model.encoder_z1_hidden", join_sizes(encoder_z1_hidden));
  kv.set("model.encoder_z2_hidden", join_sizes(encoder_z2_hidden));
  kv.set("model.decoder_z1_hidden", join_sizes(decoder_z1_hidden));
  kv.set("model.decoder_x_hidden", join_sizes(decoder_x_hidden));
  kv.set("model.likelihood", to_string(likelihood));
  kv.set("model.activation", to_string(activation));
  kv.set("model.use_s", use_s ? "true" : "false");
  kv.set("model.init_seed", std::to_string(init_seed));
}

ModelConfig ModelConfig::read(const KeyValueFile& kv) {
  ModelConfig c;
  auto req = [&](const std::string& key) {
    auto v = kv.get(key);
    if (!v) throw ContractError("model config: missing key " + key);
    return *v;
  };
  c.x_dim = parse_int(req("model.x_dim"), "model.x_dim");
  c.s_dim = parse_int(req("model.s_dim"), "model.s_dim");
  c.y_dim = parse_int(req("model.y_dim"), "model.y_dim");
  c.z1_dim = parse_int(req("model.z1_dim"), "model.z1_dim");
  c.z2_dim = parse_int(req("model.z2_dim"), "model.z2_dim");
  c.encoder_z1_hidden = parse_sizes(req("model.encoder_z1_hidden"), "model.encoder_z1_hidden");
  c.encoder_z2_hidden = parse_sizes(req("model.encoder_z2_hidden"), "model.encoder_z2_hidden");
  c.decoder_z1_hidden = parse_sizes(req("model.decoder_z1_hidden"), "model.decoder_z1_hidden");
  c.decoder_x_hidden = parse_sizes(req("model.decoder_x_hidden"), "model.decoder_x_hidden");
  c.likelihood = parse_likelihood(req("model.likelihood"));
  c.activation = parse_activation(kv.get_or("model.activation", "softplus"));
  c.use_s = parse_bool(kv.get_or("model.use_s", "true"), "model.use_s");
  c.init_seed = static_cast<std::uint64_t>(parse_int(req("model.init_seed"), "model.init_seed"));
  c.validate();
  return c;
}

void Objective::validate() const {
  if (!(alpha >= 0.0)) throw ContractError("objective: alpha must be >= 0");
  if (!(beta >= 0.0)) throw ContractError("objective: beta must be >= 0");
}

std::string to_string(SampleMode m) { return m == SampleMode::sample ? "sample" : "mean"; }

SampleMode parse_sample_mode(const std::string& name) {
  if (name == "sample") return SampleMode::sample;
  if (name == "mean") return SampleMode::mean;
  throw ContractError("unknown sampling mode '" + name + "' (sample, mean)");
}

// ---- batches ----------------------------------------------------------------

Matrix one_hot(std::span<const int> labels, Index classes) {
  Matrix m = Matrix::Zero(static_cast<Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 0) continue;
    if (l >= classes) {
      throw ContractError("one_hot: label " + std::to_string(l) + " >= " + std::to_string(classes));
    }
    m(static_cast<Index>(i), l) = 1.0;
  }
  return m;
}

std::vector<int> Batch::s_labels() const {
  std::vector<int> out(static_cast<std::size_t>(s.rows()));
  for (Index i = 0; i < s.rows(); ++i) {
    Index k = 0;
    s.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  return out;
}

std::vector<Index> Batch::labeled_rows() const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < labeled.size(); ++i)
    if (labeled[i]) out.push_back(static_cast<Index>(i));
  return out;
}

std::vector<Index> Batch::unlabeled_rows() const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < labeled.size(); ++i)
    if (!labeled[i]) out.push_back(static_cast<Index>(i));
  return out;
}

void Batch::validate(const ModelConfig& cfg) const {
  const Index n = x.rows();
  if (x.cols() != cfg.x_dim) {
    throw DimensionError("batch x has " + std::to_string(x.cols()) + " columns, model expects " +
                         std::to_string(cfg.x_dim));
  }
  if (s.rows() != n || s.cols() != cfg.s_dim) {
    throw DimensionError("batch s is " + shape_string(s) + ", expected [" + std::to_string(n) + "x" +
                         std::to_string(cfg.s_dim) + "]");
  }
  if (y.rows() != n || y.cols() != cfg.y_dim) {
    throw DimensionError("batch y is " + shape_string(y) + ", expected [" + std::to_string(n) + "x" +
                         std::to_string(cfg.y_dim) + "]");
  }
  if (static_cast<Index>(labeled.size()) != n) throw DimensionError("batch mask length differs from rows");
  for (Index i = 0; i < n; ++i) {
    if (labeled[static_cast<std::size_t>(i)] == 0 && y.row(i).cwiseAbs().sum() != 0.0) {
      throw ContractError("unlabeled batch row " + std::to_string(i) + " carries y content");
    }
  }
}

// ---- model --------------------------------------------------------------------

VfaeModel::VfaeModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.init_seed);
  const bool gaussian = cfg_.likelihood == LikelihoodKind::gaussian_sigmoid_mean;
  encoder_z1_ = Mlp(store_, "encoder_z1", cfg_.x_dim + cfg_.s_dim, cfg_.encoder_z1_hidden,
                    {{"mu", cfg_.z1_dim}, {"log_sigma", cfg_.z1_dim}}, cfg_.activation, rng);
  classifier_y_ = Dense(store_, "classifier_y", cfg_.z1_dim, cfg_.y_dim, rng);
  encoder_z2_ = Mlp(store_, "encoder_z2", cfg_.z1_dim + cfg_.y_dim, cfg_.encoder_z2_hidden,
                    {{"mu", cfg_.z2_dim}, {"log_sigma", cfg_.z2_dim}}, cfg_.activation, rng);
  decoder_z1_ = Mlp(store_, "decoder_z1", cfg_.z2_dim + cfg_.y_dim, cfg_.decoder_z1_hidden,
                    {{"mu", cfg_.z1_dim}, {"log_sigma", cfg_.z1_dim}}, cfg_.activation, rng);
  std::vector<std::pair<std::string, Index>> x_heads{{"natural", cfg_.x_dim}};
  if (gaussian) x_heads.emplace_back("log_sigma", cfg_.x_dim);
  decoder_x_ = Mlp(store_, "decoder_x", cfg_.z1_dim + cfg_.s_dim, cfg_.decoder_x_hidden, x_heads,
                   cfg_.activation, rng);
  // Log-sigma heads start at zero: every Gaussian begins at unit scale
  // instead of somewhere near the clamp, where its gradient vanishes.
  for (const Mlp* net : {&encoder_z1_, &encoder_z2_, &decoder_z1_, &decoder_x_}) {
    if (net->heads().size() > 1) store_[net->heads()[1].weight()].value.setZero();
  }
}

Var VfaeModel::s_input(Tape& t, const Matrix& s) const {
  return t.constant(cfg_.use_s ? s : Matrix::Zero(s.rows(), s.cols()));
}

DiagGaussian VfaeModel::encode_z1(Binder& b, Var x, Var s) const {
  auto heads = encoder_z1_.forward(b, concat2(x, s));
  return DiagGaussian::from_heads(heads[0], heads[1]);
}

CategoricalDist VfaeModel::classify(Binder& b, Var z1) const { return {classifier_y_(b, z1)}; }

DiagGaussian VfaeModel::encode_z2(Binder& b, Var z1, Var y) const {
  auto heads = encoder_z2_.forward(b, concat2(z1, y));
  return DiagGaussian::from_heads(heads[0], heads[1]);
}

DiagGaussian VfaeModel::decode_z1(Binder& b, Var z2, Var y) const {
  auto heads = decoder_z1_.forward(b, concat2(z2, y));
  return DiagGaussian::from_heads(heads[0], heads[1]);
}

Likelihood VfaeModel::decode_x(Binder& b, Var z1, Var s) const {
  auto heads = decoder_x_.forward(b, concat2(z1, s));
  Likelihood l;
  l.kind = cfg_.likelihood;
  l.natural = heads[0];
  if (heads.size() > 1) l.log_sigma = clamp(heads[1], kLogSigmaMin, kLogSigmaMax);
  return l;
}

VfaeModel::ClassTerms VfaeModel::class_terms(Binder& b, Var z1, Var y, NoiseSource& noise) const {
  DiagGaussian q2 = encode_z2(b, z1, y);
  Var z2 = sample_reparam(q2, noise);
  DiagGaussian p1 = decode_z1(b, z2, y);
  return {kl_diag_gaussian_std(q2), gaussian_log_prob(p1, z1)};
}

LossBreakdown VfaeModel::elbo_unsupervised(Binder& b, const Batch& batch, NoiseSource& noise,
                                           const Objective& obj, const RffProjection* rff) const {
  batch.validate(cfg_);
  obj.validate();
  Tape& t = b.tape();
  Var s = s_input(t, batch.s);
  DiagGaussian q = encode_z1(b, t.constant(batch.x), s);
  Var z = sample_reparam(q, noise);
  Var log_px = log_prob(decode_x(b, z, s), batch.x);
  Var kl = kl_diag_gaussian_std(q);

  LossBreakdown out;
  out.z1 = z;
  out.reconstruction = -log_px.value().sum();
  out.z1_regularizer = kl.value().sum();
  Var total = sum(kl - log_px);
  if (obj.mmd_active()) {
    if (!rff) throw ContractError("MMD enabled but no random-feature projection supplied");
    const auto groups = batch.s_labels();
    Var pen = mmd_penalty(z, groups, static_cast<int>(cfg_.s_dim), *rff);
    out.mmd_raw = pen.scalar();
    Var term = pen * (obj.beta * static_cast<double>(batch.rows()));
    out.mmd_term = term.scalar();
    total = total + term;
  }
  out.total = total;
  return out;
}

LossBreakdown VfaeModel::elbo_unsupervised(Tape& tape, const Batch& batch, NoiseSource& noise,
                                           const Objective& obj, const RffProjection* rff) {
  Binder b(tape, store_);
  return std::as_const(*this).elbo_unsupervised(b, batch, noise, obj, rff);
}

Var VfaeModel::supervised_bound(Binder& b, const Matrix& x, const Matrix& s, const Matrix& y,
                                NoiseSource& noise) const {
  Tape& t = b.tape();
  Var sv = s_input(t, s);
  DiagGaussian q1 = encode_z1(b, t.constant(x), sv);
  Var z1 = sample_reparam(q1, noise);
  Var log_q1 = gaussian_log_prob(q1, z1);
  Var log_px = log_prob(decode_x(b, z1, sv), x);
  ClassTerms ct = class_terms(b, z1, t.constant(y), noise);
  return log_px - ct.kl_z2 + ct.log_pz1 - log_q1;
}

Var VfaeModel::unlabeled_bound(Binder& b, const Matrix& x, const Matrix& s, NoiseSource& noise) const {
  Tape& t = b.tape();
  Var sv = s_input(t, s);
  DiagGaussian q1 = encode_z1(b, t.constant(x), sv);
  Var z1 = sample_reparam(q1, noise);
  Var log_q1 = gaussian_log_prob(q1, z1);
  Var log_px = log_prob(decode_x(b, z1, sv), x);
  CategoricalDist qy = classify(b, z1);
  Var pi = exp(qy.log_probs());
  Var inner = t.constant(Matrix::Zero(x.rows(), 1));
  for (Index c = 0; c < cfg_.y_dim; ++c) {
    Matrix yc = Matrix::Zero(x.rows(), cfg_.y_dim);
    yc.col(c).setOnes();
    ClassTerms ct = class_terms(b, z1, t.constant(yc), noise);
    inner = inner + mul(slice_cols(pi, c, 1), ct.log_pz1 - ct.kl_z2 - log_q1);
  }
  return log_px - kl_categorical_uniform(qy) + inner;
}

LossBreakdown VfaeModel::vfae_loss(Binder& b, const Batch& batch, const Objective& obj,
                                   const RffProjection* rff, NoiseSource& noise) const {
  batch.validate(cfg_);
  obj.validate();
  Tape& t = b.tape();
  Var s = s_input(t, batch.s);
  DiagGaussian q1 = encode_z1(b, t.constant(batch.x), s);
  Var z1 = sample_reparam(q1, noise);
  Var log_q1 = gaussian_log_prob(q1, z1);
  Var log_px = log_prob(decode_x(b, z1, s), batch.x);

  const std::vector<Index> lab = batch.labeled_rows();
  std::vector<Index> unl = batch.unlabeled_rows();
  if (obj.supervised_only) unl.clear();

  LossBreakdown out;
  out.z1 = z1;
  Var total = t.scalar(0.0);

  if (!lab.empty()) {
    Var z1l = gather_rows(z1, lab);
    Matrix yl(static_cast<Index>(lab.size()), cfg_.y_dim);
    for (std::size_t i = 0; i < lab.size(); ++i) yl.row(static_cast<Index>(i)) = batch.y.row(lab[i]);
    Var yv = t.constant(yl);
    ClassTerms ct = class_terms(b, z1l, yv, noise);
    Var lpx = gather_rows(log_px, lab);
    Var lq1 = gather_rows(log_q1, lab);
    Var bound = lpx - ct.kl_z2 + ct.log_pz1 - lq1;
    Var ce = -sum(mul(yv, classify(b, z1l).log_probs()));
    total = total - sum(bound) + obj.alpha * ce;

    out.reconstruction -= lpx.value().sum();
    out.kl_z2 += ct.kl_z2.value().sum();
    out.z1_regularizer -= (ct.log_pz1.value() - lq1.value()).sum();
    out.classification += obj.alpha * ce.scalar();
  }

  if (!unl.empty()) {
    const Index nu = static_cast<Index>(unl.size());
    Var z1u = gather_rows(z1, unl);
    Var lpx = gather_rows(log_px, unl);
    Var lq1 = gather_rows(log_q1, unl);
    CategoricalDist qy = classify(b, z1u);
    Var pi = exp(qy.log_probs());
    Var kl_y = kl_categorical_uniform(qy);
    Var inner = t.constant(Matrix::Zero(nu, 1));
    for (Index c = 0; c < cfg_.y_dim; ++c) {
      Matrix yc = Matrix::Zero(nu, cfg_.y_dim);
      yc.col(c).setOnes();
      ClassTerms ct = class_terms(b, z1u, t.constant(yc), noise);
      Var w = slice_cols(pi, c, 1);
      inner = inner + mul(w, ct.log_pz1 - ct.kl_z2 - lq1);
      out.kl_z2 += w.value().cwiseProduct(ct.kl_z2.value()).sum();
      out.z1_regularizer -= w.value().cwiseProduct(ct.log_pz1.value() - lq1.value()).sum();
    }
    Var bound = lpx - kl_y + inner;
    total = total - sum(bound);
    out.reconstruction -= lpx.value().sum();
    out.kl_y += kl_y.value().sum();
  }

  if (obj.mmd_active()) {
    if (!rff) throw ContractError("MMD enabled but no random-feature projection supplied");
    const auto groups = batch.s_labels();
    Var pen = mmd_penalty(z1, groups, static_cast<int>(cfg_.s_dim), *rff);
    out.mmd_raw = pen.scalar();
    Var term = pen * (obj.beta * static_cast<double>(batch.rows()));
    out.mmd_term = term.scalar();
    total = total + term;
  }
  out.total = total;
  return out;
}

LossBreakdown VfaeModel::vfae_loss(Tape& tape, const Batch& batch, const Objective& obj,
                                   const RffProjection* rff, NoiseSource& noise) {
  Binder b(tape, store_);
  return std::as_const(*this).vfae_loss(b, batch, obj, rff, noise);
}

Matrix VfaeModel::embed(const Matrix& x, const Matrix& s, SampleMode mode, NoiseSource& noise) const {
  if (x.rows() != s.rows()) throw DimensionError("embed: x and s row counts differ");
  Matrix out(x.rows(), cfg_.z1_dim);
  for (Index start = 0; start < x.rows(); start += kPredictChunk) {
    const Index n = std::min(kPredictChunk, x.rows() - start);
    Tape t;
    Binder b(t, store_);
    DiagGaussian q = encode_z1(b, t.constant(x.middleRows(start, n)), s_input(t, s.middleRows(start, n)));
    out.middleRows(start, n) = mode == SampleMode::mean ? q.mu.value() : sample_reparam(q, noise).value();
  }
  return out;
}

Matrix VfaeModel::predict(const Matrix& x, const Matrix& s, SampleMode mode, NoiseSource& noise) const {
  const Matrix z = embed(x, s, mode, noise);
  Matrix out(x.rows(), cfg_.y_dim);
  for (Index start = 0; start < z.rows(); start += kPredictChunk) {
    const Index n = std::min(kPredictChunk, z.rows() - start);
    Tape t;
    Binder b(t, store_);
    out.middleRows(start, n) = classify(b, t.constant(z.middleRows(start, n))).probs();
  }
  return out;
}

}  // namespace vfae
