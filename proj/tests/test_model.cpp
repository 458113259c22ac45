#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support/finite_diff.hpp"
#include "vfae/model.hpp"

using namespace vfae;
using vfae::testing::check_gradients;
using vfae::testing::random_matrix;

namespace {

const double kLn2Pi = std::log(2.0 * std::numbers::pi);

ModelConfig small_config(LikelihoodKind kind = LikelihoodKind::bernoulli, Index y_dim = 2, Index s_dim = 2) {
  ModelConfig c;
  c.x_dim = 5;
  c.s_dim = s_dim;
  c.y_dim = y_dim;
  c.z1_dim = 3;
  c.z2_dim = 2;
  c.encoder_z1_hidden = {6};
  c.encoder_z2_hidden = {4};
  c.decoder_z1_hidden = {4};
  c.decoder_x_hidden = {6};
  c.likelihood = kind;
  c.init_seed = 17;
  return c;
}

Matrix data_for(LikelihoodKind kind, Index n, Index d, std::uint64_t seed) {
  Matrix x = random_matrix(n, d, seed).array().abs();
  switch (kind) {
    case LikelihoodKind::bernoulli: return (x.array() > 0.6).cast<double>();
    case LikelihoodKind::poisson: return (2.0 * x.array()).floor();
    case LikelihoodKind::gaussian_sigmoid_mean: return (x.array() / (1.0 + x.array())).matrix();
  }
  return x;
}

// Rows with labeled[i] true get a label; others have zero y rows.
Batch make_batch(const ModelConfig& c, Index n, std::uint64_t seed, const std::vector<char>& labeled) {
  Batch b;
  b.x = data_for(c.likelihood, n, c.x_dim, seed);
  std::vector<int> s(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    s[static_cast<std::size_t>(i)] = static_cast<int>((i * 7 + static_cast<Index>(seed)) % c.s_dim);
    y[static_cast<std::size_t>(i)] =
        labeled[static_cast<std::size_t>(i)] ? static_cast<int>((i * 3 + 1) % c.y_dim) : -1;
  }
  b.s = one_hot(s, c.s_dim);
  b.y = one_hot(y, c.y_dim);
  b.labeled = labeled;
  return b;
}

std::vector<char> mask(Index n, Index labeled_count) {
  std::vector<char> m(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < labeled_count; ++i) m[static_cast<std::size_t>(i)] = 1;
  return m;
}

void zero_prefix(ParameterStore& store, const std::string& prefix) {
  for (Parameter& p : store)
    if (p.name.rfind(prefix, 0) == 0) p.value.setZero();
}

void set_param(ParameterStore& store, const std::string& name, double v) { store.at(name).value.setConstant(v); }

}  // namespace

TEST_CASE("config validation lists every problem") {
  ModelConfig c;
  c.x_dim = 0;
  c.z1_dim = 0;
  try {
    c.validate();
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("x_dim") != std::string::npos);
    CHECK(msg.find("z1_dim") != std::string::npos);
  }
}

TEST_CASE("config round-trips through key/value text") {
  ModelConfig c = small_config(LikelihoodKind::poisson, 3, 4);
  c.use_s = false;
  c.activation = Activation::tanh;
  KeyValueFile kv;
  c.write(kv);
  ModelConfig back = ModelConfig::read(KeyValueFile::parse(kv.to_string(), "memory"));
  CHECK(back.x_dim == c.x_dim);
  CHECK(back.s_dim == 4);
  CHECK(back.y_dim == 3);
  CHECK(back.encoder_z1_hidden == c.encoder_z1_hidden);
  CHECK(back.likelihood == LikelihoodKind::poisson);
  CHECK(back.activation == Activation::tanh);
  CHECK_FALSE(back.use_s);
  CHECK(back.init_seed == 17);
}

TEST_CASE("batch validation") {
  ModelConfig c = small_config();
  Batch b = make_batch(c, 4, 1, mask(4, 2));
  CHECK_NOTHROW(b.validate(c));
  b.y(3, 1) = 1.0;
  CHECK_THROWS_AS(b.validate(c), ContractError);
  Batch w = make_batch(c, 4, 1, mask(4, 2));
  w.x = Matrix::Zero(4, 3);
  CHECK_THROWS_AS(w.validate(c), DimensionError);
}

TEST_CASE("same seed builds identical parameters") {
  VfaeModel a(small_config()), b(small_config());
  REQUIRE(a.params().size() == b.params().size());
  auto ib = b.params().begin();
  for (const Parameter& p : a.params()) {
    CHECK(p.name == ib->name);
    CHECK(p.value == ib->value);
    ++ib;
  }
  CHECK(a.params().find("encoder_z1.mu.weight").has_value());
  CHECK(a.params().find("decoder_x.natural.bias").has_value());
  CHECK_FALSE(a.params().find("decoder_x.log_sigma.bias").has_value());
  VfaeModel g(small_config(LikelihoodKind::gaussian_sigmoid_mean));
  CHECK(g.params().find("decoder_x.log_sigma.bias").has_value());
}

TEST_CASE("elbo_unsupervised with a constant decoder") {
  ModelConfig c = small_config();
  VfaeModel m(c);
  zero_prefix(m.params(), "decoder_x");
  const Index n = 6;
  Batch b = make_batch(c, n, 3, mask(n, 0));
  Tape t;
  NoiseSource noise(4);
  LossBreakdown l = m.elbo_unsupervised(t, b, noise);
  CHECK(l.reconstruction == doctest::Approx(n * c.x_dim * std::log(2.0)).epsilon(1e-13));

  Tape t2;
  Binder bind(t2, std::as_const(m).params());
  const double kl =
      kl_diag_gaussian_std(m.encode_z1(bind, t2.constant(b.x), t2.constant(b.s))).value().sum();
  CHECK(l.total.scalar() == doctest::Approx(n * c.x_dim * std::log(2.0) + kl).epsilon(1e-13));
}

TEST_CASE("elbo_unsupervised: prior-matching encoder has zero KL") {
  ModelConfig c = small_config();
  VfaeModel m(c);
  zero_prefix(m.params(), "encoder_z1");
  Tape t;
  NoiseSource noise(5);
  LossBreakdown l = m.elbo_unsupervised(t, make_batch(c, 5, 2, mask(5, 0)), noise);
  CHECK(l.z1_regularizer == 0.0);
}

TEST_CASE("supervised bound equals a term-by-term recomputation on shared draws") {
  for (LikelihoodKind kind :
       {LikelihoodKind::bernoulli, LikelihoodKind::poisson, LikelihoodKind::gaussian_sigmoid_mean}) {
    ModelConfig c = small_config(kind);
    VfaeModel m(c);
    Batch b = make_batch(c, 7, 8, mask(7, 7));
    Tape t;
    Binder bind(t, std::as_const(m).params());
    NoiseSource noise(99);
    const Matrix got = m.supervised_bound(bind, b.x, b.s, b.y, noise).value();

    NoiseSource replay(99);
    const Matrix e1 = replay.standard_normal(7, c.z1_dim);
    const Matrix e2 = replay.standard_normal(7, c.z2_dim);
    Tape u;
    Binder ub(u, std::as_const(m).params());
    DiagGaussian q1 = m.encode_z1(ub, u.constant(b.x), u.constant(b.s));
    Var z1 = sample_reparam(q1, e1);
    const Matrix recon = log_prob(m.decode_x(ub, z1, u.constant(b.s)), b.x).value();
    DiagGaussian q2 = m.encode_z2(ub, z1, u.constant(b.y));
    Var z2 = sample_reparam(q2, e2);
    const Matrix kl = kl_diag_gaussian_std(q2).value();
    const Matrix lp = gaussian_log_prob(m.decode_z1(ub, z2, u.constant(b.y)), z1).value();
    const Matrix lq = gaussian_log_prob(q1, z1).value();
    const Matrix oracle = recon - kl + lp - lq;
    CHECK_MESSAGE((got - oracle).cwiseAbs().maxCoeff() < 1e-10, to_string(kind));
  }
}

TEST_CASE("supervised bound collapses to reconstruction when the second stage is pinned") {
  ModelConfig c = small_config();
  VfaeModel m(c);
  // q(z1|x,s) and p(z1|z2,y) both become the same input-independent Gaussian.
  zero_prefix(m.params(), "encoder_z1");
  zero_prefix(m.params(), "decoder_z1");
  zero_prefix(m.params(), "encoder_z2");
  set_param(m.params(), "encoder_z1.mu.bias", 0.4);
  set_param(m.params(), "decoder_z1.mu.bias", 0.4);
  set_param(m.params(), "encoder_z1.log_sigma.bias", -0.3);
  set_param(m.params(), "decoder_z1.log_sigma.bias", -0.3);
  Batch b = make_batch(c, 6, 9, mask(6, 6));
  Tape t;
  Binder bind(t, std::as_const(m).params());
  NoiseSource noise(12);
  const Matrix bound = m.supervised_bound(bind, b.x, b.s, b.y, noise).value();

  NoiseSource replay(12);
  const Matrix e1 = replay.standard_normal(6, c.z1_dim);
  Tape u;
  Binder ub(u, std::as_const(m).params());
  Var z1 = sample_reparam(m.encode_z1(ub, u.constant(b.x), u.constant(b.s)), e1);
  const Matrix recon = log_prob(m.decode_x(ub, z1, u.constant(b.s)), b.x).value();
  CHECK((bound - recon).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("all-zero data under a saturated Bernoulli decoder reconstructs at ~0") {
  ModelConfig c = small_config();
  VfaeModel m(c);
  zero_prefix(m.params(), "decoder_x");
  set_param(m.params(), "decoder_x.natural.bias", -50.0);
  Batch b = make_batch(c, 3, 1, mask(3, 3));
  b.x.setZero();
  Tape t;
  NoiseSource noise(1);
  LossBreakdown l = m.vfae_loss(t, b, Objective{}, nullptr, noise);
  CHECK(l.reconstruction > 0.0);
  CHECK(l.reconstruction < 1e-15);
}

TEST_CASE("single class: unlabeled bound equals supervised bound") {
  ModelConfig c = small_config(LikelihoodKind::bernoulli, 1);
  VfaeModel m(c);
  Batch b = make_batch(c, 5, 4, mask(5, 5));
  Tape t;
  Binder bind(t, std::as_const(m).params());
  NoiseSource n1(31), n2(31);
  const Matrix ls = m.supervised_bound(bind, b.x, b.s, b.y, n1).value();
  const Matrix lu = m.unlabeled_bound(bind, b.x, b.s, n2).value();
  CHECK((ls - lu).cwiseAbs().maxCoeff() < 1e-12);
  Tape u;
  Binder ub(u, std::as_const(m).params());
  CHECK(kl_categorical_uniform(m.classify(ub, u.constant(random_matrix(4, c.z1_dim, 1)))).value() ==
        Matrix::Zero(4, 1));
}

TEST_CASE("uniform classifier: unlabeled bound averages the class terms") {
  ModelConfig c = small_config(LikelihoodKind::bernoulli, 3);
  VfaeModel m(c);
  zero_prefix(m.params(), "classifier_y");
  const Index n = 4;
  Batch b = make_batch(c, n, 6, mask(n, 0));
  Tape t;
  Binder bind(t, std::as_const(m).params());
  NoiseSource noise(41);
  const Matrix lu = m.unlabeled_bound(bind, b.x, b.s, noise).value();

  NoiseSource replay(41);
  const Matrix e1 = replay.standard_normal(n, c.z1_dim);
  Tape u;
  Binder ub(u, std::as_const(m).params());
  DiagGaussian q1 = m.encode_z1(ub, u.constant(b.x), u.constant(b.s));
  Var z1 = sample_reparam(q1, e1);
  const Matrix recon = log_prob(m.decode_x(ub, z1, u.constant(b.s)), b.x).value();
  const Matrix lq = gaussian_log_prob(q1, z1).value();
  Matrix avg = Matrix::Zero(n, 1);
  for (Index k = 0; k < 3; ++k) {
    Matrix yk = Matrix::Zero(n, 3);
    yk.col(k).setOnes();
    DiagGaussian q2 = m.encode_z2(ub, z1, u.constant(yk));
    Var z2 = sample_reparam(q2, replay.standard_normal(n, c.z2_dim));
    const Matrix lp = gaussian_log_prob(m.decode_z1(ub, z2, u.constant(yk)), z1).value();
    const Matrix kl = kl_diag_gaussian_std(q2).value();
    avg += (lp - kl - lq) / 3.0;
  }
  CHECK((lu - (recon + avg)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("class enumeration agrees with sampling y from q(y|z1)") {
  ModelConfig c = small_config(LikelihoodKind::bernoulli, 3);
  VfaeModel m(c);
  // Give the classifier a visible preference so the weights are not uniform.
  set_param(m.params(), "classifier_y.bias", 0.0);
  m.params().at("classifier_y.bias").value(0, 0) = 1.2;
  m.params().at("classifier_y.bias").value(0, 2) = -0.7;
  const Index n = 100000;
  Matrix x = data_for(c.likelihood, 1, c.x_dim, 77).replicate(n, 1);
  Matrix s = Matrix::Zero(n, 2);
  s.col(1).setOnes();

  auto stats = [](const Matrix& v) {
    const double mean = v.mean();
    const double var = (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
    return std::pair{mean, var / static_cast<double>(v.size())};
  };

  Tape t(false);
  Binder bind(t, std::as_const(m).params());
  NoiseSource noise(5);
  const auto [enum_mean, enum_var] = stats(m.unlabeled_bound(bind, x, s, noise).value());

  Tape u(false);
  Binder ub(u, std::as_const(m).params());
  NoiseSource draw(6);
  DiagGaussian q1 = m.encode_z1(ub, u.constant(x), u.constant(s));
  Var z1 = sample_reparam(q1, draw);
  CategoricalDist qy = m.classify(ub, z1);
  const Matrix pi = qy.probs();
  const Matrix uni = draw.uniform(n, 1, 0.0, 1.0);
  std::vector<int> ys(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    double acc = 0.0;
    int k = 0;
    while (k < 2 && uni(i) > acc + pi(i, k)) acc += pi(i, k++);
    ys[static_cast<std::size_t>(i)] = k;
  }
  Var yv = u.constant(one_hot(ys, 3));
  DiagGaussian q2 = m.encode_z2(ub, z1, yv);
  Var z2 = sample_reparam(q2, draw);
  // Values are copied out one at a time: recording new nodes may move earlier ones.
  const Matrix recon = log_prob(m.decode_x(ub, z1, u.constant(s)), x).value();
  const Matrix kl_y = kl_categorical_uniform(qy).value();
  const Matrix kl_z2 = kl_diag_gaussian_std(q2).value();
  const Matrix lp = gaussian_log_prob(m.decode_z1(ub, z2, yv), z1).value();
  const Matrix lq = gaussian_log_prob(q1, z1).value();
  const Matrix sampled = recon - kl_y - kl_z2 + lp - lq;
  const auto [mc_mean, mc_var] = stats(sampled);
  CHECK(std::abs(enum_mean - mc_mean) < 3.0 * std::sqrt(enum_var + mc_var));
}

TEST_CASE("vfae_loss with only labeled rows and beta = 0") {
  ModelConfig c = small_config();
  VfaeModel m(c);
  Batch b = make_batch(c, 6, 2, mask(6, 6));
  Objective obj;
  obj.alpha = 2.5;
  Tape t;
  Binder bind(t, std::as_const(m).params());
  NoiseSource n1(8);
  LossBreakdown l = m.vfae_loss(bind, b, obj, nullptr, n1);

  NoiseSource n2(8);
  NoiseSource n3(8);
  const double ls = m.supervised_bound(bind, b.x, b.s, b.y, n2).value().sum();
  Tape u;
  Binder ub(u, std::as_const(m).params());
  Var z1 = sample_reparam(m.encode_z1(ub, u.constant(b.x), u.constant(b.s)), n3);
  const double ce = -m.classify(ub, z1).log_probs().value().cwiseProduct(b.y).sum();
  CHECK(l.total.scalar() == doctest::Approx(-ls + 2.5 * ce).epsilon(1e-12));
  CHECK(l.kl_y == 0.0);
  CHECK(l.mmd_term == 0.0);
  CHECK(l.classification == doctest::Approx(2.5 * ce).epsilon(1e-12));
}

TEST_CASE("loss parts add up to the total") {
  ModelConfig c = small_config(LikelihoodKind::poisson, 3, 3);
  VfaeModel m(c);
  Batch b = make_batch(c, 9, 5, mask(9, 4));
  Objective obj{1.5, 2.0, true, false};
  RffProjection rff(c.z1_dim, 50, 0.5, 3);
  Tape t;
  NoiseSource noise(3);
  LossBreakdown l = m.vfae_loss(t, b, obj, &rff, noise);
  const double parts = l.reconstruction + l.kl_z2 + l.kl_y + l.z1_regularizer + l.classification + l.mmd_term;
  CHECK(l.total.scalar() == doctest::Approx(parts).epsilon(1e-12));
  CHECK(l.mmd_term == doctest::Approx(2.0 * 9 * l.mmd_raw).epsilon(1e-14));
  CHECK(l.mmd_raw > 0.0);
  CHECK(l.kl_y > 0.0);
}

TEST_CASE("semi-supervised loss with a trivial second stage is consistent with the unsupervised bound") {
  ModelConfig c = small_config();
  VfaeModel m(c);
  zero_prefix(m.params(), "encoder_z2");
  zero_prefix(m.params(), "decoder_z1");
  const Index n = 20000;
  Batch b;
  b.x = data_for(c.likelihood, 1, c.x_dim, 3).replicate(n, 1);
  b.s = Matrix::Zero(n, 2);
  b.s.col(0).setOnes();
  b.y = Matrix::Zero(n, 2);
  b.y.col(1).setOnes();
  b.labeled.assign(static_cast<std::size_t>(n), 1);
  Objective obj;
  obj.alpha = 0.0;
  Tape t(false);
  Binder bind(t, std::as_const(m).params());
  NoiseSource n1(10), n2(10);
  LossBreakdown semi = m.vfae_loss(bind, b, obj, nullptr, n1);
  Tape u(false);
  Binder ub(u, std::as_const(m).params());
  LossBreakdown unsup = m.elbo_unsupervised(ub, b, n2);

  // Same z1 draws: reconstruction agrees exactly.
  CHECK(semi.reconstruction == doctest::Approx(unsup.reconstruction).epsilon(1e-12));
  CHECK(semi.kl_z2 == 0.0);

  // With p(z1|z2,y) = N(0, I) the single-sample regularizer estimates the analytic KL.
  NoiseSource replay(10);
  const Matrix e1 = replay.standard_normal(n, c.z1_dim);
  Tape v(false);
  Binder vb(v, std::as_const(m).params());
  DiagGaussian q1 = m.encode_z1(vb, v.constant(b.x), v.constant(b.s));
  Var z1 = sample_reparam(q1, e1);
  const Matrix per_row = gaussian_log_prob(q1, z1).value().array() + 0.5 * c.z1_dim * kLn2Pi +
                         0.5 * z1.value().rowwise().squaredNorm().array();
  const double mean = per_row.mean();
  const double se = std::sqrt((per_row.array() - mean).square().sum() / (n - 1) / n);
  CHECK(std::abs(semi.z1_regularizer / n - mean) < 1e-10);
  CHECK(std::abs(mean - unsup.z1_regularizer / n) < 3.0 * se);
}

TEST_CASE("labeled-only batch at alpha = 0: classifier receives no gradient") {
  ModelConfig c = small_config();
  VfaeModel m(c);
  Batch b = make_batch(c, 6, 2, mask(6, 6));
  Objective obj;
  obj.alpha = 0.0;
  Tape t;
  NoiseSource noise(1);
  t.backward(m.vfae_loss(t, b, obj, nullptr, noise).total);
  CHECK(m.params().at("classifier_y.weight").grad == Matrix::Zero(c.z1_dim, c.y_dim));
  CHECK(m.params().at("classifier_y.bias").grad == Matrix::Zero(1, c.y_dim));
  CHECK(m.params().at("encoder_z2.mu.weight").grad.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("alpha scales the classification contribution linearly") {
  ModelConfig c = small_config();
  VfaeModel m(c);
  Batch b = make_batch(c, 8, 4, mask(8, 5));
  auto loss = [&](double alpha) {
    Tape t;
    Binder bind(t, std::as_const(m).params());
    NoiseSource noise(21);
    return m.vfae_loss(bind, b, Objective{alpha, 0.0, true, false}, nullptr, noise).total.scalar();
  };
  const double l0 = loss(0.0), l1 = loss(1.0), l2 = loss(2.0);
  CHECK(l2 - l0 == doctest::Approx(2.0 * (l1 - l0)).epsilon(1e-10));
}

TEST_CASE("MMD term vanishes when every row shares one s value") {
  ModelConfig c = small_config();
  VfaeModel m(c);
  Batch b = make_batch(c, 6, 2, mask(6, 3));
  b.s.setZero();
  b.s.col(1).setOnes();
  RffProjection rff(c.z1_dim, 40, 1.0, 2);
  auto run = [&](double beta) {
    Tape t;
    Binder bind(t, std::as_const(m).params());
    NoiseSource noise(3);
    LossBreakdown l = m.vfae_loss(bind, b, Objective{1.0, beta, true, false}, &rff, noise);
    return std::pair{l.total.scalar(), l.mmd_term};
  };
  const auto [on_total, on_mmd] = run(10.0);
  CHECK(on_mmd == 0.0);
  CHECK(on_total == run(0.0).first);
}

TEST_CASE("MMD requires a projection when active") {
  ModelConfig c = small_config();
  VfaeModel m(c);
  Tape t;
  NoiseSource noise(1);
  CHECK_THROWS_AS(m.vfae_loss(t, make_batch(c, 4, 1, mask(4, 2)), Objective{1.0, 1.0, true, false}, nullptr, noise),
                  ContractError);
  CHECK_THROWS_AS(Objective({-1.0, 0.0, true, false}).validate(), ContractError);
}

TEST_CASE("use_s = false blinds the networks to s") {
  ModelConfig c = small_config();
  c.use_s = false;
  VfaeModel m(c);
  Batch b = make_batch(c, 5, 1, mask(5, 5));
  Batch flipped = b;
  flipped.s = Matrix::Ones(5, 2) - b.s;
  auto total = [&](const Batch& bb) {
    Tape t;
    Binder bind(t, std::as_const(m).params());
    NoiseSource noise(4);
    return m.vfae_loss(bind, bb, Objective{}, nullptr, noise).total.scalar();
  };
  CHECK(total(b) == total(flipped));
}

TEST_CASE("every loss passes the finite-difference check on 10-row batches") {
  for (LikelihoodKind kind :
       {LikelihoodKind::bernoulli, LikelihoodKind::poisson, LikelihoodKind::gaussian_sigmoid_mean}) {
    ModelConfig c = small_config(kind, 3, 3);
    VfaeModel m(c);
    // Central differences lose ~eps*|loss|/step to rounding, so the check runs
    // where the loss is O(10^2); a fresh init can put log p(z1|z2,y) near 1e10.
    for (Parameter& p : m.params()) p.value *= 0.5;
    Batch b = make_batch(c, 10, 7, mask(10, 5));
    RffProjection rff(c.z1_dim, 30, 0.5, 4);
    Objective obj{1.3, 0.7, true, false};
    auto semi = check_gradients(m.params(), [&](Tape& t) {
      NoiseSource noise(55);
      return m.vfae_loss(t, b, obj, &rff, noise).total;
    });
    CHECK_MESSAGE(semi.max_error < 1e-3, to_string(kind) << " vfae_loss: " << semi.worst);
    auto unsup = check_gradients(m.params(), [&](Tape& t) {
      NoiseSource noise(56);
      return m.elbo_unsupervised(t, b, noise, obj, &rff).total;
    });
    CHECK_MESSAGE(unsup.max_error < 1e-3, to_string(kind) << " elbo_unsupervised: " << unsup.worst);
  }
}

TEST_CASE("predict and embed") {
  ModelConfig c = small_config();
  VfaeModel m(c);
  const Matrix x = data_for(c.likelihood, 12, c.x_dim, 5);
  const std::vector<int> sl{0, 1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0};
  const Matrix s = one_hot(sl, 2);
  NoiseSource a(1), b(2), c1(9), c2(9);
  CHECK(m.predict(x, s, SampleMode::mean, a) == m.predict(x, s, SampleMode::mean, b));
  CHECK(m.predict(x, s, SampleMode::sample, c1) == m.predict(x, s, SampleMode::sample, c2));
  const Matrix p = m.predict(x, s, SampleMode::sample, a);
  for (Index i = 0; i < p.rows(); ++i) CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-12);

  const Matrix mean = m.embed(x, s, SampleMode::mean, a);
  CHECK(mean.rows() == 12);
  CHECK(mean.cols() == c.z1_dim);
  Tape t;
  Binder bind(t, std::as_const(m).params());
  CHECK(mean == m.encode_z1(bind, t.constant(x), t.constant(s)).mu.value());

  DiagGaussian q = m.encode_z1(bind, t.constant(x.topRows(1)), t.constant(s.topRows(1)));
  const RowVector sigma = q.log_sigma.value().array().exp();
  RowVector acc = RowVector::Zero(c.z1_dim);
  NoiseSource draws(3);
  for (int k = 0; k < 1000; ++k) acc += m.embed(x.topRows(1), s.topRows(1), SampleMode::sample, draws);
  acc /= 1000.0;
  for (Index j = 0; j < c.z1_dim; ++j) CHECK(std::abs(acc(j) - mean(0, j)) < 4.0 * sigma(j) / std::sqrt(1000.0));
}

TEST_CASE("unsupervised bound lies below an importance-sampled log-likelihood") {
  // Holds for any parameter values; training is exercised by the acceptance suite.
  ModelConfig c = small_config();
  VfaeModel m(c);
  Batch one = make_batch(c, 1, 12, mask(1, 0));
  const Index k = 10000;
  Batch rep;
  rep.x = one.x.replicate(k, 1);
  rep.s = one.s.replicate(k, 1);
  rep.y = Matrix::Zero(k, c.y_dim);
  rep.labeled.assign(static_cast<std::size_t>(k), 0);

  Tape t;
  Binder bind(t, std::as_const(m).params());
  NoiseSource noise(4);
  DiagGaussian q = m.encode_z1(bind, t.constant(rep.x), t.constant(rep.s));
  Var z = sample_reparam(q, noise);
  const Matrix recon = log_prob(m.decode_x(bind, z, t.constant(rep.s)), rep.x).value();
  const Matrix lq = gaussian_log_prob(q, z).value();
  const Matrix lw = (recon.array() - 0.5 * z.value().rowwise().squaredNorm().array() -
                     0.5 * c.z1_dim * kLn2Pi - lq.array()).matrix();
  const double mx = lw.maxCoeff();
  const Vector w = (lw.array() - mx).exp();
  const double log_px = mx + std::log(w.mean());
  const double rel_se = std::sqrt((w.array() - w.mean()).square().sum() / (k - 1) / k) / w.mean();

  Tape u;
  Binder ub(u, std::as_const(m).params());
  NoiseSource n2(8);
  const double elbo = -m.elbo_unsupervised(ub, rep, n2).total.scalar() / k;
  CHECK(log_px - elbo >= -3.0 * rel_se);
}
