#include <doctest.h>

#include <random>

#include "support/finite_diff.hpp"
#include "vfae/errors.hpp"
#include "vfae/probes.hpp"
#include "vfae/random.hpp"

using namespace vfae;

namespace {

struct Labeled {
  Matrix x;
  std::vector<int> y;
};

Labeled gaussian_blobs(Index n, double gap, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Labeled d{Matrix(n, 2), {}};
  for (Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 2);
    d.x(i, 0) = normal(rng) + (c ? gap : -gap);
    d.x(i, 1) = normal(rng);
    d.y.push_back(c);
  }
  return d;
}

Labeled xor_data(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Labeled d{Matrix(n, 2), {}};
  for (Index i = 0; i < n; ++i) {
    d.x(i, 0) = u(rng);
    d.x(i, 1) = u(rng);
    d.y.push_back((d.x(i, 0) > 0) != (d.x(i, 1) > 0) ? 1 : 0);
  }
  return d;
}

Labeled noise_with_random_labels(Index n, Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Labeled out{Matrix(n, d), {}};
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) out.x(i, j) = normal(rng);
    out.y.push_back(static_cast<int>(uniform_index(rng, 2)));
  }
  return out;
}

}  // namespace

TEST_CASE("linear probe separates separable data perfectly") {
  const Labeled train = gaussian_blobs(400, 6.0, 1), test = gaussian_blobs(400, 6.0, 2);
  const LinearProbe p = LinearProbe::fit(train.x, train.y, 2);
  CHECK(p.accuracy(test.x, test.y) == 1.0);
}

TEST_CASE("linear probe reaches a stationary point of its objective") {
  const Labeled d = gaussian_blobs(300, 0.7, 3);
  const LinearProbe p = LinearProbe::fit(d.x, d.y, 2);
  CHECK(p.converged());
  // Independent gradient through the tape on standardized inputs.
  const Standardizer st = Standardizer::fit(d.x);
  ParameterStore store;
  const ParamId w = store.add("w", p.weights());
  const ParamId b = store.add("b", p.bias());
  Matrix y = Matrix::Zero(300, 2);
  for (Index i = 0; i < 300; ++i) y(i, d.y[static_cast<std::size_t>(i)]) = 1.0;
  Tape tape;
  Binder bind(tape, store);
  Var ws = bind(w);
  Var logits = add(matmul(tape.constant(st.apply(d.x)), ws), bind(b));
  Var ce = scale(sum(mul(log_softmax(logits), tape.constant(y))), -1.0 / 300.0);
  Var loss = add(ce, scale(sum(square(ws)), 0.5e-4));
  tape.backward(loss);
  CHECK(store[w].grad.cwiseAbs().maxCoeff() < 1e-5);
  CHECK(store[b].grad.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("linear probe on permuted labels stays near chance") {
  const Labeled train = noise_with_random_labels(1000, 5, 4), test = noise_with_random_labels(1000, 5, 5);
  const LinearProbe p = LinearProbe::fit(train.x, train.y, 2);
  const double chance = majority_share(test.y);
  CHECK(std::abs(p.accuracy(test.x, test.y) - chance) <= 0.07);
}

TEST_CASE("duplicating every training row leaves the linear probe unchanged") {
  const Labeled d = gaussian_blobs(200, 0.8, 6);
  Matrix x2(400, 2);
  x2 << d.x, d.x;
  std::vector<int> y2 = d.y;
  y2.insert(y2.end(), d.y.begin(), d.y.end());
  const LinearProbe a = LinearProbe::fit(d.x, d.y, 2);
  const LinearProbe b = LinearProbe::fit(x2, y2, 2);
  CHECK((a.weights() - b.weights()).cwiseAbs().maxCoeff() < 1e-4);
  CHECK((a.bias() - b.bias()).cwiseAbs().maxCoeff() < 1e-4);
  const Labeled test = gaussian_blobs(500, 0.8, 7);
  CHECK(a.predict(test.x) == b.predict(test.x));
}

TEST_CASE("linear probe is deterministic and handles several classes") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  Matrix x(300, 2);
  std::vector<int> y;
  for (Index i = 0; i < 300; ++i) {
    const int c = static_cast<int>(i % 3);
    x(i, 0) = 5.0 * std::cos(2.0944 * c) + 0.5 * normal(rng);
    x(i, 1) = 5.0 * std::sin(2.0944 * c) + 0.5 * normal(rng);
    y.push_back(c);
  }
  const LinearProbe a = LinearProbe::fit(x, y, 3), b = LinearProbe::fit(x, y, 3);
  CHECK(a.weights() == b.weights());
  CHECK(a.accuracy(x, y) == 1.0);
  const Matrix p = a.predict_proba(x);
  CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("probes reject single-class training data and bad labels") {
  const Matrix x = Matrix::Random(10, 2);
  const std::vector<int> one(10, 1);
  CHECK_THROWS_AS(LinearProbe::fit(x, one, 2), ContractError);
  CHECK_THROWS_AS(MlpProbe::fit(x, one, 2), ContractError);
  std::vector<int> bad(10, 0);
  bad[3] = 2;
  CHECK_THROWS_AS(LinearProbe::fit(x, bad, 2), ContractError);
  CHECK_THROWS_AS(LinearProbe::fit(x, std::vector<int>(9, 0), 2), DimensionError);
}

TEST_CASE("xor needs the nonlinear probe") {
  const Labeled train = xor_data(1000, 9), test = xor_data(1000, 10);
  const LinearProbe lin = LinearProbe::fit(train.x, train.y, 2);
  const MlpProbe mlp = MlpProbe::fit(train.x, train.y, 2);
  const double lin_acc = lin.accuracy(test.x, test.y);
  const double mlp_acc = mlp.accuracy(test.x, test.y);
  INFO("linear " << lin_acc << " mlp " << mlp_acc << " epochs " << mlp.epochs());
  CHECK(lin_acc <= 0.6);
  CHECK(mlp_acc >= 0.9);
}

TEST_CASE("mlp probe on permuted labels stays near chance and is deterministic") {
  const Labeled train = noise_with_random_labels(1000, 5, 11), test = noise_with_random_labels(1000, 5, 12);
  const MlpProbe a = MlpProbe::fit(train.x, train.y, 2);
  const MlpProbe b = MlpProbe::fit(train.x, train.y, 2);
  CHECK(a.predict_proba(test.x) == b.predict_proba(test.x));
  CHECK(std::abs(a.accuracy(test.x, test.y) - majority_share(test.y)) <= 0.07);
  MlpProbeConfig other;
  other.seed = 2;
  CHECK(MlpProbe::fit(train.x, train.y, 2, other).predict_proba(test.x) != a.predict_proba(test.x));
}

TEST_CASE("accuracy helpers") {
  const std::vector<int> a{0, 1, 1, 0}, b{0, 1, 0, 0};
  CHECK(accuracy(a, b) == 0.75);
  CHECK(majority_share(b) == 0.75);
  Matrix p(2, 3);
  p << 0.1, 0.7, 0.2, 0.5, 0.2, 0.3;
  CHECK(argmax_rows(p) == std::vector<int>{1, 0});
}
