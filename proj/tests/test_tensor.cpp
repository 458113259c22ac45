#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support/finite_diff.hpp"
#include "vfae/checkpoint.hpp"
#include "vfae/tensor.hpp"

using namespace vfae;
using vfae::testing::check_gradients;
using vfae::testing::random_matrix;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (auto r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("matmul identity cases") {
  Tape t;
  Matrix b = random_matrix(3, 4, 7);
  CHECK(matmul(t.constant(Matrix::Identity(3, 3)), t.constant(b)).value() == b);

  Matrix a = mat({{1, 2}, {3, 4}});
  CHECK(matmul(t.constant(a), t.constant(Matrix::Identity(2, 2))).value() == a);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape t;
  try {
    matmul(t.constant(Matrix::Zero(2, 3)), t.constant(Matrix::Zero(2, 3)));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("x [2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches central differences") {
  ParameterStore store;
  ParamId a = store.add("a", random_matrix(3, 4, 1));
  ParamId b = store.add("b", random_matrix(4, 2, 2));
  auto r = check_gradients(store, [&](Tape& t) {
    return sum(matmul(t.param(store[a]), t.param(store[b])));
  });
  CHECK_MESSAGE(r.max_error < 1e-4, r.worst);
}

TEST_CASE("elementwise basics") {
  Tape t;
  CHECK(sigmoid(t.scalar(0.0)).scalar() == 0.5);
  Matrix x = random_matrix(3, 3, 3).array().abs() + 0.1;
  Matrix back = exp(log(t.constant(x))).value();
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(log(t.constant(mat({{1.0, 0.0}}))), DomainError);
  CHECK_THROWS_AS(log(t.constant(mat({{-2.0}}))), DomainError);
  CHECK(relu(t.constant(mat({{-1.0, 2.0}}))).value() == mat({{0.0, 2.0}}));
  CHECK(std::abs(softplus(t.scalar(800.0)).scalar() - 800.0) < 1e-12);
  CHECK(std::abs(softplus(t.scalar(-800.0)).scalar()) < 1e-300);
}

TEST_CASE("unary op backward rules match central differences") {
  ParameterStore store;
  ParamId p = store.add("p", random_matrix(4, 3, 11));
  using Op = Var (*)(Var);
  const std::pair<const char*, Op> ops[] = {
      {"softplus", [](Var v) { return softplus(v); }}, {"sigmoid", [](Var v) { return sigmoid(v); }},
      {"tanh", [](Var v) { return tanh(v); }},         {"exp", [](Var v) { return exp(v); }},
      {"square", [](Var v) { return square(v); }},     {"cos", [](Var v) { return cos(v); }},
      {"negate", [](Var v) { return negate(v); }},
      {"log", [](Var v) { return log(square(v) + 0.5); }},
  };
  for (const auto& [name, op] : ops) {
    auto r = check_gradients(store, [&](Tape& t) { return sum(mul(op(t.param(store[p])), t.constant(random_matrix(4, 3, 5)))); });
    CHECK_MESSAGE(r.max_error < 1e-4, name << ": " << r.worst);
  }
}

TEST_CASE("reductions") {
  Tape t;
  CHECK(sum(t.constant(mat({{1, 2, 3}}))).scalar() == 6.0);
  const double lse = logsumexp(t.constant(mat({{1000.0, 1000.0}})), 1).scalar();
  CHECK(lse == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  CHECK(sum(t.constant(mat({{1, 2}, {3, 4}})), 0).value() == mat({{4, 6}}));
  CHECK(sum(t.constant(mat({{1, 2}, {3, 4}})), 1).value() == mat({{3}, {7}}));
  CHECK_THROWS_AS(sum(t.constant(mat({{1}})), 2), ContractError);
  CHECK_THROWS_AS(logsumexp(t.constant(mat({{1}})), -1), ContractError);
}

TEST_CASE("mean distributes 1/n, checked against finite differences") {
  ParameterStore store;
  ParamId p = store.add("p", random_matrix(5, 1, 4));
  {
    Tape t;
    t.backward(mean(t.param(store[p])));
    CHECK((store[p].grad.array() - 0.2).abs().maxCoeff() < 1e-15);
  }
  store.zero_grad();
  auto r0 = check_gradients(store, [&](Tape& t) { return sum(square(mean(t.param(store[p]), 0))); });
  auto r1 = check_gradients(store, [&](Tape& t) { return sum(square(mean(t.param(store[p]), 1))); });
  auto r2 = check_gradients(store, [&](Tape& t) { return sum(square(logsumexp(t.param(store[p]), 0))); });
  CHECK_MESSAGE(r0.max_error < 1e-4, r0.worst);
  CHECK_MESSAGE(r1.max_error < 1e-4, r1.worst);
  CHECK_MESSAGE(r2.max_error < 1e-4, r2.worst);
}

TEST_CASE("backward on simple closed forms") {
  ParameterStore store;
  ParamId p = store.add("p", random_matrix(3, 2, 9));
  {
    Tape t;
    t.backward(sum(t.param(store[p])));
    CHECK(store[p].grad == Matrix::Ones(3, 2));
  }
  store.zero_grad();
  {
    Tape t;
    t.backward(0.5 * sum(square(t.param(store[p]))));
    CHECK((store[p].grad - store[p].value).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("backward rejects non-scalar losses and empty tapes") {
  Tape empty;
  Tape t;
  Var v = t.constant(Matrix::Zero(2, 2));
  CHECK_THROWS_AS(t.backward(v), ContractError);
  Tape other;
  CHECK_THROWS_AS(empty.backward(other.scalar(1.0)), ContractError);
}

TEST_CASE("two-layer perceptron gradients match central differences") {
  ParameterStore store;
  ParamId w1 = store.add("w1", random_matrix(4, 6, 21, 0.5));
  ParamId b1 = store.add("b1", random_matrix(1, 6, 22, 0.1));
  ParamId w2 = store.add("w2", random_matrix(6, 3, 23, 0.5));
  ParamId b2 = store.add("b2", random_matrix(1, 3, 24, 0.1));
  const Matrix x = random_matrix(8, 4, 25);
  const Matrix target = random_matrix(8, 3, 26);
  auto r = check_gradients(store, [&](Tape& t) {
    Var h = softplus(add(matmul(t.constant(x), t.param(store[w1])), t.param(store[b1])));
    Var o = add(matmul(h, t.param(store[w2])), t.param(store[b2]));
    return sum(square(o - t.constant(target))) + sum(logsumexp(o, 1));
  });
  CHECK_MESSAGE(r.max_error < 1e-4, r.worst);
}

TEST_CASE("property: random composed graphs pass the finite-difference oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    ParameterStore store;
    ParamId a = store.add("a", random_matrix(3, 4, rng(), 0.7));
    ParamId b = store.add("b", random_matrix(4, 4, rng(), 0.7));
    ParamId c = store.add("c", random_matrix(1, 4, rng(), 0.7));
    std::vector<int> plan(5);
    for (int& step : plan) step = static_cast<int>(rng() % 9);
    auto build = [&](Tape& t) {
      Var v = t.param(store[a]);
      for (int step : plan) {
        switch (step) {
          case 0: v = matmul(v, t.param(store[b])); break;
          case 1: v = add(v, t.param(store[c])); break;
          case 2: v = tanh(v); break;
          case 3: v = softplus(v); break;
          case 4: v = mul(v, sigmoid(v)); break;
          case 5: v = log_softmax(v); break;
          case 6: v = sub(v, mean(v, 0)); break;
          case 7: { const Var parts[] = {slice_cols(v, 0, 2), slice_cols(v, 2, 2)}; v = concat_cols(parts); break; }
          default: { const Index rows[] = {2, 0, 1, 1}; v = slice_cols(gather_rows(v, rows), 0, 4); v = gather_rows(v, std::span<const Index>(rows, 3)); break; }
        }
      }
      return sum(mul(v, v)) + sum(cos(v));
    };
    auto r = check_gradients(store, build);
    CHECK_MESSAGE(r.max_error < 1e-4, "trial " << trial << ": " << r.worst);
  }
}

TEST_CASE("backward twice without zero_grad doubles the gradient") {
  ParameterStore store;
  ParamId p = store.add("p", random_matrix(3, 3, 31));
  Tape t;
  Var loss = sum(tanh(matmul(t.param(store[p]), t.param(store[p]))));
  t.backward(loss);
  const Matrix once = store[p].grad;
  t.backward(loss);
  CHECK(store[p].grad == 2.0 * once);
  store[p].zero_grad();
  CHECK(store[p].grad == Matrix::Zero(3, 3));
}

TEST_CASE("forward values are bit-reproducible") {
  ParameterStore store;
  ParamId p = store.add("p", random_matrix(5, 5, 41));
  auto run = [&] {
    Tape t;
    Var v = softplus(matmul(t.param(store[p]), t.param(store[p])));
    return logsumexp(v, 1).value();
  };
  CHECK(run() == run());
}

TEST_CASE("non-finite forward values are reported unless checking is off") {
  Tape t;
  CHECK_THROWS_AS(exp(t.scalar(1000.0)), NumericError);
  Tape quiet(false);
  CHECK_NOTHROW(exp(quiet.scalar(1000.0)));
}

TEST_CASE("broadcasting rules") {
  Tape t;
  Var m = t.constant(Matrix::Ones(3, 2));
  CHECK(add(m, t.constant(mat({{1, 2}}))).value() == mat({{2, 3}, {2, 3}, {2, 3}}));
  CHECK(mul(m, t.scalar(3.0)).value() == Matrix::Constant(3, 2, 3.0));
  CHECK(sub(m, t.constant(mat({{1}, {2}, {3}}))).value() == mat({{0, 0}, {-1, -1}, {-2, -2}}));
  CHECK_THROWS_AS(add(m, t.constant(Matrix::Ones(2, 3))), DimensionError);

  ParameterStore store;
  ParamId bias = store.add("bias", random_matrix(1, 2, 3));
  ParamId col = store.add("col", random_matrix(3, 1, 4));
  ParamId s = store.add("s", random_matrix(1, 1, 5));
  auto r = check_gradients(store, [&](Tape& tt) {
    Var x = tt.constant(random_matrix(3, 2, 6));
    return sum(square(mul(add(x, tt.param(store[bias])), tt.param(store[col])) - tt.param(store[s])));
  });
  CHECK_MESSAGE(r.max_error < 1e-4, r.worst);
}

TEST_CASE("clamp passes gradient only inside the bounds") {
  ParameterStore store;
  ParamId p = store.add("p", mat({{-9.0, 0.5, 9.0}}));
  Tape t;
  Var c = clamp(t.param(store[p]), -7.0, 7.0);
  CHECK(c.value() == mat({{-7.0, 0.5, 7.0}}));
  t.backward(sum(c));
  CHECK(store[p].grad == mat({{0.0, 1.0, 0.0}}));
}

TEST_CASE("checkpoint round-trips exactly and rejects bad headers") {
  ParameterStore store;
  store.add("encoder.weight", random_matrix(3, 4, 51));
  store.add("encoder.bias", Matrix::Constant(1, 4, 1.0 / 3.0));
  std::stringstream ss;
  write_checkpoint(ss, store);
  CHECK(ss.str().rfind("VFAE-CHECKPOINT 1\n", 0) == 0);
  ParameterStore back = read_checkpoint(ss);
  REQUIRE(back.size() == 2);
  CHECK(back.at("encoder.weight").value == store.at("encoder.weight").value);
  CHECK(back.at("encoder.bias").value == store.at("encoder.bias").value);

  std::stringstream bad("NOT-A-CHECKPOINT 1\n");
  CHECK_THROWS_AS(read_checkpoint(bad), IoError);
  std::stringstream future("VFAE-CHECKPOINT 99\n");
  CHECK_THROWS_AS(read_checkpoint(future), IoError);

  ParameterStore other;
  other.add("encoder.weight", Matrix::Zero(2, 2));
  CHECK_THROWS_AS(other.assign_values(store), ContractError);
}
