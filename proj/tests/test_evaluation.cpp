#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <json.hpp>
#include <random>

#include "vfae/errors.hpp"
#include "vfae/evaluation.hpp"
#include "vfae/keyvalue.hpp"
#include "vfae/random.hpp"
#include "vfae/synthetic.hpp"

using namespace vfae;

namespace {

EmbeddingSet make_set(Matrix z, std::vector<int> s, std::vector<int> y = {}) {
  EmbeddingSet e;
  e.z = std::move(z);
  e.s = std::move(s);
  e.y = std::move(y);
  e.s_states = 2;
  e.y_classes = e.y.empty() ? 0 : 2;
  e.provenance = {"test", SampleMode::sample, 1};
  return e;
}

Matrix normal_matrix(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

std::vector<int> random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> v(n);
  for (auto& b : v) b = static_cast<int>(uniform_index(rng, 2));
  return v;
}

}  // namespace

TEST_CASE("discrimination hand examples") {
  const std::vector<int> pred{1, 1, 0, 0, 1, 0, 0, 0};
  const std::vector<int> s{0, 0, 0, 0, 1, 1, 1, 1};
  CHECK(discrimination(pred, s) == 0.25);
  CHECK(discrimination(std::vector<int>{1, 0, 1, 0}, std::vector<int>{0, 0, 1, 1}) == 0.0);
  CHECK(discrimination(std::vector<int>(8, 1), s) == 0.0);
}

TEST_CASE("discrimination_prob hand examples") {
  const std::vector<double> p{0.9, 0.7, 0.5, 0.7};
  const std::vector<int> s{0, 0, 1, 1};
  CHECK(discrimination_prob(p, s) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(discrimination_prob(std::vector<double>{0.3, 0.7, 0.6, 0.4}, s) == doctest::Approx(0.0));
  CHECK(discrimination_prob(std::vector<double>(4, 0.37), s) == 0.0);
}

TEST_CASE("discrimination errors name the empty group") {
  try {
    discrimination(std::vector<int>{1, 0}, std::vector<int>{0, 0});
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("s=1") != std::string::npos);
  }
  CHECK_THROWS_AS(discrimination_prob(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 1}), ContractError);
  CHECK_THROWS_AS(discrimination_prob(std::vector<double>{1.5, 0.5}, std::vector<int>{0, 1}), ContractError);
  CHECK_THROWS_AS(discrimination(std::vector<int>{1}, std::vector<int>{0, 1}), DimensionError);
}

TEST_CASE("discrimination is symmetric under complement and joint permutation") {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    std::vector<int> pred = random_bits(40, 2 * trial + 1), s = random_bits(40, 2 * trial + 2);
    s[0] = 0;
    s[1] = 1;
    std::vector<int> comp(pred.size());
    std::transform(pred.begin(), pred.end(), comp.begin(), [](int v) { return 1 - v; });
    CHECK(discrimination(pred, s) == doctest::Approx(discrimination(comp, s)).epsilon(1e-14));

    std::mt19937_64 rng(trial);
    const auto perm = shuffled_indices(40, rng);
    std::vector<int> pp, sp;
    for (Index i : perm) {
      pp.push_back(pred[static_cast<std::size_t>(i)]);
      sp.push_back(s[static_cast<std::size_t>(i)]);
    }
    CHECK(discrimination(pp, sp) == doctest::Approx(discrimination(pred, s)).epsilon(1e-14));
  }
}

TEST_CASE("proxy A-distance formula") {
  CHECK(pad_from_error(0.5) == 0.0);
  CHECK(pad_from_error(0.0) == 2.0);
  CHECK(pad_from_error(0.25) == 1.0);
  CHECK(pad_from_error(0.8) == 0.0);
  CHECK_THROWS_AS(pad_from_error(-0.1), ContractError);
}

TEST_CASE("proxy A-distance on same and separated distributions") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EmbeddingSet a = make_set(normal_matrix(500, 3, 100 + seed), std::vector<int>(500, 0));
    const EmbeddingSet b = make_set(normal_matrix(500, 3, 200 + seed), std::vector<int>(500, 1));
    total += proxy_a_distance(a, b, seed);
  }
  CHECK(total / 10.0 < 0.3);

  Matrix shifted = normal_matrix(300, 2, 7);
  shifted.col(0).array() += 10.0;
  const double far = proxy_a_distance(make_set(normal_matrix(300, 2, 8), std::vector<int>(300, 0)),
                                      make_set(shifted, std::vector<int>(300, 1)));
  CHECK(far == 2.0);
  CHECK_THROWS_AS(proxy_a_distance(make_set(normal_matrix(5, 2, 1), std::vector<int>(5, 0)),
                                   make_set(normal_matrix(5, 3, 1), std::vector<int>(5, 1))),
                  ContractError);
}

TEST_CASE("probe on noise independent of s stays near chance") {
  const EmbeddingSet tr = make_set(normal_matrix(1000, 4, 1), random_bits(1000, 2));
  const EmbeddingSet te = make_set(normal_matrix(1000, 4, 3), random_bits(1000, 4));
  for (ProbeKind k : {ProbeKind::linear, ProbeKind::nonlinear}) {
    const ProbeReport r = run_probe(k, ProbeTarget::s, tr, te);
    CHECK(std::abs(r.accuracy - r.chance) <= 0.07);
    CHECK(r.chance == chance_accuracy(te.s));
  }
}

TEST_CASE("probe on one-hot s is perfect") {
  auto onehot = [](const std::vector<int>& s) {
    Matrix m = Matrix::Zero(static_cast<Index>(s.size()), 2);
    for (std::size_t i = 0; i < s.size(); ++i) m(static_cast<Index>(i), s[i]) = 1.0;
    return m;
  };
  const auto s_tr = random_bits(200, 5), s_te = random_bits(200, 6);
  const EmbeddingSet tr = make_set(onehot(s_tr), s_tr), te = make_set(onehot(s_te), s_te);
  const ProbeReport lin = run_probe(ProbeKind::linear, ProbeTarget::s, tr, te);
  CHECK(lin.accuracy == 1.0);
  CHECK(lin.per_class_accuracy == std::vector<double>{1.0, 1.0});
  CHECK(run_probe(ProbeKind::nonlinear, ProbeTarget::s, tr, te).accuracy == 1.0);
}

TEST_CASE("appending s never lowers probe-s accuracy") {
  SyntheticSpec spec;
  spec.samples = 1500;
  spec.shift = 0.7;
  const TabularDataset d = generate_synthetic(spec);
  const EmbeddingSet tr = features_as_embedding(d, Split::train), te = features_as_embedding(d, Split::test);
  auto with_s = [](EmbeddingSet e) {
    Matrix z(e.rows(), e.z.cols() + 1);
    z << e.z, Eigen::Map<const Eigen::VectorXi>(e.s.data(), e.rows()).cast<double>();
    e.z = z;
    return e;
  };
  const double base = run_probe(ProbeKind::linear, ProbeTarget::s, tr, te).accuracy;
  const double more = run_probe(ProbeKind::linear, ProbeTarget::s, with_s(tr), with_s(te)).accuracy;
  CHECK(more >= base);
  CHECK(more == 1.0);
}

TEST_CASE("report carries exactly the documented metrics") {
  SyntheticSpec spec;
  spec.samples = 600;
  spec.correlation = 0.4;
  const TabularDataset d = generate_synthetic(spec);
  ModelConfig mc;
  mc.x_dim = d.cols();
  mc.z1_dim = 3;
  mc.z2_dim = 2;
  mc.encoder_z1_hidden = mc.encoder_z2_hidden = mc.decoder_z1_hidden = mc.decoder_x_hidden = {8};
  mc.likelihood = LikelihoodKind::gaussian_sigmoid_mean;
  const VfaeModel model(mc);
  EvalConfig cfg;
  cfg.model_id = "untrained";
  cfg.proxy_a_distance = true;
  const EvaluationReport r = evaluate_model(model, d, cfg);
  const auto j = nlohmann::json::parse(r.to_json());
  std::vector<std::string> keys;
  for (const auto& [k, _] : j.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  CHECK(keys == std::vector<std::string>{"chance_s", "chance_y", "dataset", "discrimination", "discrimination_prob",
                                         "probes", "provenance", "proxy_a_distance", "schema", "test_rows",
                                         "train_rows", "version", "y_accuracy"});
  CHECK(j["schema"] == "vfae-eval-report");
  CHECK(j["provenance"]["model_id"] == "untrained");
  CHECK(j["provenance"]["mode"] == "sample");
  REQUIRE(j["probes"].size() == 3);
  CHECK(r.find(ProbeKind::linear, ProbeTarget::s) != nullptr);
  CHECK(r.find(ProbeKind::nonlinear, ProbeTarget::s) != nullptr);
  CHECK(r.find(ProbeKind::linear, ProbeTarget::y) != nullptr);
  CHECK(r.discrimination.has_value());
  CHECK(*r.discrimination >= 0.0);
  CHECK(r.to_table().find("discrimination") != std::string::npos);

  // Same seed, same report.
  CHECK(evaluate_model(model, d, cfg).to_json() == r.to_json());
}

TEST_CASE("embedding export round trips with a provenance sidecar") {
  const auto dir = std::filesystem::temp_directory_path() / "vfae_test_eval";
  std::filesystem::create_directories(dir);
  const auto path = dir / "emb.csv";
  EmbeddingSet e = make_set(normal_matrix(25, 3, 9), random_bits(25, 10), random_bits(25, 11));
  e.y[4] = -1;
  e.provenance = {"model-7", SampleMode::mean, 42};
  export_embeddings(e, path);
  const EmbeddingSet back = import_embeddings(path);
  CHECK(back.rows() == 25);
  CHECK(back.z == e.z);
  CHECK(back.s == e.s);
  CHECK(back.y == e.y);
  CHECK(back.provenance.model_id == "model-7");
  CHECK(back.provenance.mode == SampleMode::mean);
  CHECK(back.provenance.seed == 42);
  const KeyValueFile side = KeyValueFile::load(provenance_path(path));
  CHECK(side.get_or("mode", "") == "mean");
  CHECK(side.get_or("model_id", "") == "model-7");

  EmbeddingSet no_y = make_set(normal_matrix(4, 2, 1), {0, 1, 0, 1});
  export_embeddings(no_y, path);
  CHECK_FALSE(import_embeddings(path).has_y());
}
