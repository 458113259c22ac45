#pragma once

// Inference and generative networks of the variational fair autoencoder.
//
//   q(z1 | x, s)    encoder_z1   Gaussian, input x ++ s
//   q(y | z1)       classifier_y logistic regression on z1
//   q(z2 | z1, y)   encoder_z2   Gaussian, input z1 ++ y
//   p(z1 | z2, y)   decoder_z1   Gaussian, input z2 ++ y
//   p(x | z1, s)    decoder_x    likelihood, input z1 ++ s
//
// p(z2) = N(0, I) and p(y) is the uniform categorical. All five parts live in
// one ParameterStore and are optimized jointly.
//
// Random draws are taken from the NoiseSource in a fixed order: z1 noise for
// every row, then z2 noise for labeled rows, then z2 noise for unlabeled rows
// once per class in class order.

#include <cstdint>
#include <span>
#include <vector>

#include "vfae/distributions.hpp"
#include "vfae/keyvalue.hpp"
#include "vfae/mmd.hpp"
#include "vfae/nn.hpp"

namespace vfae {

struct ModelConfig {
  Index x_dim = 0;
  Index s_dim = 2;
  Index y_dim = 2;
  Index z1_dim = 50;
  Index z2_dim = 50;
  std::vector<Index> encoder_z1_hidden{100};
  std::vector<Index> encoder_z2_hidden{100};
  std::vector<Index> decoder_z1_hidden{100};
  std::vector<Index> decoder_x_hidden{100};
  LikelihoodKind likelihood = LikelihoodKind::bernoulli;
  Activation activation = Activation::softplus;
  /// When false the encoder and decoder receive zeros in place of s.
  bool use_s = true;
  std::uint64_t init_seed = 1;

  void validate() const;
  void write(KeyValueFile& kv) const;
  static ModelConfig read(const KeyValueFile& kv);
};

/// Minibatch. s and y are one-hot; unlabeled rows carry an all-zero y row.
struct Batch {
  Matrix x;
  Matrix s;
  Matrix y;
  std::vector<char> labeled;

  Index rows() const { return x.rows(); }
  std::vector<int> s_labels() const;
  std::vector<Index> labeled_rows() const;
  std::vector<Index> unlabeled_rows() const;
  void validate(const ModelConfig& cfg) const;
};

/// Loss weights and switches.
///   alpha           weight of the cross-entropy term on labeled rows
///   beta            weight of the MMD penalty (further scaled by batch size)
///   use_mmd         include the MMD penalty at all
///   supervised_only drop unlabeled rows from the objective
struct Objective {
  double alpha = 1.0;
  double beta = 0.0;
  bool use_mmd = true;
  bool supervised_only = false;

  void validate() const;
  bool mmd_active() const { return use_mmd && beta > 0.0; }
};

/// Total loss plus its parts, all summed over the batch. The parts add up to
/// `total`:
///   reconstruction  -sum log p(x | z1, s)
///   kl_z2           KL(q(z2|z1,y) || p(z2)), class-weighted on unlabeled rows
///   kl_y            KL(q(y|z1) || p(y)) on unlabeled rows
///   z1_regularizer  -sum [log p(z1|z2,y) - log q(z1|x,s)] (semi-supervised)
///                   or KL(q(z|x,s) || p(z)) (unsupervised)
///   classification  alpha * sum -log q(y|z1) over labeled rows
///   mmd_term        beta * n * mmd_penalty
struct LossBreakdown {
  Var total;
  Var z1;
  double reconstruction = 0;
  double kl_z2 = 0;
  double kl_y = 0;
  double z1_regularizer = 0;
  double classification = 0;
  double mmd_term = 0;
  double mmd_raw = 0;
};

enum class SampleMode { sample, mean };

std::string to_string(SampleMode m);
SampleMode parse_sample_mode(const std::string& name);

class VfaeModel {
 public:
  explicit VfaeModel(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  // Network pieces. Each returns distribution parameters on the binder's tape.
  DiagGaussian encode_z1(Binder& b, Var x, Var s) const;
  CategoricalDist classify(Binder& b, Var z1) const;
  DiagGaussian encode_z2(Binder& b, Var z1, Var y) const;
  DiagGaussian decode_z1(Binder& b, Var z2, Var y) const;
  Likelihood decode_x(Binder& b, Var z1, Var s) const;

  /// Negative unsupervised bound (plus beta * n * MMD when the objective
  /// enables it) with one reparameterized sample and analytic KL.
  LossBreakdown elbo_unsupervised(Binder& b, const Batch& batch, NoiseSource& noise,
                                  const Objective& obj = {}, const RffProjection* rff = nullptr) const;
  LossBreakdown elbo_unsupervised(Tape& tape, const Batch& batch, NoiseSource& noise,
                                  const Objective& obj = {}, const RffProjection* rff = nullptr);

  /// Per-row supervised bound L_s, shape [n x 1].
  Var supervised_bound(Binder& b, const Matrix& x, const Matrix& s, const Matrix& y,
                       NoiseSource& noise) const;
  /// Per-row unlabeled bound L_u with exact enumeration over classes, [n x 1].
  Var unlabeled_bound(Binder& b, const Matrix& x, const Matrix& s, NoiseSource& noise) const;

  /// Negative semi-supervised objective with classification and MMD terms.
  LossBreakdown vfae_loss(Binder& b, const Batch& batch, const Objective& obj,
                          const RffProjection* rff, NoiseSource& noise) const;
  LossBreakdown vfae_loss(Tape& tape, const Batch& batch, const Objective& obj,
                          const RffProjection* rff, NoiseSource& noise);

  /// Class probabilities q(y | z1) with z1 drawn per `mode`.
  Matrix predict(const Matrix& x, const Matrix& s, SampleMode mode, NoiseSource& noise) const;
  /// z1 rows, sampled or the posterior mean.
  Matrix embed(const Matrix& x, const Matrix& s, SampleMode mode, NoiseSource& noise) const;

  const Mlp& encoder_z1() const { return encoder_z1_; }
  const Dense& classifier_y() const { return classifier_y_; }
  const Mlp& encoder_z2() const { return encoder_z2_; }
  const Mlp& decoder_z1() const { return decoder_z1_; }
  const Mlp& decoder_x() const { return decoder_x_; }

 private:
  struct ClassTerms {
    Var kl_z2;
    Var log_pz1;
  };
  ClassTerms class_terms(Binder& b, Var z1, Var y, NoiseSource& noise) const;
  Var s_input(Tape& t, const Matrix& s) const;

  ModelConfig cfg_;
  ParameterStore store_;
  Mlp encoder_z1_;
  Dense classifier_y_;
  Mlp encoder_z2_;
  Mlp decoder_z1_;
  Mlp decoder_x_;
};

/// One-hot encoding of integer labels; label < 0 yields an all-zero row.
Matrix one_hot(std::span<const int> labels, Index classes);

}  // namespace vfae
