#pragma once

#include <random>
#include <string>
#include <vector>

#include "vfae/tensor.hpp"

namespace vfae {

enum class Activation { softplus, relu, tanh };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);
Var activate(Var x, Activation a);

/// Affine layer x W + b with W in [in x out] and b in [1 x out].
/// Weights start uniform on +-sqrt(6 / (in + out)); biases start at zero.
class Dense {
 public:
  Dense() = default;
  Dense(ParameterStore& store, const std::string& name, Index in, Index out, std::mt19937_64& rng);

  Var operator()(Binder& bind, Var x) const;

  ParamId weight() const { return weight_; }
  ParamId bias() const { return bias_; }
  Index in_dim() const { return in_; }
  Index out_dim() const { return out_; }

 private:
  ParamId weight_;
  ParamId bias_;
  Index in_ = 0;
  Index out_ = 0;
};

/// Feed-forward trunk with several linear output heads sharing it.
/// Output transforms (clamping, sigmoid, softmax) are applied by callers.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, Index input, const std::vector<Index>& hidden,
      const std::vector<std::pair<std::string, Index>>& heads, Activation act, std::mt19937_64& rng);

  Var trunk(Binder& bind, Var x) const;
  /// One linear output per head, in construction order.
  std::vector<Var> forward(Binder& bind, Var x) const;

  Index input_dim() const { return input_; }
  const std::vector<Dense>& hidden_layers() const { return hidden_; }
  const std::vector<Dense>& heads() const { return heads_; }

 private:
  Index input_ = 0;
  std::vector<Dense> hidden_;
  std::vector<Dense> heads_;
  Activation act_ = Activation::softplus;
};

}  // namespace vfae
