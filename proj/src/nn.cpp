#include "vfae/nn.hpp"

#include <cmath>

namespace vfae {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::softplus: return "softplus";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "softplus") return Activation::softplus;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ContractError("unknown activation '" + name + "' (softplus, relu, tanh)");
}

Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::softplus: return softplus(x);
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh(x);
  }
  return x;
}

Dense::Dense(ParameterStore& store, const std::string& name, Index in, Index out,
             std::mt19937_64& rng)
    : in_(in), out_(out) {
  if (in < 1 || out < 1) throw ContractError("Dense " + name + ": extents must be >= 1");
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix w(in, out);
  for (Index i = 0; i < in; ++i)
    for (Index j = 0; j < out; ++j) w(i, j) = u(rng);
  weight_ = store.add(name + ".weight", std::move(w));
  bias_ = store.add(name + ".bias", Matrix::Zero(1, out));
}

Var Dense::operator()(Binder& bind, Var x) const {
  if (x.cols() != in_) {
    throw DimensionError("Dense: input " + shape_string(x.value()) + " but layer expects " +
                         std::to_string(in_) + " columns");
  }
  return add(matmul(x, bind(weight_)), bind(bias_));
}

Mlp::Mlp(ParameterStore& store, const std::string& name, Index input,
         const std::vector<Index>& hidden, const std::vector<std::pair<std::string, Index>>& heads,
         Activation act, std::mt19937_64& rng)
    : input_(input), act_(act) {
  Index width = input;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    hidden_.emplace_back(store, name + ".hidden" + std::to_string(i), width, hidden[i], rng);
    width = hidden[i];
  }
  for (const auto& [head, size] : heads) heads_.emplace_back(store, name + "." + head, width, size, rng);
}

Var Mlp::trunk(Binder& bind, Var x) const {
  for (const Dense& layer : hidden_) x = activate(layer(bind, x), act_);
  return x;
}

std::vector<Var> Mlp::forward(Binder& bind, Var x) const {
  Var h = trunk(bind, x);
  std::vector<Var> out;
  out.reserve(heads_.size());
  for (const Dense& head : heads_) out.push_back(head(bind, h));
  return out;
}

}  // namespace vfae
