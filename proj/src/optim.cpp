#include "vfae/optim.hpp"

#include <cmath>

namespace vfae {

Adam::Adam(const ParameterStore& store, AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg.lr >= 0.0) || !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0) ||
      !(cfg.eps > 0.0)) {
    throw ContractError("Adam: need lr >= 0, beta1 and beta2 in [0, 1), eps > 0");
  }
  for (const Parameter& p : store) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void Adam::step(ParameterStore& store) {
  if (store.size() != m_.size()) {
    throw ContractError("Adam: store has " + std::to_string(store.size()) + " parameters, optimizer was built for " +
                        std::to_string(m_.size()));
  }
  for (const Parameter& p : store) {
    if (p.grad.size() != 0 && !p.grad.allFinite()) {
      throw NumericError("Adam: non-finite gradient in parameter '" + p.name + "'");
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  std::size_t i = 0;
  for (Parameter& p : store) {
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    ++i;
    if (p.grad.size() == 0) p.zero_grad();
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * p.grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
    p.grad.setZero();
  }
}

ParameterAverager::ParameterAverager(const ParameterStore& store, double decay) : decay_(decay) {
  if (!(decay >= 0.0 && decay < 1.0)) throw ContractError("ParameterAverager: decay must lie in [0, 1)");
  for (const Parameter& p : store) {
    acc_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    initial_.push_back(p.value);
  }
}

void ParameterAverager::update(const ParameterStore& store) {
  if (store.size() != acc_.size()) throw ContractError("ParameterAverager: parameter count changed");
  std::size_t i = 0;
  for (const Parameter& p : store) {
    acc_[i] = decay_ * acc_[i] + (1.0 - decay_) * p.value;
    ++i;
  }
  decay_pow_ *= decay_;
  ++n_;
}

ParameterStore ParameterAverager::averaged(const ParameterStore& like) const {
  if (like.size() != acc_.size()) throw ContractError("ParameterAverager: parameter count changed");
  ParameterStore out = like;
  std::size_t i = 0;
  for (Parameter& p : out) {
    p.value = n_ == 0 ? initial_[i] : Matrix(acc_[i] / (1.0 - decay_pow_));
    ++i;
  }
  return out;
}

}  // namespace vfae
