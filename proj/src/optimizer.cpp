#include "seqtok/optimizer.hpp"

#include <cmath>

namespace seqtok {

Adam::Adam(std::vector<Param*> params, Scalar beta1, Scalar beta2, Scalar eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Param* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(Scalar lr) {
  ++t_;
  const Scalar bc1 = 1.0 - std::pow(beta1_, static_cast<Scalar>(t_));
  const Scalar bc2 = 1.0 - std::pow(beta2_, static_cast<Scalar>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param& p = *params_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    Mat m_hat = m_[i] / bc1;
    Mat v_hat = v_[i] / bc2;
    p.value.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps_);
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

Scalar clip_grad_norm(const std::vector<Param*>& params, Scalar max_norm) {
  Scalar sq = 0;
  for (const Param* p : params) sq += p->grad.squaredNorm();
  const Scalar norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const Scalar scale = max_norm / norm;
    for (Param* p : params) p->grad *= scale;
  }
  return norm;
}

EmaShadow::EmaShadow(std::vector<Param*> params) : params_(std::move(params)) {
  shadows_.reserve(params_.size());
  for (const Param* p : params_) shadows_.push_back(p->value);
}

void EmaShadow::update(Scalar decay) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    shadows_[i] = decay * shadows_[i] + (1.0 - decay) * params_[i]->value;
  }
}

void EmaShadow::swap_in() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i]->value.swap(shadows_[i]);
}

}  // namespace seqtok
