#include "openhybrid/optim.hpp"

#include <cmath>

namespace openhybrid {

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (double v : g.data()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (Tensor& g : grads) {
      for (double& v : g.data()) v *= f;
    }
  }
  return norm;
}

namespace {

void check_parallel(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("optimizer: gradient list size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i])) {
      throw std::invalid_argument("optimizer: gradient shape mismatch at index " +
                                  std::to_string(i));
    }
  }
}

}  // namespace

MomentumSgd::MomentumSgd(std::vector<Tensor*> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
  velocity_.reserve(params_.size());
  for (Tensor* p : params_) velocity_.emplace_back(p->shape());
}

void MomentumSgd::step(const std::vector<Tensor>& grads) {
  check_parallel(params_, grads);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& v = velocity_[i];
    Tensor& p = *params_[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      v.at(j) = momentum_ * v.at(j) + g.at(j);
      p.at(j) -= lr_ * v.at(j);
    }
  }
}

Adam::Adam(std::vector<Tensor*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Tensor* p : params_) {
    m_.emplace_back(p->shape());
    v_.emplace_back(p->shape());
  }
}

void Adam::step(const std::vector<Tensor>& grads) {
  check_parallel(params_, grads);
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    Tensor& p = *params_[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m.at(j) = beta1_ * m.at(j) + (1.0 - beta1_) * g.at(j);
      v.at(j) = beta2_ * v.at(j) + (1.0 - beta2_) * g.at(j) * g.at(j);
      const double mhat = m.at(j) / bc1;
      const double vhat = v.at(j) / bc2;
      p.at(j) -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace openhybrid
