#pragma once

#include <vector>

#include "openhybrid/tensor.hpp"

namespace openhybrid {

/// Scales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

/// SGD with momentum: v = mu * v + g; p -= lr * v.
class MomentumSgd {
 public:
  MomentumSgd(std::vector<Tensor*> params, double lr, double momentum);

  /// `grads` parallel to the parameter list given at construction.
  void step(const std::vector<Tensor>& grads);

  double lr() const { return lr_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<Tensor> velocity_;
  double lr_;
  double momentum_;
};

/// Adam with bias-corrected first and second moments.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step(const std::vector<Tensor>& grads);

  double lr() const { return lr_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace openhybrid
