#pragma once

#include <cstdint>
#include <vector>

#include "openhybrid/data.hpp"
#include "openhybrid/model.hpp"
#include "openhybrid/optim.hpp"

namespace openhybrid {

struct TrainConfig {
  Regime regime = Regime::kJoint;
  double lambda = 1.0;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lr_classifier = 1e-2;
  double momentum = 0.9;
  double lr_flow = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 10.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double l_c = 0.0;
  double l_d_bits = 0.0;  // density loss in bits per dimension
};

struct EpochLogRow {
  std::size_t epoch = 0;  // 1-based, continuous across phases
  int phase = 1;          // meaningful for pretrained_encoder only
  double l_c = 0.0;
  double l_d_bits = 0.0;
  double total = 0.0;
};

struct FitResult {
  std::vector<EpochLogRow> log;
  std::size_t clip_events = 0;  // sub-steps whose gradient norm was clipped
};

/// Handles to a full-objective graph, for gradient verification.
struct FullLossNodes {
  Value total;
  Value l_c;
  Value l_d_bits;
};

/// Builds total = L_C + lambda * L_D on one graph with the encoder (or, in
/// the raw-input regime, the flow) shared between both heads, exactly as the
/// joint objective prescribes. `override_leaf` reroutes one parameter tensor
/// to a caller-owned leaf for per-parameter gradient checks.
FullLossNodes build_full_loss(Graph& g, const Model& m, const Tensor& x,
                              const std::vector<int>& labels, double lambda,
                              const BindOverride* override_leaf = nullptr);

/// Same objective evaluated without keeping the graph.
LossBreakdown full_loss(const Model& m, const Tensor& x, const std::vector<int>& labels,
                        double lambda);

/// Alternating-update trainer. Every batch takes a momentum-SGD sub-step on
/// the classification loss followed by an Adam sub-step on the scaled density
/// loss; the regime decides which parameter groups each sub-step touches.
class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& cfg);

  /// Both sub-steps on one batch (labels 1-based). Returns the loss values
  /// observed during the step.
  LossBreakdown train_step(const Tensor& x, const std::vector<int>& labels);

  /// Minibatch training over shuffled epochs. For pretrained_encoder this
  /// runs cfg.epochs epochs of phase 1 (encoder+classifier) and then
  /// cfg.epochs epochs of phase 2 (flow only, encoder and classifier
  /// untouched). Throws DivergenceError tagged with the epoch index.
  FitResult fit(const SplitData& train);

  bool in_phase2() const { return phase2_; }
  void set_phase2(bool v) { phase2_ = v; }

 private:
  LossBreakdown classifier_substep(const Tensor& x, const std::vector<int>& labels);
  double flow_substep(const Tensor& x);

  Model& model_;
  TrainConfig cfg_;
  MomentumSgd sgd_;
  Adam adam_;
  Rng shuffle_rng_;
  bool phase2_ = false;
  std::size_t clip_events_ = 0;

  friend struct TrainerTestPeek;
};

}  // namespace openhybrid
