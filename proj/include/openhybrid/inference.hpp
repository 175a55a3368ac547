#pragma once

#include <vector>

#include "openhybrid/model.hpp"

namespace openhybrid {

/// Rejection threshold in nats: tau = min_train_logp + s. Samples scoring
/// strictly below tau are rejected as unknown; ties go to the known branch.
struct Threshold {
  double tau = 0.0;
  double s = 0.0;
  double min_train_logp = 0.0;
};

/// Raw per-sample scores for downstream metrics and histograms.
struct ScoreBatch {
  Tensor log_prob;  // [n] rejection score in nats (see rejection_scores)
  Tensor logits;    // [n, k]
  Tensor softmax;   // [n, k]
};

/// The score compared against tau: the flow log-likelihood, except for
/// softmax_only models, which score by log max-softmax (also in nats).
std::vector<double> rejection_scores(const Model& m, const Tensor& xs);

ScoreBatch score_batch(const Model& m, const Tensor& xs);

/// tau = min over the training samples of the rejection score, plus s.
Threshold calibrate_threshold(const Model& m, const Tensor& train_xs, double s);

/// Class in {1..k+1}: k+1 iff the rejection score is strictly below tau,
/// otherwise argmax of the classifier softmax.
int predict(const Model& m, const Tensor& x, const Threshold& t);
std::vector<int> predict_batch(const Model& m, const Tensor& xs, const Threshold& t);

}  // namespace openhybrid
