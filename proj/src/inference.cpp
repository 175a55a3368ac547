#include "openhybrid/inference.hpp"

#include <algorithm>
#include <cmath>

namespace openhybrid {

ScoreBatch score_batch(const Model& m, const Tensor& xs) {
  ScoreBatch out;
  out.logits = m.logits(xs);
  out.softmax = softmax_rows(out.logits);
  const std::size_t n = xs.rows();
  if (m.config().regime == Regime::kSoftmaxOnly) {
    out.log_prob = Tensor({n});
    for (std::size_t i = 0; i < n; ++i) {
      double mx = out.softmax(i, 0);
      for (std::size_t j = 1; j < out.softmax.cols(); ++j) mx = std::max(mx, out.softmax(i, j));
      out.log_prob.at(i) = std::log(mx);
    }
  } else {
    out.log_prob = m.log_prob(xs);
  }
  return out;
}

std::vector<double> rejection_scores(const Model& m, const Tensor& xs) {
  const Tensor t = score_batch(m, xs).log_prob;
  return std::vector<double>(t.data().begin(), t.data().end());
}

Threshold calibrate_threshold(const Model& m, const Tensor& train_xs, double s) {
  if (train_xs.rank() != 2 || train_xs.rows() == 0) {
    throw std::invalid_argument("calibrate_threshold: nonempty training batch required");
  }
  const std::vector<double> scores = rejection_scores(m, train_xs);
  Threshold t;
  t.s = s;
  t.min_train_logp = *std::min_element(scores.begin(), scores.end());
  t.tau = t.min_train_logp + s;
  return t;
}

std::vector<int> predict_batch(const Model& m, const Tensor& xs, const Threshold& t) {
  const ScoreBatch sb = score_batch(m, xs);
  const std::size_t n = xs.rows(), k = sb.softmax.cols();
  std::vector<int> preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (sb.log_prob.at(i) < t.tau) {
      preds[i] = static_cast<int>(k) + 1;
      continue;
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (sb.softmax(i, j) > sb.softmax(i, best)) best = j;
    }
    preds[i] = static_cast<int>(best) + 1;
  }
  return preds;
}

int predict(const Model& m, const Tensor& x, const Threshold& t) {
  Tensor row = x;
  if (row.rank() == 1) row = row.reshaped({1, x.size()});
  if (row.rank() != 2 || row.rows() != 1) {
    throw std::invalid_argument("predict: expected a single sample");
  }
  return predict_batch(m, row, t)[0];
}

}  // namespace openhybrid
