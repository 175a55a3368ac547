#include "openhybrid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace openhybrid {

double auroc(const std::vector<double>& known_scores,
             const std::vector<double>& unknown_scores) {
  if (known_scores.empty() || unknown_scores.empty()) {
    throw std::invalid_argument("auroc: both score lists must be nonempty");
  }
  struct Entry {
    double score;
    bool known;
  };
  std::vector<Entry> all;
  all.reserve(known_scores.size() + unknown_scores.size());
  for (double s : known_scores) all.push_back({s, true});
  for (double s : unknown_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  // Rank sum of the known group with tied ranks averaged.
  double rank_sum_known = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    // 1-based ranks i+1 .. j average to (i + j + 1) / 2.
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (all[t].known) rank_sum_known += avg_rank;
    }
    i = j;
  }
  const double nk = static_cast<double>(known_scores.size());
  const double nu = static_cast<double>(unknown_scores.size());
  const double u = rank_sum_known - nk * (nk + 1.0) / 2.0;
  return u / (nk * nu);
}

double f_score_macro(const std::vector<int>& preds, const std::vector<int>& truths) {
  if (preds.size() != truths.size()) {
    throw std::invalid_argument("f_score_macro: length mismatch");
  }
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;
  };
  std::map<int, Counts> by_class;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == truths[i]) {
      by_class[preds[i]].tp++;
    } else {
      by_class[preds[i]].fp++;
      by_class[truths[i]].fn++;
    }
  }
  if (by_class.empty()) throw std::invalid_argument("f_score_macro: empty input");
  double sum = 0.0;
  for (const auto& [cls, c] : by_class) {
    (void)cls;
    const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    sum += denom > 0.0 ? 2.0 * static_cast<double>(c.tp) / denom : 0.0;
  }
  return sum / static_cast<double>(by_class.size());
}

double openness(std::size_t k_train, std::size_t k_test) {
  if (k_train < 1 || k_train > k_test) {
    throw std::invalid_argument("openness: need 1 <= k_train <= k_test");
  }
  return 1.0 - std::sqrt(static_cast<double>(k_train) / static_cast<double>(k_test));
}

namespace {

void accumulate(EvalReport& sum, EvalReport& sumsq, const EvalReport& r) {
  sum.auroc += r.auroc;
  sumsq.auroc += r.auroc * r.auroc;
  sum.f_score_macro += r.f_score_macro;
  sumsq.f_score_macro += r.f_score_macro * r.f_score_macro;
  sum.overall_accuracy += r.overall_accuracy;
  sumsq.overall_accuracy += r.overall_accuracy * r.overall_accuracy;
  sum.openness += r.openness;
  sumsq.openness += r.openness * r.openness;
  sum.tau += r.tau;
  sumsq.tau += r.tau * r.tau;
  sum.s += r.s;
  sumsq.s += r.s * r.s;
  sum.n_known += r.n_known;
  sum.n_unknown += r.n_unknown;
  for (std::size_t i = 0; i < r.per_class_recall.size(); ++i) {
    sum.per_class_recall[i] += r.per_class_recall[i];
    sumsq.per_class_recall[i] += r.per_class_recall[i] * r.per_class_recall[i];
  }
}

double finish(double sum, double sumsq, double n, double* mean_out) {
  const double mean = sum / n;
  *mean_out = mean;
  const double var = std::max(0.0, sumsq / n - mean * mean);
  return std::sqrt(var);
}

}  // namespace

ReportStats aggregate_reports(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_reports: no reports");
  const std::size_t recalls = reports.front().per_class_recall.size();
  for (const EvalReport& r : reports) {
    if (r.per_class_recall.size() != recalls) {
      throw std::invalid_argument("aggregate_reports: recall length mismatch");
    }
  }
  EvalReport sum, sumsq;
  sum.per_class_recall.assign(recalls, 0.0);
  sumsq.per_class_recall.assign(recalls, 0.0);
  for (const EvalReport& r : reports) accumulate(sum, sumsq, r);

  const double n = static_cast<double>(reports.size());
  ReportStats stats;
  stats.mean.per_class_recall.assign(recalls, 0.0);
  stats.stddev.per_class_recall.assign(recalls, 0.0);
  stats.stddev.auroc = finish(sum.auroc, sumsq.auroc, n, &stats.mean.auroc);
  stats.stddev.f_score_macro =
      finish(sum.f_score_macro, sumsq.f_score_macro, n, &stats.mean.f_score_macro);
  stats.stddev.overall_accuracy =
      finish(sum.overall_accuracy, sumsq.overall_accuracy, n, &stats.mean.overall_accuracy);
  stats.stddev.openness = finish(sum.openness, sumsq.openness, n, &stats.mean.openness);
  stats.stddev.tau = finish(sum.tau, sumsq.tau, n, &stats.mean.tau);
  stats.stddev.s = finish(sum.s, sumsq.s, n, &stats.mean.s);
  for (std::size_t i = 0; i < recalls; ++i) {
    stats.stddev.per_class_recall[i] = finish(
        sum.per_class_recall[i], sumsq.per_class_recall[i], n, &stats.mean.per_class_recall[i]);
  }
  stats.mean.n_known = sum.n_known / reports.size();
  stats.mean.n_unknown = sum.n_unknown / reports.size();
  return stats;
}

}  // namespace openhybrid
