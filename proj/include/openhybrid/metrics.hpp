#pragma once

#include <cstddef>
#include <vector>

namespace openhybrid {

/// Probability that a random known-class score exceeds a random unknown-class
/// score, ties counted half (Mann-Whitney rank formulation; exact, no
/// binning).
double auroc(const std::vector<double>& known_scores,
             const std::vector<double>& unknown_scores);

/// Unweighted mean of per-class F1 over the classes present in preds or
/// truths (labels 1..k+1).
double f_score_macro(const std::vector<int>& preds, const std::vector<int>& truths);

/// 1 - sqrt(k_train / k_test).
double openness(std::size_t k_train, std::size_t k_test);

struct EvalReport {
  double auroc = 0.0;
  double f_score_macro = 0.0;
  double overall_accuracy = 0.0;
  double openness = 0.0;
  std::vector<double> per_class_recall;  // index c-1 holds class c, size k+1
  double tau = 0.0;
  double s = 0.0;
  std::size_t n_known = 0;
  std::size_t n_unknown = 0;
};

/// Mean and population standard deviation (so a single report aggregates to
/// itself with zero spread), field by field.
struct ReportStats {
  EvalReport mean;
  EvalReport stddev;
};

ReportStats aggregate_reports(const std::vector<EvalReport>& reports);

}  // namespace openhybrid
