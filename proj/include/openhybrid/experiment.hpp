#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "openhybrid/data.hpp"
#include "openhybrid/inference.hpp"
#include "openhybrid/metrics.hpp"
#include "openhybrid/trainer.hpp"

namespace openhybrid {

/// Everything produced by one train/calibrate/evaluate cycle on one seeded
/// class partition.
struct PartitionRun {
  std::uint64_t partition_seed = 0;
  PartitionSpec spec;
  Threshold threshold;
  EvalReport report;
  FitResult fit_log;
  std::vector<double> train_scores;
  std::vector<double> test_known_scores;
  std::vector<double> test_unknown_scores;
  // Fraction of test-unknown samples at or above tau, i.e. not rejected.
  double overlap_above_tau = 0.0;
};

struct RegimeSummary {
  Regime regime = Regime::kJoint;
  ReportStats stats;
  std::vector<PartitionRun> runs;
};

/// Builds the evaluation report from scored predictions. k_test_classes is
/// the number of distinct original classes in the test set (knowns plus
/// unknowns) and feeds the openness field.
EvalReport evaluate_open_set(const std::vector<int>& preds, const std::vector<int>& truths,
                             const std::vector<double>& known_scores,
                             const std::vector<double>& unknown_scores,
                             std::size_t k_known, std::size_t k_test_classes,
                             const Threshold& threshold);

/// Returns `base` with the wiring fields (input_dim, n_classes, regime) set
/// for one partitioned run.
ModelConfig configured_for(ModelConfig base, std::size_t input_dim, std::size_t k_known,
                           Regime regime);

/// One partition: split, train, calibrate tau on the training split with
/// slack s, score and evaluate the test split.
PartitionRun run_partition(const LabeledDataset& base, const ModelConfig& mc,
                           const TrainConfig& tc, std::size_t k_known,
                           std::uint64_t partition_seed, double s);

/// The partition protocol: one run per seed, aggregated mean and std.
/// Partitions run concurrently up to thread_cap().
RegimeSummary run_partitions(const LabeledDataset& base, const ModelConfig& mc,
                             const TrainConfig& tc, std::size_t k_known,
                             const std::vector<std::uint64_t>& partition_seeds, double s);

/// run_partitions for each requested regime on the same seeds.
std::vector<RegimeSummary> compare_regimes(const LabeledDataset& base, const ModelConfig& mc,
                                           const TrainConfig& tc, std::size_t k_known,
                                           const std::vector<std::uint64_t>& partition_seeds,
                                           double s, const std::vector<Regime>& regimes);

/// Concurrency budget: OPENHYBRID_THREADS if set (minimum 1), else the
/// hardware concurrency.
std::size_t thread_cap();

/// Runs fn(0..n-1) on up to max_threads workers; results must go to
/// preassigned slots so scheduling does not affect output.
void parallel_for(std::size_t n, std::size_t max_threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace openhybrid
