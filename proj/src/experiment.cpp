#include "openhybrid/experiment.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace openhybrid {

EvalReport evaluate_open_set(const std::vector<int>& preds, const std::vector<int>& truths,
                             const std::vector<double>& known_scores,
                             const std::vector<double>& unknown_scores,
                             std::size_t k_known, std::size_t k_test_classes,
                             const Threshold& threshold) {
  if (preds.size() != truths.size()) {
    throw std::invalid_argument("evaluate_open_set: preds/truths length mismatch");
  }
  EvalReport r;
  r.auroc = auroc(known_scores, unknown_scores);
  r.f_score_macro = f_score_macro(preds, truths);
  r.openness = openness(k_known, k_test_classes);
  r.tau = threshold.tau;
  r.s = threshold.s;
  r.n_known = known_scores.size();
  r.n_unknown = unknown_scores.size();

  std::size_t correct = 0;
  std::vector<std::size_t> class_total(k_known + 1, 0), class_hit(k_known + 1, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t c = static_cast<std::size_t>(truths[i] - 1);
    if (c >= class_total.size()) {
      throw std::invalid_argument("evaluate_open_set: truth label outside 1..k+1");
    }
    class_total[c]++;
    if (preds[i] == truths[i]) {
      ++correct;
      class_hit[c]++;
    }
  }
  r.overall_accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
  r.per_class_recall.resize(k_known + 1, 0.0);
  for (std::size_t c = 0; c <= k_known; ++c) {
    r.per_class_recall[c] = class_total[c] == 0
                                ? 0.0
                                : static_cast<double>(class_hit[c]) /
                                      static_cast<double>(class_total[c]);
  }
  return r;
}

ModelConfig configured_for(ModelConfig base, std::size_t input_dim, std::size_t k_known,
                           Regime regime) {
  base.input_dim = input_dim;
  base.n_classes = k_known;
  base.regime = regime;
  return base;
}

PartitionRun run_partition(const LabeledDataset& base, const ModelConfig& mc,
                           const TrainConfig& tc, std::size_t k_known,
                           std::uint64_t partition_seed, double s) {
  OpenSetSplit split = partition(base, k_known, partition_seed);
  const ModelConfig cfg = configured_for(mc, base.features.cols(), k_known, tc.regime);
  const std::uint64_t run_seed = mix_seed(tc.seed, partition_seed);
  Model model(cfg, run_seed);
  TrainConfig run_tc = tc;
  run_tc.seed = run_seed;
  Trainer trainer(model, run_tc);

  PartitionRun run;
  run.partition_seed = partition_seed;
  run.spec = split.spec;
  run.fit_log = trainer.fit(split.train);

  run.threshold = calibrate_threshold(model, split.train.features, s);
  run.train_scores = rejection_scores(model, split.train.features);

  const std::vector<double> test_scores = rejection_scores(model, split.test.features);
  const std::vector<int> preds = predict_batch(model, split.test.features, run.threshold);
  std::size_t above = 0;
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    if (split.test.labels[i] == static_cast<int>(k_known) + 1) {
      run.test_unknown_scores.push_back(test_scores[i]);
      if (test_scores[i] >= run.threshold.tau) ++above;
    } else {
      run.test_known_scores.push_back(test_scores[i]);
    }
  }
  run.overlap_above_tau =
      run.test_unknown_scores.empty()
          ? 0.0
          : static_cast<double>(above) / static_cast<double>(run.test_unknown_scores.size());
  run.report = evaluate_open_set(preds, split.test.labels, run.test_known_scores,
                                 run.test_unknown_scores, k_known, split.k_test_classes,
                                 run.threshold);
  return run;
}

RegimeSummary run_partitions(const LabeledDataset& base, const ModelConfig& mc,
                             const TrainConfig& tc, std::size_t k_known,
                             const std::vector<std::uint64_t>& partition_seeds, double s) {
  if (partition_seeds.empty()) {
    throw std::invalid_argument("run_partitions: need at least one partition seed");
  }
  RegimeSummary summary;
  summary.regime = tc.regime;
  summary.runs.resize(partition_seeds.size());
  parallel_for(partition_seeds.size(), thread_cap(), [&](std::size_t i) {
    summary.runs[i] = run_partition(base, mc, tc, k_known, partition_seeds[i], s);
  });
  std::vector<EvalReport> reports;
  reports.reserve(summary.runs.size());
  for (const PartitionRun& r : summary.runs) reports.push_back(r.report);
  summary.stats = aggregate_reports(reports);
  return summary;
}

std::vector<RegimeSummary> compare_regimes(const LabeledDataset& base, const ModelConfig& mc,
                                           const TrainConfig& tc, std::size_t k_known,
                                           const std::vector<std::uint64_t>& partition_seeds,
                                           double s, const std::vector<Regime>& regimes) {
  std::vector<RegimeSummary> out;
  out.reserve(regimes.size());
  for (Regime r : regimes) {
    TrainConfig rtc = tc;
    rtc.regime = r;
    out.push_back(run_partitions(base, mc, rtc, k_known, partition_seeds, s));
  }
  return out;
}

std::size_t thread_cap() {
  if (const char* env = std::getenv("OPENHYBRID_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
    return 1;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t n, std::size_t max_threads,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min(n, std::max<std::size_t>(1, max_threads));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(body);
  for (std::thread& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace openhybrid
