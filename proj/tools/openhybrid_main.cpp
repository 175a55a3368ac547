#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "openhybrid/config.hpp"
#include "openhybrid/experiment.hpp"
#include "openhybrid/io_util.hpp"

namespace {

using namespace openhybrid;

constexpr const char* kUsage =
    "usage: openhybrid {train|eval|histogram|compare} --config <path> [--key value ...]\n"
    "config keys can be overridden on the command line, e.g. --epochs 10\n";

struct Cli {
  std::string command;
  ExperimentConfig cfg;
};

Cli parse_cli(int argc, char** argv) {
  if (argc < 2) throw std::invalid_argument(std::string("missing command\n") + kUsage);
  Cli cli;
  cli.command = argv[1];
  if (cli.command != "train" && cli.command != "eval" && cli.command != "histogram" &&
      cli.command != "compare") {
    throw std::invalid_argument("unknown command: " + cli.command + "\n" + kUsage);
  }
  std::string config_path;
  std::map<std::string, std::string> overrides;
  for (int i = 2; i < argc; ++i) {
    std::string key = argv[i];
    if (key.rfind("--", 0) != 0 || key.size() <= 2) {
      throw std::invalid_argument("expected --key, got: " + key + "\n" + kUsage);
    }
    key = key.substr(2);
    if (i + 1 >= argc) throw std::invalid_argument("missing value for --" + key);
    const std::string value = argv[++i];
    if (key == "config") {
      config_path = value;
    } else {
      overrides[key] = value;
    }
  }
  if (config_path.empty()) {
    throw std::invalid_argument(std::string("--config is required\n") + kUsage);
  }
  std::map<std::string, std::string> kv = parse_config_file(config_path);
  for (const auto& [key, value] : overrides) kv[key] = value;
  cli.cfg = ExperimentConfig::from_map(kv);
  return cli;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_loss_log(const std::string& path, const FitResult& fit, bool with_phase) {
  std::ostringstream os;
  os << (with_phase ? "epoch,phase,L_C,L_D_bits_per_dim,total\n"
                    : "epoch,L_C,L_D_bits_per_dim,total\n");
  for (const EpochLogRow& row : fit.log) {
    os << row.epoch << ',';
    if (with_phase) os << row.phase << ',';
    os << format_double(row.l_c) << ',' << format_double(row.l_d_bits) << ','
       << format_double(row.total) << '\n';
  }
  io::atomic_write_text(path, os.str());
}

void write_report_csv(const std::string& path, const EvalReport& r) {
  std::ostringstream os;
  os << "auroc,f_score_macro,overall_accuracy,openness,tau,s,n_known,n_unknown,"
        "per_class_recall\n";
  os << format_double(r.auroc) << ',' << format_double(r.f_score_macro) << ','
     << format_double(r.overall_accuracy) << ',' << format_double(r.openness) << ','
     << format_double(r.tau) << ',' << format_double(r.s) << ',' << r.n_known << ','
     << r.n_unknown << ',';
  for (std::size_t i = 0; i < r.per_class_recall.size(); ++i) {
    if (i) os << ';';
    os << format_double(r.per_class_recall[i]);
  }
  os << '\n';
  io::atomic_write_text(path, os.str());
}

void write_report_txt(const std::string& path, const EvalReport& r, const PartitionSpec& spec,
                      Regime regime) {
  std::ostringstream os;
  os << "regime:            " << to_string(regime) << '\n';
  os << "partition seed:    " << spec.seed << '\n';
  os << "known classes:     ";
  for (std::size_t i = 0; i < spec.known_classes.size(); ++i) {
    if (i) os << ' ';
    os << spec.known_classes[i];
  }
  os << '\n' << "unknown classes:   ";
  for (std::size_t i = 0; i < spec.unknown_classes.size(); ++i) {
    if (i) os << ' ';
    os << spec.unknown_classes[i];
  }
  os << '\n';
  os << "auroc:             " << format_double(r.auroc) << '\n';
  os << "macro F-score:     " << format_double(r.f_score_macro) << '\n';
  os << "overall accuracy:  " << format_double(r.overall_accuracy) << '\n';
  os << "openness:          " << format_double(r.openness) << '\n';
  os << "tau (nats):        " << format_double(r.tau) << "  (min train logp "
     << format_double(r.tau - r.s) << " + s " << format_double(r.s) << ")\n";
  os << "test knowns:       " << r.n_known << '\n';
  os << "test unknowns:     " << r.n_unknown << '\n';
  os << "per-class recall:  ";
  for (std::size_t i = 0; i < r.per_class_recall.size(); ++i) {
    if (i) os << ' ';
    os << format_double(r.per_class_recall[i]);
  }
  os << '\n';
  io::atomic_write_text(path, os.str());
}

int cmd_train(const Cli& cli) {
  const ExperimentConfig& cfg = cli.cfg;
  LabeledDataset ds = make_dataset(cfg);
  if (!cfg.export_dataset_csv.empty()) write_dataset_csv(cfg.export_dataset_csv, ds);
  OpenSetSplit split = partition(ds, cfg.k_known, cfg.partition_seeds[0]);
  const ModelConfig mc =
      configured_for(cfg.model, ds.features.cols(), cfg.k_known, cfg.train.regime);
  const std::uint64_t run_seed = mix_seed(cfg.train.seed, cfg.partition_seeds[0]);
  Model model(mc, run_seed);
  TrainConfig tc = cfg.train;
  tc.seed = run_seed;
  Trainer trainer(model, tc);
  FitResult fit = trainer.fit(split.train);
  std::filesystem::create_directories(cfg.out_dir);
  model.save(cfg.checkpoint_path());
  write_loss_log(cfg.out_dir + "/loss_log.csv", fit,
                 cfg.train.regime == Regime::kPretrainedEncoder);
  std::cout << "trained " << to_string(cfg.train.regime) << " model on "
            << split.train.size() << " samples; checkpoint: " << cfg.checkpoint_path()
            << '\n';
  return 0;
}

struct EvalArtifacts {
  OpenSetSplit split;
  Model model;
  Threshold threshold;
};

EvalArtifacts load_for_eval(const ExperimentConfig& cfg) {
  LabeledDataset ds = make_dataset(cfg);
  OpenSetSplit split = partition(ds, cfg.k_known, cfg.partition_seeds[0]);
  const ModelConfig mc =
      configured_for(cfg.model, ds.features.cols(), cfg.k_known, cfg.train.regime);
  Model model = Model::load(mc, cfg.checkpoint_path());
  Threshold threshold = calibrate_threshold(model, split.train.features, cfg.s);
  return {std::move(split), std::move(model), threshold};
}

int cmd_eval(const Cli& cli) {
  const ExperimentConfig& cfg = cli.cfg;
  EvalArtifacts a = load_for_eval(cfg);
  const std::vector<double> test_scores = rejection_scores(a.model, a.split.test.features);
  const std::vector<int> preds = predict_batch(a.model, a.split.test.features, a.threshold);
  std::vector<double> known_scores, unknown_scores;
  const int unknown_label = static_cast<int>(cfg.k_known) + 1;
  for (std::size_t i = 0; i < a.split.test.size(); ++i) {
    (a.split.test.labels[i] == unknown_label ? unknown_scores : known_scores)
        .push_back(test_scores[i]);
  }
  const EvalReport report =
      evaluate_open_set(preds, a.split.test.labels, known_scores, unknown_scores,
                        cfg.k_known, a.split.k_test_classes, a.threshold);

  std::filesystem::create_directories(cfg.out_dir);
  write_report_csv(cfg.out_dir + "/eval_report.csv", report);
  write_report_txt(cfg.out_dir + "/eval_report.txt", report, a.split.spec, cfg.train.regime);

  const ScoreBatch sb = score_batch(a.model, a.split.test.features);
  std::ostringstream os;
  os << "sample_id,true_label,log_prob_nats,predicted_label,softmax_max\n";
  for (std::size_t i = 0; i < a.split.test.size(); ++i) {
    double mx = sb.softmax(i, 0);
    for (std::size_t j = 1; j < sb.softmax.cols(); ++j) mx = std::max(mx, sb.softmax(i, j));
    os << i << ',' << a.split.test.labels[i] << ',' << format_double(sb.log_prob.at(i)) << ','
       << preds[i] << ',' << format_double(mx) << '\n';
  }
  io::atomic_write_text(cfg.out_dir + "/scores.csv", os.str());
  std::cout << "auroc " << format_double(report.auroc) << ", macro F "
            << format_double(report.f_score_macro) << ", accuracy "
            << format_double(report.overall_accuracy) << '\n';
  return 0;
}

int cmd_histogram(const Cli& cli) {
  const ExperimentConfig& cfg = cli.cfg;
  EvalArtifacts a = load_for_eval(cfg);
  const std::vector<double> train_scores = rejection_scores(a.model, a.split.train.features);
  const std::vector<double> test_scores = rejection_scores(a.model, a.split.test.features);
  const int unknown_label = static_cast<int>(cfg.k_known) + 1;
  std::ostringstream os;
  os << "split,log_prob_nats\n";
  for (double s : train_scores) os << "train," << format_double(s) << '\n';
  std::size_t unknown_total = 0, unknown_above = 0;
  for (std::size_t i = 0; i < a.split.test.size(); ++i) {
    const bool unknown = a.split.test.labels[i] == unknown_label;
    os << (unknown ? "test-unknown," : "test-known,") << format_double(test_scores[i]) << '\n';
    if (unknown) {
      ++unknown_total;
      if (test_scores[i] >= a.threshold.tau) ++unknown_above;
    }
  }
  const double overlap =
      unknown_total == 0
          ? 0.0
          : static_cast<double>(unknown_above) / static_cast<double>(unknown_total);
  os << "# overlap_above_tau," << format_double(overlap) << '\n';
  std::filesystem::create_directories(cfg.out_dir);
  io::atomic_write_text(cfg.out_dir + "/histogram.csv", os.str());
  std::cout << "overlap_above_tau " << format_double(overlap) << '\n';
  return 0;
}

int cmd_compare(const Cli& cli) {
  const ExperimentConfig& cfg = cli.cfg;
  LabeledDataset ds = make_dataset(cfg);
  const std::vector<Regime> regimes = {Regime::kJoint, Regime::kPretrainedEncoder,
                                       Regime::kSoftmaxOnly, Regime::kRawInputFlow};
  const std::vector<RegimeSummary> rows = compare_regimes(
      ds, cfg.model, cfg.train, cfg.k_known, cfg.partition_seeds, cfg.s, regimes);

  std::filesystem::create_directories(cfg.out_dir);
  std::ostringstream csv, txt, parts;
  csv << "regime,auroc_mean,auroc_std,f_score_mean,f_score_std,accuracy_mean,accuracy_std\n";
  txt << "regime               auroc            f-score          accuracy\n";
  parts << "regime,partition_seed,auroc,f_score_macro,overall_accuracy,tau,overlap_above_tau\n";
  for (const RegimeSummary& r : rows) {
    const EvalReport& m = r.stats.mean;
    const EvalReport& sd = r.stats.stddev;
    csv << to_string(r.regime) << ',' << format_double(m.auroc) << ','
        << format_double(sd.auroc) << ',' << format_double(m.f_score_macro) << ','
        << format_double(sd.f_score_macro) << ',' << format_double(m.overall_accuracy) << ','
        << format_double(sd.overall_accuracy) << '\n';
    char line[256];
    std::snprintf(line, sizeof(line), "%-20s %.4f +- %.4f  %.4f +- %.4f  %.4f +- %.4f\n",
                  to_string(r.regime).c_str(), m.auroc, sd.auroc, m.f_score_macro,
                  sd.f_score_macro, m.overall_accuracy, sd.overall_accuracy);
    txt << line;
    for (const PartitionRun& run : r.runs) {
      parts << to_string(r.regime) << ',' << run.partition_seed << ','
            << format_double(run.report.auroc) << ',' << format_double(run.report.f_score_macro)
            << ',' << format_double(run.report.overall_accuracy) << ','
            << format_double(run.threshold.tau) << ',' << format_double(run.overlap_above_tau)
            << '\n';
    }
  }
  io::atomic_write_text(cfg.out_dir + "/compare.csv", csv.str());
  io::atomic_write_text(cfg.out_dir + "/compare.txt", txt.str());
  io::atomic_write_text(cfg.out_dir + "/compare_partitions.csv", parts.str());
  std::cout << txt.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const Cli cli = parse_cli(argc, argv);
    if (cli.command == "train") return cmd_train(cli);
    if (cli.command == "eval") return cmd_eval(cli);
    if (cli.command == "histogram") return cmd_histogram(cli);
    return cmd_compare(cli);
  } catch (const openhybrid::DivergenceError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
