#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

#ifndef OPENHYBRID_CLI_BIN
#error "OPENHYBRID_CLI_BIN must point at the openhybrid executable"
#endif

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OPENHYBRID_CLI_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("openhybrid_cli_test_" + unique())) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static std::string unique() {
    static int counter = 0;
    return std::to_string(::getpid()) + "_" + std::to_string(counter++);
  }
  fs::path path_;
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  f << content;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::vector<std::string> lines_of(const std::string& path) {
  std::ifstream f(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) lines.push_back(line);
  return lines;
}

// Fields of a simple CSV line.
std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string base_config(const TempDir& dir, const std::string& extra = "") {
  const std::string path = dir.file("config.cfg");
  write_file(path,
             "# synthetic desk-scale run\n"
             "dataset = synthetic\n"
             "classes = 10\n"
             "per_class = 20\n"
             "dim = 2\n"
             "spread = 0.5\n"
             "data_seed = 7\n"
             "k_known = 6\n"
             "partition_seeds = 1\n"
             "epochs = 2\n"
             "batch_size = 32\n"
             "d_latent = 4\n"
             "encoder_hidden = 8\n"
             "classifier_hidden = 6\n"
             "flow_pairs = 1\n"
             "flow_hidden = 4\n"
             "s = 0.0\n"
             "out_dir = " +
                 dir.file("out") + "\n" + extra);
  return path;
}

TEST(CliTrain, ProducesCheckpointAndLossLog) {
  TempDir dir;
  const std::string cfg = base_config(dir);
  ASSERT_EQ(run_cli("train --config " + cfg), 0);
  EXPECT_TRUE(fs::exists(dir.file("out/model.ohyb")));
  const auto log = lines_of(dir.file("out/loss_log.csv"));
  ASSERT_EQ(log.size(), 3u);  // header + one row per epoch
  EXPECT_EQ(log[0], "epoch,L_C,L_D_bits_per_dim,total");
  EXPECT_EQ(fields_of(log[1])[0], "1");
  EXPECT_EQ(fields_of(log[2])[0], "2");
}

TEST(CliTrain, CommandLineOverridesConfigFile) {
  TempDir dir;
  const std::string cfg = base_config(dir);
  ASSERT_EQ(run_cli("train --config " + cfg + " --epochs 3"), 0);
  EXPECT_EQ(lines_of(dir.file("out/loss_log.csv")).size(), 4u);
}

TEST(CliTrain, PretrainedLogCarriesPhaseColumn) {
  TempDir dir;
  const std::string cfg = base_config(dir, "regime = pretrained_encoder\n");
  ASSERT_EQ(run_cli("train --config " + cfg), 0);
  const auto log = lines_of(dir.file("out/loss_log.csv"));
  ASSERT_EQ(log.size(), 5u);  // header + 2 epochs per phase
  EXPECT_EQ(log[0], "epoch,phase,L_C,L_D_bits_per_dim,total");
  EXPECT_EQ(fields_of(log[1])[1], "1");
  EXPECT_EQ(fields_of(log[4])[1], "2");
  EXPECT_EQ(fields_of(log[4])[0], "4");
}

TEST(CliEval, ReportScoresAndDeterminism) {
  TempDir dir;
  const std::string cfg = base_config(dir);
  ASSERT_EQ(run_cli("train --config " + cfg), 0);
  ASSERT_EQ(run_cli("eval --config " + cfg), 0);

  const auto report = lines_of(dir.file("out/eval_report.csv"));
  ASSERT_EQ(report.size(), 2u);
  const auto head = fields_of(report[0]);
  const auto vals = fields_of(report[1]);
  ASSERT_EQ(head.size(), vals.size());
  ASSERT_GE(head.size(), 8u);
  EXPECT_EQ(head[0], "auroc");
  const double auroc_v = std::stod(vals[0]);
  EXPECT_GE(auroc_v, 0.0);
  EXPECT_LE(auroc_v, 1.0);
  // openness for 6 of 10 classes is 22.54%.
  EXPECT_NEAR(std::stod(vals[3]), 0.2254, 5e-5);
  // n_known = 6*4 held-out, n_unknown = 4*20.
  EXPECT_EQ(vals[6], "24");
  EXPECT_EQ(vals[7], "80");

  const auto scores = lines_of(dir.file("out/scores.csv"));
  ASSERT_EQ(scores.size(), 1u + 104u);
  EXPECT_EQ(scores[0], "sample_id,true_label,log_prob_nats,predicted_label,softmax_max");
  const auto row = fields_of(scores[1]);
  ASSERT_EQ(row.size(), 5u);
  const int pred = std::stoi(row[3]);
  EXPECT_GE(pred, 1);
  EXPECT_LE(pred, 7);

  // Evaluating the same checkpoint twice yields byte-identical artifacts.
  const std::string first_report = slurp(dir.file("out/eval_report.csv"));
  const std::string first_scores = slurp(dir.file("out/scores.csv"));
  ASSERT_EQ(run_cli("eval --config " + cfg), 0);
  EXPECT_EQ(slurp(dir.file("out/eval_report.csv")), first_report);
  EXPECT_EQ(slurp(dir.file("out/scores.csv")), first_scores);
}

TEST(CliHistogram, OneRowPerSamplePlusOverlap) {
  TempDir dir;
  const std::string cfg = base_config(dir);
  ASSERT_EQ(run_cli("train --config " + cfg), 0);
  ASSERT_EQ(run_cli("histogram --config " + cfg), 0);
  const auto rows = lines_of(dir.file("out/histogram.csv"));
  // header + 96 train + 104 test + trailing overlap comment.
  ASSERT_EQ(rows.size(), 1u + 96u + 104u + 1u);
  EXPECT_EQ(rows[0], "split,log_prob_nats");
  EXPECT_EQ(fields_of(rows[1])[0], "train");
  EXPECT_EQ(rows.back().rfind("# overlap_above_tau,", 0), 0u);
  std::size_t train_rows = 0, known_rows = 0, unknown_rows = 0;
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    const std::string tag = fields_of(rows[i])[0];
    train_rows += tag == "train";
    known_rows += tag == "test-known";
    unknown_rows += tag == "test-unknown";
  }
  EXPECT_EQ(train_rows, 96u);
  EXPECT_EQ(known_rows, 24u);
  EXPECT_EQ(unknown_rows, 80u);
}

TEST(CliCompare, SummarizesAllFourRegimes) {
  TempDir dir;
  const std::string cfg = base_config(dir, "partition_seeds = 1,2\n");
  ASSERT_EQ(run_cli("compare --config " + cfg), 0);
  const auto rows = lines_of(dir.file("out/compare.csv"));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0],
            "regime,auroc_mean,auroc_std,f_score_mean,f_score_std,accuracy_mean,accuracy_std");
  std::vector<std::string> regimes;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields_of(rows[i]);
    ASSERT_EQ(f.size(), 7u);
    regimes.push_back(f[0]);
    for (std::size_t j = 1; j < 7; ++j) {
      const double v = std::stod(f[j]);
      EXPECT_GE(v, -1e-12);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_NE(std::find(regimes.begin(), regimes.end(), "joint"), regimes.end());
  EXPECT_NE(std::find(regimes.begin(), regimes.end(), "pretrained_encoder"), regimes.end());
  EXPECT_NE(std::find(regimes.begin(), regimes.end(), "softmax_only"), regimes.end());
  EXPECT_NE(std::find(regimes.begin(), regimes.end(), "raw_input_flow"), regimes.end());

  const auto parts = lines_of(dir.file("out/compare_partitions.csv"));
  ASSERT_EQ(parts.size(), 1u + 4u * 2u);
  EXPECT_TRUE(fs::exists(dir.file("out/compare.txt")));
}

TEST(CliErrors, UsageAndIoProblemsExitTwo) {
  TempDir dir;
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("train"), 2);
  EXPECT_EQ(run_cli("frobnicate --config x.cfg"), 2);
  EXPECT_EQ(run_cli("train --config " + dir.file("nope.cfg")), 2);

  const std::string bad_key = dir.file("bad_key.cfg");
  write_file(bad_key, "dataset = synthetic\nfrobnicate = 3\n");
  EXPECT_EQ(run_cli("train --config " + bad_key), 2);

  const std::string bad_line = dir.file("bad_line.cfg");
  write_file(bad_line, "dataset\n");  // key with no '=' separator
  EXPECT_EQ(run_cli("train --config " + bad_line), 2);

  // Eval without a checkpoint.
  const std::string cfg = base_config(dir);
  EXPECT_EQ(run_cli("eval --config " + cfg), 2);
  EXPECT_FALSE(fs::exists(dir.file("out/eval_report.csv")));
}

TEST(CliErrors, DivergenceExitsOne) {
  TempDir dir;
  const std::string cfg = base_config(
      dir, "lr_classifier = 1e15\nlr_flow = 1e15\ngrad_clip = 1e30\nepochs = 5\n");
  EXPECT_EQ(run_cli("train --config " + cfg), 1);
  // The failed run must not leave a partial checkpoint behind.
  EXPECT_FALSE(fs::exists(dir.file("out/model.ohyb")));
  EXPECT_FALSE(fs::exists(dir.file("out/model.ohyb.tmp")));
}

}  // namespace
