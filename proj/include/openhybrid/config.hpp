#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "openhybrid/data.hpp"
#include "openhybrid/trainer.hpp"

namespace openhybrid {

/// Flat key=value config (comments with '#', blank lines ignored) plus
/// command-line overrides of the same keys.
std::map<std::string, std::string> parse_config_file(const std::string& path);

struct ExperimentConfig {
  // Dataset: "synthetic" or "idx".
  std::string dataset = "synthetic";
  std::size_t classes = 10;
  std::size_t per_class = 200;
  std::size_t dim = 2;
  double spread = 0.5;
  std::uint64_t data_seed = 7;
  std::string idx_images;
  std::string idx_labels;
  std::size_t subsample_per_class = 0;  // 0 = keep everything
  std::uint64_t subsample_seed = 11;

  ModelConfig model;
  TrainConfig train;

  std::size_t k_known = 6;
  std::vector<std::uint64_t> partition_seeds = {1, 2, 3, 4, 5};
  double s = 0.0;

  std::string out_dir = "out";
  std::string checkpoint;  // defaults to <out_dir>/model.ohyb
  std::string export_dataset_csv;

  std::string checkpoint_path() const;

  /// Parses and validates; throws std::invalid_argument on unknown keys or
  /// unusable values.
  static ExperimentConfig from_map(const std::map<std::string, std::string>& kv);
};

/// Materializes the configured dataset (generating or loading + optional
/// per-class subsampling).
LabeledDataset make_dataset(const ExperimentConfig& cfg);

}  // namespace openhybrid
