#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "openhybrid/tensor.hpp"

namespace openhybrid {

/// Raw dataset with original zero-based class ids (labels < class_count).
struct LabeledDataset {
  Tensor features;          // [n, m]
  std::vector<int> labels;  // original class ids, 0-based
  std::size_t class_count = 0;

  std::size_t size() const { return labels.size(); }
};

/// Training or test split after open-set relabeling: known classes are 1..k
/// in partition order, every unknown class is k+1.
struct SplitData {
  Tensor features;
  std::vector<int> labels;  // 1-based

  std::size_t size() const { return labels.size(); }
};

struct PartitionSpec {
  std::vector<int> known_classes;    // original ids; position i-1 becomes label i
  std::vector<int> unknown_classes;  // original ids, all collapsed to k+1
  std::uint64_t seed = 0;
};

struct OpenSetSplit {
  SplitData train;  // known classes only
  SplitData test;   // held-out known samples plus all unknown samples
  PartitionSpec spec;
  std::size_t k_known = 0;
  std::size_t k_test_classes = 0;  // distinct original classes present in test
};

/// Treats a raw dataset as a closed-set training split (labels shifted to
/// 1..class_count).
SplitData as_split(const LabeledDataset& ds);

/// Isotropic Gaussian clusters on a seeded random center layout with minimum
/// inter-center distance 4*spread. Throws if no layout is found within 10^4
/// rejection attempts.
LabeledDataset gen_gaussian_mixture(std::size_t n_per_class, std::size_t n_classes,
                                    std::size_t dim, double spread, std::uint64_t seed);

/// IDX parse failures, tagged so callers can assert the exact cause.
class IdxError : public std::runtime_error {
 public:
  enum class Code { kIo, kBadMagic, kBadType, kBadRank, kTruncated, kCountMismatch };
  IdxError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// One IDX record: big-endian header (magic 0x00 0x00, type byte, rank byte,
/// rank u32 extents) followed by unsigned-byte payload.
struct IdxData {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
};

IdxData read_idx_file(const std::string& path);
void write_idx_file(const std::string& path, const IdxData& data);

/// MNIST-style ingestion: rank-3 image file + rank-1 label file, pixel values
/// scaled to [0,1] by /255, images flattened row-major.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Seeded class split: known classes are drawn by shuffling the class ids,
/// then each known class is split 80/20 into train/test; unknown-class
/// samples all go to test with label k+known+... collapsed to k+1.
OpenSetSplit partition(const LabeledDataset& ds, std::size_t k_known, std::uint64_t seed);

/// Per-class cap: keeps at most `cap` seeded samples of each class, in
/// original dataset order.
LabeledDataset subsample_per_class(const LabeledDataset& ds, std::size_t cap,
                                   std::uint64_t seed);

/// CSV export: one row per sample, label first, then feature values.
void write_dataset_csv(const std::string& path, const LabeledDataset& ds);

}  // namespace openhybrid
